//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use relbc_core::geometry::{ProtocolLayout, TimingObservations};
use relbc_core::photonic::Basis;
use relbc_core::protocol::{run_honest_protocol, ProtocolConfig};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const C: f64 = 299_792_458.0;
pub const US: f64 = 1e-6;

/// (t_B0, t_B1, t_commit) in microseconds for the eight field runs.
pub const FIELD_RUNS: [(f64, f64, f64); 8] = [
    (92.85, 102.74, 60.54),
    (93.02, 102.85, 60.68),
    (92.99, 102.92, 60.70),
    (92.98, 102.93, 60.70),
    (93.18, 103.22, 60.94),
    (92.97, 102.84, 60.65),
    (93.12, 103.08, 60.84),
    (93.24, 103.10, 60.91),
];
pub const FIELD_T0_US: f64 = 1.53;

/// (N_detect rect, N_detect diag, n_rect, n_diag) for the eight field runs.
pub const FIELD_SINGLES: [(u64, u64, u64, u64); 8] = [
    (189, 193, 112, 116),
    (196, 197, 119, 120),
    (203, 184, 126, 107),
    (195, 205, 118, 128),
    (192, 192, 115, 115),
    (186, 199, 109, 122),
    (186, 218, 109, 141),
    (196, 227, 119, 150),
];

// ---- combinatorics ----

/// `1 + sum (2^|S| - 1)` over every subset `S` of `n` positions with
/// `1 <= |S| <= k_max`, by walking all `2^n` subsets. Index `k` of the result
/// is the value for cutoff `k`.
pub fn subset_factor_all_cutoffs(n: u32) -> Vec<u64> {
    let mut by_size = vec![0u64; n as usize + 1];
    for mask in 0u64..(1u64 << n) {
        by_size[mask.count_ones() as usize] += 1;
    }
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut total = 1u64;
    out.push(total);
    for (size, &count) in by_size.iter().enumerate().skip(1) {
        total += count * ((1u64 << size) - 1);
        out.push(total);
    }
    out
}

/// Same count by listing every pair (S, T) with T a non-empty subset of S.
pub fn subset_pairs(n: u32, k_max: u32) -> u64 {
    let mut total = 1u64;
    for s in 0u64..(1u64 << n) {
        if s == 0 || s.count_ones() > k_max {
            continue;
        }
        let mut t = s;
        while t != 0 {
            total += 1;
            t = (t - 1) & s;
        }
    }
    total
}

// ---- binding bound ----

fn h2(x: f64) -> f64 {
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Direct evaluation of the bound on a uniform grid of `delta` values.
pub fn eps_b_grid(n_tol: u64, e_tol: f64, k: u64, factor: f64, eps_sum: f64, points: usize) -> (f64, f64) {
    let n = n_tol as f64;
    let (lo, hi) = (e_tol + 1e-7, 0.5 - 1e-7);
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=points {
        let d = lo + (hi - lo) * i as f64 / points as f64;
        let x = (d * n - k as f64).powi(2) / (1.0 - n);
        let v = factor * ((1.0 - x.exp()) * 2f64.powf(1.0 - (1.0 - h2(d)) * n) + 2.0 * x.exp()) + eps_sum;
        if v < best.0 {
            best = (v, d);
        }
    }
    best
}

// ---- geometry ----

#[derive(Clone, Copy, Debug)]
pub struct P2 {
    pub x: f64,
    pub y: f64,
}

impl P2 {
    pub fn dist(self, o: P2) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt()
    }
}

pub struct Sites {
    pub bob: P2,
    pub a0: P2,
    pub a1: P2,
    pub b0: P2,
    pub b1: P2,
}

pub fn sites(l: &ProtocolLayout) -> Sites {
    let h = l.theta / 2.0;
    let on_ray = |r: f64, angle: f64| P2 {
        x: r * angle.cos(),
        y: r * angle.sin(),
    };
    Sites {
        bob: P2 { x: -l.d_alice_bob, y: 0.0 },
        a0: on_ray(l.d_alice_a0, h),
        a1: on_ray(l.d_alice_a1, -h),
        b0: on_ray(l.d_alice_a0 + l.d_a0_b0, h),
        b1: on_ray(l.d_alice_a1 + l.d_a1_b1, -h),
    }
}

/// Farthest feasible commit point from Bob, by exhaustive grid search with
/// successive zooming. Feasible means Bob's signal can reach the point and
/// the result can still reach each B_i by its deadline. The distance is
/// capped at the B0-B1 split point.
pub fn commit_distance_grid(l: &ProtocolLayout, obs: &TimingObservations, n: usize) -> f64 {
    let s = sites(l);
    let b0 = C * (obs.t_b0 - obs.t0);
    let b1 = C * (obs.t_b1 - obs.t0);
    let span = s.b0.dist(s.b1);
    let q = (0.5 * (1.0 - C * (obs.t_b1 - obs.t_b0) / span)).clamp(0.0, 1.0);
    let split = P2 {
        x: s.b0.x + q * (s.b1.x - s.b0.x),
        y: s.b0.y + q * (s.b1.y - s.b0.y),
    };
    let cap = s.bob.dist(split);
    let value = |p: P2| {
        let r = s.bob.dist(p);
        if r + p.dist(s.b0) <= b0 && r + p.dist(s.b1) <= b1 {
            r.min(cap)
        } else {
            f64::NEG_INFINITY
        }
    };
    let reach = b0.min(b1);
    let (mut cx, mut cy, mut half) = (s.bob.x, s.bob.y, reach);
    let mut best = value(s.bob);
    let mut steps = n;
    for _ in 0..8 {
        let step = 2.0 * half / steps as f64;
        let (mut bx, mut by) = (cx, cy);
        for i in 0..=steps {
            for j in 0..=steps {
                let p = P2 {
                    x: cx - half + i as f64 * step,
                    y: cy - half + j as f64 * step,
                };
                let v = value(p);
                if v > best {
                    best = v;
                    bx = p.x;
                    by = p.y;
                }
            }
        }
        cx = bx;
        cy = by;
        half = 4.0 * step;
        steps = 200;
    }
    best
}

// ---- honest runs ----

/// Field-test photonics with pulse trains of 256 and thresholds loose enough for
/// such short trains.
pub fn miniature_config() -> ProtocolConfig {
    let mut cfg = ProtocolConfig::default();
    cfg.source.n_pulses = 256;
    cfg.security.n_tol = 5;
    cfg.security.e_tol = 0.2;
    cfg.security.eps_rect = 0.3;
    cfg.security.eps_diag = 0.3;
    cfg
}

#[derive(Debug, Default)]
pub struct HonestStats {
    pub runs: u64,
    pub accepted: u64,
    pub wrong_deductions: u64,
    pub unsound_bounds: u64,
    pub misordered: u64,
    pub matched: u64,
    pub matched_errors: u64,
    /// Retained detections by committed bit and prepared basis (rect, diag).
    pub by_bit_basis: [[u64; 2]; 2],
}

impl HonestStats {
    pub fn error_rate(&self) -> f64 {
        self.matched_errors as f64 / self.matched as f64
    }

    /// p-value of the chi-square independence test between the committed bit
    /// and the basis of the pulses Alice reports as detected.
    pub fn concealing_p_value(&self) -> f64 {
        let t = self.by_bit_basis;
        let total: f64 = t.iter().flatten().map(|&v| v as f64).sum();
        let mut stat = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let row = (t[r][0] + t[r][1]) as f64;
                let col = (t[0][c] + t[1][c]) as f64;
                let expected = row * col / total;
                stat += (t[r][c] as f64 - expected).powi(2) / expected;
            }
        }
        1.0 - ChiSquared::new(1.0).unwrap().cdf(stat)
    }
}

pub fn honest_suite(cfg: &ProtocolConfig, runs: u64, seed0: u64) -> HonestStats {
    let mut st = HonestStats::default();
    for k in 0..runs {
        let bit = (k % 2) as u8;
        let (t, v) = run_honest_protocol(cfg, bit, seed0 + k).expect("honest run");
        st.runs += 1;
        if v.accepted {
            st.accepted += 1;
            if v.deduced_bit != Some(bit) {
                st.wrong_deductions += 1;
            }
        }
        if t.t_commit_actual > v.t_commit_upper + 1e-12 {
            st.unsound_bounds += 1;
        }
        let o = t.observations;
        if !(o.t0 < t.t_unveil && t.t_unveil < o.t_b0.min(o.t_b1)) {
            st.misordered += 1;
        }
        let committed = Basis::for_commitment(bit);
        for d in t.detections.iter().filter(|d| d.retained) {
            let pulse = &t.pulses[d.pulse_index];
            let col = usize::from(pulse.basis != Basis::Rect);
            st.by_bit_basis[bit as usize][col] += 1;
            if pulse.basis == committed {
                st.matched += 1;
                st.matched_errors += u64::from(d.outcome_bit != pulse.bit);
            }
        }
    }
    st
}
