use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::photonic::{Basis, PulseRecord};
use crate::{Error, Result};

/// Upper bound on the probability that a pulse carries two or more photons
/// when the intensity can exceed `mu` by the fraction `delta_int`.
pub fn p_multi_bound(mu: f64, delta_int: f64) -> Result<f64> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", "must be finite and >= 0"));
    }
    if !(0.0..1.0).contains(&delta_int) {
        return Err(Error::param("intensity_fluctuation", "must lie in [0, 1)"));
    }
    let x = mu * (1.0 + delta_int);
    if x < 1e-3 {
        // 1 - (1 + x) e^{-x} = x^2/2 - x^3/3 + x^4/8 - ...
        return Ok(x * x * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0));
    }
    Ok(1.0 - (1.0 + x) * (-x).exp())
}

/// Bernoulli KL divergence allowing `x = 1`, where it tends to `ln(1/y)`.
fn kl_upper(x: f64, y: f64) -> f64 {
    let tail = if x >= 1.0 {
        0.0
    } else {
        (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln()
    };
    x * (x / y).ln() + tail
}

/// Finds the deviation `delta_m` with `exp(-D(p + delta_m || p) n_sent) = eps_target`.
///
/// `D` is strictly increasing on `(0, 1 - p)`, so plain bisection converges;
/// the result is accurate to a relative 1e-9.
pub fn solve_delta_multi(p_multi: f64, n_sent: u64, eps_target: f64) -> Result<f64> {
    if !(p_multi > 0.0 && p_multi < 1.0) {
        return Err(Error::Domain(format!("p_multi {p_multi} outside (0, 1)")));
    }
    if n_sent == 0 {
        return Err(Error::param("n_sent", "must be >= 1"));
    }
    if !(eps_target > 0.0) {
        return Err(Error::Domain("error probability must be positive".into()));
    }
    if eps_target >= 1.0 {
        return Ok(0.0);
    }
    let target = -eps_target.ln() / n_sent as f64;
    let ceiling = 1.0 - p_multi;
    if kl_upper(1.0, p_multi) <= target {
        return Err(Error::Domain(format!(
            "error probability {eps_target} unreachable with {n_sent} signals at p_multi {p_multi}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, ceiling);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kl_upper(p_multi + mid, p_multi) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Worst-case single-photon count: every multi-photon pulse is assumed
/// detected, so `n >= n_detect - ceil(n_sent (p_multi + delta_m))`.
pub fn estimate_n_single(n_detect: u64, n_sent: u64, p_multi: f64, delta_m: f64) -> u64 {
    let multi = (n_sent as f64 * (p_multi + delta_m)).ceil().max(0.0) as u64;
    n_detect.saturating_sub(multi)
}

/// Revealed outcomes, one per pulse index.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Declaration {
    pub entries: Vec<(usize, u8)>,
}

impl Declaration {
    /// Pairs Alice's detected indices with the outcome bits an agent revealed.
    pub fn from_report(detected: &[usize], bits: &[u8]) -> Result<Self> {
        if detected.len() != bits.len() {
            return Err(Error::Protocol(format!(
                "{} outcomes revealed for {} detected pulses",
                bits.len(),
                detected.len()
            )));
        }
        Ok(Declaration {
            entries: detected.iter().copied().zip(bits.iter().copied()).collect(),
        })
    }

    pub fn bits(&self) -> Vec<u8> {
        self.entries.iter().map(|&(_, b)| b).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub n_e_rect: u64,
    pub n_e_diag: u64,
    pub n_detect_rect: u64,
    pub n_detect_diag: u64,
}

/// Mismatches between Bob's prepared bits and the revealed bits, split by
/// preparation basis. All observed errors are charged to single photons.
pub fn count_errors(bob_preparation: &[PulseRecord], detected: &[usize], revealed: &Declaration) -> Result<ErrorCounts> {
    let detected_set: BTreeSet<usize> = detected.iter().copied().collect();
    let mut declared = BTreeSet::new();
    let mut counts = ErrorCounts::default();
    for &(index, bit) in &revealed.entries {
        if !detected_set.contains(&index) {
            return Err(Error::Protocol(format!("declaration references undetected pulse {index}")));
        }
        if !declared.insert(index) {
            return Err(Error::Protocol(format!("pulse {index} declared twice")));
        }
        let pulse = bob_preparation
            .get(index)
            .filter(|p| p.index == index)
            .ok_or_else(|| Error::Protocol(format!("no prepared pulse with index {index}")))?;
        let wrong = u64::from(bit != pulse.bit);
        match pulse.basis {
            Basis::Rect => {
                counts.n_detect_rect += 1;
                counts.n_e_rect += wrong;
            }
            Basis::Diag => {
                counts.n_detect_diag += 1;
                counts.n_e_diag += wrong;
            }
        }
    }
    if declared.len() != detected_set.len() {
        return Err(Error::Protocol(format!(
            "declaration covers {} of {} detected pulses",
            declared.len(),
            detected_set.len()
        )));
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub n_rect: u64,
    pub n_diag: u64,
    pub p_multi: f64,
    pub delta_multi_rect: f64,
    pub delta_multi_diag: f64,
    pub n_e_rect: u64,
    pub n_e_diag: u64,
    pub n_detect_rect: u64,
    pub n_detect_diag: u64,
    pub n_sent_rect: u64,
    pub n_sent_diag: u64,
}
