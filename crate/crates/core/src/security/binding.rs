use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use super::{binary_entropy, SecurityParams};
use crate::numeric::{compensated_sum, golden_section_max, log_add_exp};
use crate::{Error, Result};

/// Above this `n_tol` the combinatorial factor is summed in the log domain.
const EXACT_BINOMIAL_LIMIT: u64 = 1000;
const DELTA_GRID: usize = 10_000;
const DELTA_INSET: f64 = 1e-6;
const DELTA_TOL: f64 = 1e-9;

/// `floor(e_tol * n_tol)` computed on the shortest decimal form of `e_tol`,
/// so `0.29 * 100` gives 29 rather than 28.
pub fn floor_error_budget(e_tol: f64, n_tol: u64) -> u64 {
    if !(e_tol > 0.0) {
        return 0;
    }
    let text = format!("{e_tol}");
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    let digits = format!("{int_part}{frac_part}");
    let (Ok(numerator), Ok(scale)) = (digits.parse::<u128>(), u32::try_from(frac_part.len())) else {
        return (e_tol * n_tol as f64).floor() as u64;
    };
    let Some(denominator) = 10u128.checked_pow(scale) else {
        return (e_tol * n_tol as f64).floor() as u64;
    };
    match numerator.checked_mul(n_tol as u128) {
        Some(product) => (product / denominator) as u64,
        None => (e_tol * n_tol as f64).floor() as u64,
    }
}

/// `1 + sum_{k=1}^{k_max} (2^k - 1) C(n, k)`, exactly.
pub fn combinatorial_factor(n: u64, k_max: u64) -> BigUint {
    let mut total = BigUint::one();
    let mut binom = BigUint::one();
    for k in 1..=k_max.min(n) {
        binom = binom * BigUint::from(n - k + 1) / BigUint::from(k);
        let weight = (BigUint::one() << k as usize) - BigUint::one();
        total += &binom * weight;
    }
    total
}

fn ln_biguint(value: &BigUint) -> f64 {
    let bits = value.bits();
    if bits <= 1000 {
        return value.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (value >> shift as usize).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of [`combinatorial_factor`]. Exact big-integer arithmetic up
/// to `n = 1000`, compensated log-domain summation beyond.
pub fn ln_combinatorial_factor(n: u64, k_max: u64) -> f64 {
    let k_max = k_max.min(n);
    if k_max == 0 {
        return 0.0;
    }
    if n <= EXACT_BINOMIAL_LIMIT {
        return ln_biguint(&combinatorial_factor(n, k_max));
    }
    let mut ln_terms = Vec::with_capacity(k_max as usize + 1);
    ln_terms.push(0.0);
    let mut ln_binom = 0.0;
    for k in 1..=k_max {
        ln_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        let ln_weight = k as f64 * std::f64::consts::LN_2 + (-(0.5f64).powi(k as i32)).ln_1p();
        ln_terms.push(ln_binom + ln_weight);
    }
    let peak = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    peak + compensated_sum(ln_terms.iter().map(|l| (l - peak).exp())).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComponents {
    /// `exp((delta N - K)^2 / (1 - N))` at the minimiser.
    pub exponential_term: f64,
    /// `2^{1 - (1 - h(delta)) N}` at the minimiser.
    pub entropy_term: f64,
    pub combinatorial_factor: f64,
    pub ln_combinatorial_factor: f64,
    /// `K = floor(E_tol N_tol)`.
    pub max_errors: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BindingBound {
    pub eps_b: f64,
    pub delta_star: f64,
    pub components: BoundComponents,
}

struct Objective {
    n: f64,
    k: f64,
    ln_factor: f64,
}

impl Objective {
    fn exponent(&self, delta: f64) -> f64 {
        let shift = delta * self.n - self.k;
        shift * shift / (1.0 - self.n)
    }

    fn ln_entropy_term(&self, delta: f64) -> f64 {
        let h = binary_entropy(delta).expect("delta inside (0, 1/2)");
        (1.0 - (1.0 - h) * self.n) * std::f64::consts::LN_2
    }

    /// Log of the braced expression times the combinatorial factor.
    fn ln_value(&self, delta: f64) -> f64 {
        let x = self.exponent(delta);
        let mixed = (-x.exp_m1()).ln() + self.ln_entropy_term(delta);
        log_add_exp(mixed, std::f64::consts::LN_2 + x) + self.ln_factor
    }
}

/// Binding parameter: the infimum over `delta in (E_tol, 1/2)` of the
/// two-term tail bound, inflated by the error-pattern count, plus the
/// estimation failure probabilities.
pub fn epsilon_b_bound(params: &SecurityParams) -> Result<BindingBound> {
    params.validate()?;
    if params.n_tol < 2 {
        return Err(Error::param("security.n_tol", "the bound needs n_tol >= 2"));
    }
    let k = params.max_errors();
    let obj = Objective {
        n: params.n_tol as f64,
        k: k as f64,
        ln_factor: ln_combinatorial_factor(params.n_tol, k),
    };
    let lo = params.e_tol + DELTA_INSET;
    let hi = 0.5 - DELTA_INSET;
    let step = (hi - lo) / DELTA_GRID as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=DELTA_GRID {
        let v = obj.ln_value(lo + i as f64 * step);
        if v < best.1 {
            best = (i, v);
        }
    }
    let a = lo + best.0.saturating_sub(1) as f64 * step;
    let b = lo + (best.0 + 1).min(DELTA_GRID) as f64 * step;
    let (delta, neg) = golden_section_max(|d| -obj.ln_value(d), a, b, DELTA_TOL);
    let (delta_star, ln_min) = if -neg <= best.1 {
        (delta, -neg)
    } else {
        (lo + best.0 as f64 * step, best.1)
    };

    let eps_b = ln_min.exp() + params.eps_rect + params.eps_diag;
    Ok(BindingBound {
        eps_b,
        delta_star,
        components: BoundComponents {
            exponential_term: obj.exponent(delta_star).exp(),
            entropy_term: obj.ln_entropy_term(delta_star).exp(),
            combinatorial_factor: obj.ln_factor.exp(),
            ln_combinatorial_factor: obj.ln_factor,
            max_errors: k,
        },
    })
}
