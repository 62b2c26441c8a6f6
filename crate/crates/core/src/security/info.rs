use crate::{Error, Result};

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.log2() };
    Ok(term(x) + term(1.0 - x))
}

/// Kullback-Leibler divergence between Bernoulli(x) and Bernoulli(y), in nats.
pub fn kl_divergence(x: f64, y: f64) -> Result<f64> {
    let open = |v: f64| v > 0.0 && v < 1.0;
    if !open(x) || !open(y) {
        return Err(Error::Domain(format!("KL divergence needs x, y in (0, 1), got ({x}, {y})")));
    }
    Ok(x * (x / y).ln() + (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln())
}
