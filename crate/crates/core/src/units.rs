//! Physical constants and unit-suffixed quantity parsing.

use crate::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const C: f64 = 299_792_458.0;

/// Propagation speed factor of an optical fibre relative to vacuum.
pub const FIBER_SPEED_FACTOR: f64 = 1.0 / 1.5;

pub const MICROSECOND: f64 = 1e-6;
pub const NANOSECOND: f64 = 1e-9;
pub const KILOMETER: f64 = 1e3;

pub fn to_us(seconds: f64) -> f64 {
    seconds / MICROSECOND
}

pub fn to_km(meters: f64) -> f64 {
    meters / KILOMETER
}

/// Time in whole nanoseconds, the resolution of exported transcripts.
pub fn to_ns_int(seconds: f64) -> i64 {
    (seconds / NANOSECOND).round() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Angle,
    Rate,
    Dimensionless,
}

impl Dimension {
    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("km", 1e3), ("mm", 1e-3), ("m", 1.0)],
            Dimension::Time => &[
                ("ps", 1e-12),
                ("ns", 1e-9),
                ("us", 1e-6),
                ("µs", 1e-6),
                ("ms", 1e-3),
                ("s", 1.0),
            ],
            Dimension::Angle => &[("deg", std::f64::consts::PI / 180.0), ("rad", 1.0)],
            Dimension::Rate => &[("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3), ("Hz", 1.0), ("cps", 1.0)],
            Dimension::Dimensionless => &[("%", 0.01)],
        }
    }
}

/// Parses `"9.3km"`, `"30ns"`, `"165deg"`, `"1.5%"` into SI units.
///
/// Dimensioned quantities must carry a suffix; dimensionless ones may be bare.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let bad = |reason: String| Error::Domain(format!("`{text}`: {reason}"));
    // Longest suffix first so that "ms" is not read as "s".
    let mut suffixes: Vec<_> = dim.suffixes().to_vec();
    suffixes.sort_by_key(|(s, _)| std::cmp::Reverse(s.len()));
    for (suffix, scale) in suffixes {
        if let Some(number) = text.strip_suffix(suffix) {
            let value: f64 = number
                .trim()
                .parse()
                .map_err(|_| bad(format!("expected a number before `{suffix}`")))?;
            return Ok(value * scale);
        }
    }
    if dim == Dimension::Dimensionless {
        return text.parse().map_err(|_| bad("expected a number".into()));
    }
    Err(bad(format!("missing unit suffix for {dim:?}")))
}
