//! Run configuration: a flat `key = value` file with dotted keys, overridable
//! from the command line.
//!
//! ```text
//! # field-test layout
//! layout.d_alice_a0 = 9.3km
//! layout.theta      = 165deg
//! detector.dead_time = 30ns
//! security.e_tol    = 1.5%
//! run.seed          = 7
//! ```
//!
//! Physical quantities must carry a unit suffix (see [`crate::units`]).
//! Keys not listed in [`KEYS`] are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackContext, AttackSpec, CommitLocation, CommitPlan, CommitTime, DeadTimeVariant};
use crate::geometry::TimingObservations;
use crate::photonic::{DoubleClickPolicy, SeparationRule};
use crate::protocol::ProtocolConfig;
use crate::security::EstimationMode;
use crate::units::{parse_quantity, Dimension};
use crate::{Error, Result};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("layout.d_alice_bob", "length"),
    ("layout.d_alice_a0", "length"),
    ("layout.d_alice_a1", "length"),
    ("layout.d_a0_b0", "length"),
    ("layout.d_a1_b1", "length"),
    ("layout.theta", "angle A0-Alice-A1"),
    ("speeds.bob_alice", "fraction of c"),
    ("speeds.alice_a0", "fraction of c"),
    ("speeds.alice_a1", "fraction of c"),
    ("speeds.a0_b0", "fraction of c"),
    ("speeds.a1_b1", "fraction of c"),
    ("source.mu", "mean photon number"),
    ("source.intensity_fluctuation", "fraction"),
    ("source.rep_rate", "rate"),
    ("source.n_pulses", "pulses per train"),
    ("source.n_parallel", "number of trains"),
    ("source.start_time", "time of the first pulse"),
    ("detector.efficiency", "fraction"),
    ("detector.extra_optics_efficiency", "fraction"),
    ("detector.dark_rate", "rate"),
    ("detector.dead_time", "time"),
    ("detector.double_event_window", "time"),
    ("detector.gate_duration", "time"),
    ("security.n_tol", "integer"),
    ("security.e_tol", "fraction"),
    ("security.eps_rect", "probability"),
    ("security.eps_diag", "probability"),
    ("protocol.committed_bit", "0, 1 or alternate"),
    ("protocol.baseline_error", "probability"),
    ("protocol.hold_time", "time"),
    ("protocol.processing_delay", "time"),
    ("protocol.channel_bit_rate", "rate"),
    ("protocol.key_bits", "integer or auto"),
    ("protocol.double_clicks", "random_assign or discard"),
    ("protocol.separation", "none, naive or quiet_period"),
    ("protocol.estimation", "worst_case or disabled"),
    ("timing.t0", "time"),
    ("timing.t_b0", "time"),
    ("timing.t_b1", "time"),
    ("run.seed", "integer"),
    ("run.reps", "integer"),
    ("run.out", "path of the JSON report"),
    ("run.transcript", "path of the JSONL transcript"),
    ("bound.sweep_from", "integer"),
    ("bound.sweep_to", "integer"),
    ("bound.sweep_step", "integer"),
    ("attack.strategy", "strong_pulse_double_click, dead_time_two_pulse, dead_time_three_pulse, multi_photon_split, delayed_commit"),
    ("attack.countermeasure", "discard_doubles, random_assign, none, naive_separation, quiet_period_2tdead"),
    ("attack.estimation", "worst_case or disabled"),
    ("attack.intensity", "mean photon number of strong pulses"),
    ("attack.offset", "time"),
    ("attack.epsilon", "time"),
    ("attack.trials", "integer"),
    ("attack.commit_location", "bob, a0, a1, max_point, polar or random"),
    ("attack.commit_distance", "length"),
    ("attack.commit_psi", "angle"),
    ("attack.commit_time", "latest or a time"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitChoice {
    Zero,
    One,
    /// Repetition `i` commits `i mod 2`.
    Alternate,
}

impl BitChoice {
    pub fn for_rep(self, rep: u64) -> u8 {
        match self {
            BitChoice::Zero => 0,
            BitChoice::One => 1,
            BitChoice::Alternate => (rep % 2) as u8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingSettings {
    pub t0: Option<f64>,
    pub t_b0: Option<f64>,
    pub t_b1: Option<f64>,
}

impl TimingSettings {
    /// All three times, or a config error naming the first missing key.
    pub fn require(&self) -> Result<TimingObservations> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::Config {
                path: key.to_string(),
                reason: "required for this command".into(),
            })
        };
        TimingObservations::new(need(self.t0, "timing.t0")?, need(self.t_b0, "timing.t_b0")?, need(self.t_b1, "timing.t_b1")?)
    }

    fn any(&self) -> bool {
        self.t0.is_some() || self.t_b0.is_some() || self.t_b1.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SweepSettings {
    pub from: Option<u64>,
    pub to: Option<u64>,
    pub step: Option<u64>,
}

impl SweepSettings {
    /// The `n_tol` values to sweep, if a sweep was requested.
    pub fn values(&self) -> Result<Option<Vec<u64>>> {
        match (self.from, self.to) {
            (None, None) => Ok(None),
            (Some(from), Some(to)) => {
                let step = self.step.unwrap_or(1);
                if step == 0 || to < from {
                    return Err(Error::Config {
                        path: "bound.sweep_step".into(),
                        reason: "need sweep_from <= sweep_to and a positive step".into(),
                    });
                }
                Ok(Some((from..=to).step_by(step as usize).collect()))
            }
            _ => Err(Error::Config {
                path: "bound.sweep_to".into(),
                reason: "sweep_from and sweep_to go together".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSettings {
    pub strategy: Option<String>,
    pub countermeasure: Option<String>,
    pub estimation: EstimationMode,
    pub intensity: f64,
    pub offset: Option<f64>,
    pub epsilon: f64,
    pub trials: u64,
    pub commit_location: String,
    pub commit_distance: Option<f64>,
    pub commit_psi: Option<f64>,
    pub commit_time: Option<f64>,
}

impl Default for AttackSettings {
    fn default() -> Self {
        AttackSettings {
            strategy: None,
            countermeasure: None,
            estimation: EstimationMode::WorstCase,
            intensity: 1e3,
            offset: None,
            epsilon: 1e-9,
            trials: 10_000,
            commit_location: "random".into(),
            commit_distance: None,
            commit_psi: None,
            commit_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub protocol: ProtocolConfig,
    pub committed_bit: BitChoice,
    pub timing: TimingSettings,
    pub sweep: SweepSettings,
    pub attack: AttackSettings,
    pub seed: Option<u64>,
    pub reps: u64,
    pub out: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            protocol: ProtocolConfig::default(),
            committed_bit: BitChoice::Alternate,
            timing: TimingSettings::default(),
            sweep: SweepSettings::default(),
            attack: AttackSettings::default(),
            seed: None,
            reps: 8,
            out: None,
            transcript: None,
        }
    }
}

fn config_err(key: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config {
        path: key.to_string(),
        reason: reason.to_string(),
    }
}

/// Splits config text into `(line, key, value)` triples. `#` starts a comment.
pub fn parse_entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(&format!("line {}", i + 1), "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(config_err(&format!("line {}", i + 1), "empty key or value"));
        }
        entries.push((i + 1, key.to_string(), value.to_string()));
    }
    Ok(entries)
}

/// Parses a `key=value` override as given on the command line.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| config_err(text, "expected `key=value`"))?;
    Ok((key.trim().to_string(), value.trim().to_string()))
}

impl RunConfig {
    /// Defaults overlaid with the entries of a config file.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (line, key, value) in parse_entries(text)? {
            if !seen.insert(key.clone()) {
                return Err(config_err(&key, format!("set twice (again on line {line})")));
            }
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }

    /// Assigns one key. Errors name the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.apply(key, value).map_err(|e| match e {
            Error::Config { .. } => e,
            other => config_err(key, other),
        })
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        use Dimension::*;
        let q = |dim| parse_quantity(value, dim);
        let int = || value.parse::<u64>().map_err(|_| config_err(key, format!("`{value}` is not a non-negative integer")));
        let p = &mut self.protocol;
        match key {
            "layout.d_alice_bob" => p.layout.d_alice_bob = q(Length)?,
            "layout.d_alice_a0" => p.layout.d_alice_a0 = q(Length)?,
            "layout.d_alice_a1" => p.layout.d_alice_a1 = q(Length)?,
            "layout.d_a0_b0" => p.layout.d_a0_b0 = q(Length)?,
            "layout.d_a1_b1" => p.layout.d_a1_b1 = q(Length)?,
            "layout.theta" => p.layout.theta = q(Angle)?,
            "speeds.bob_alice" => p.layout.speeds.bob_alice = q(Dimensionless)?,
            "speeds.alice_a0" => p.layout.speeds.alice_a0 = q(Dimensionless)?,
            "speeds.alice_a1" => p.layout.speeds.alice_a1 = q(Dimensionless)?,
            "speeds.a0_b0" => p.layout.speeds.a0_b0 = q(Dimensionless)?,
            "speeds.a1_b1" => p.layout.speeds.a1_b1 = q(Dimensionless)?,
            "source.mu" => p.source.mu = q(Dimensionless)?,
            "source.intensity_fluctuation" => p.source.intensity_fluctuation = q(Dimensionless)?,
            "source.rep_rate" => p.source.rep_rate = q(Rate)?,
            "source.n_pulses" => p.source.n_pulses = int()? as usize,
            "source.n_parallel" => p.source.n_parallel = int()? as usize,
            "source.start_time" => p.source.start_time = q(Time)?,
            "detector.efficiency" => p.detector.efficiency = q(Dimensionless)?,
            "detector.extra_optics_efficiency" => p.detector.extra_optics_efficiency = q(Dimensionless)?,
            "detector.dark_rate" => p.detector.dark_rate = q(Rate)?,
            "detector.dead_time" => p.detector.dead_time = q(Time)?,
            "detector.double_event_window" => p.detector.double_event_window = q(Time)?,
            "detector.gate_duration" => p.detector.gate_duration = q(Time)?,
            "security.n_tol" => p.security.n_tol = int()?,
            "security.e_tol" => p.security.e_tol = q(Dimensionless)?,
            "security.eps_rect" => p.security.eps_rect = q(Dimensionless)?,
            "security.eps_diag" => p.security.eps_diag = q(Dimensionless)?,
            "protocol.committed_bit" => {
                self.committed_bit = match value {
                    "0" => BitChoice::Zero,
                    "1" => BitChoice::One,
                    "alternate" => BitChoice::Alternate,
                    _ => return Err(config_err(key, "expected 0, 1 or alternate")),
                }
            }
            "protocol.baseline_error" => p.baseline_error = q(Dimensionless)?,
            "protocol.hold_time" => p.hold_time = q(Time)?,
            "protocol.processing_delay" => p.processing_delay = q(Time)?,
            "protocol.channel_bit_rate" => p.channel_bit_rate = q(Rate)?,
            "protocol.key_bits" => p.key_bits = if value == "auto" { None } else { Some(int()? as usize) },
            "protocol.double_clicks" => {
                p.postselection.double_clicks = match value {
                    "random_assign" => DoubleClickPolicy::RandomAssign,
                    "discard" => DoubleClickPolicy::Discard,
                    _ => return Err(config_err(key, "expected random_assign or discard")),
                }
            }
            "protocol.separation" => {
                p.postselection.separation = match value {
                    "none" => SeparationRule::None,
                    "naive" => SeparationRule::Naive,
                    "quiet_period" => SeparationRule::QuietPeriod,
                    _ => return Err(config_err(key, "expected none, naive or quiet_period")),
                }
            }
            "protocol.estimation" => p.estimation = parse_estimation(key, value)?,
            "timing.t0" => self.timing.t0 = Some(q(Time)?),
            "timing.t_b0" => self.timing.t_b0 = Some(q(Time)?),
            "timing.t_b1" => self.timing.t_b1 = Some(q(Time)?),
            "run.seed" => self.seed = Some(int()?),
            "run.reps" => self.reps = int()?,
            "run.out" => self.out = Some(PathBuf::from(value)),
            "run.transcript" => self.transcript = Some(PathBuf::from(value)),
            "bound.sweep_from" => self.sweep.from = Some(int()?),
            "bound.sweep_to" => self.sweep.to = Some(int()?),
            "bound.sweep_step" => self.sweep.step = Some(int()?),
            "attack.strategy" => self.attack.strategy = Some(value.to_string()),
            "attack.countermeasure" => self.attack.countermeasure = Some(value.to_string()),
            "attack.estimation" => self.attack.estimation = parse_estimation(key, value)?,
            "attack.intensity" => self.attack.intensity = q(Dimensionless)?,
            "attack.offset" => self.attack.offset = Some(q(Time)?),
            "attack.epsilon" => self.attack.epsilon = q(Time)?,
            "attack.trials" => self.attack.trials = int()?,
            "attack.commit_location" => self.attack.commit_location = value.to_string(),
            "attack.commit_distance" => self.attack.commit_distance = Some(q(Length)?),
            "attack.commit_psi" => self.attack.commit_psi = Some(q(Angle)?),
            "attack.commit_time" => {
                self.attack.commit_time = if value == "latest" { None } else { Some(q(Time)?) }
            }
            _ => return Err(config_err(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks every parameter and aligns Bob's assumed source parameters
    /// with the configured source.
    pub fn resolve(mut self) -> Result<Self> {
        self.protocol.security.mu = self.protocol.source.mu;
        self.protocol.security.intensity_fluctuation = self.protocol.source.intensity_fluctuation;
        self.protocol.validate()?;
        if self.timing.any() {
            self.timing.require()?;
        }
        self.sweep.values()?;
        Ok(self)
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| config_err("run.seed", "a seed is required (use --seed or run.seed)"))
    }

    /// The honest setting an attack runs against. Deadlines default to the
    /// first field run.
    pub fn attack_context(&self) -> Result<AttackContext> {
        let mut ctx = AttackContext {
            layout: self.protocol.layout,
            source: self.protocol.source,
            detector: self.protocol.detector,
            security: self.protocol.security,
            ..AttackContext::default()
        };
        if self.timing.any() {
            ctx.deadlines = self.timing.require()?;
        }
        Ok(ctx)
    }

    pub fn attack_spec(&self) -> Result<AttackSpec> {
        let a = &self.attack;
        let strategy = a
            .strategy
            .as_deref()
            .ok_or_else(|| config_err("attack.strategy", "required for the attack command"))?;
        let counter = a.countermeasure.as_deref();
        let bad_counter = |allowed: &str| config_err("attack.countermeasure", format!("expected one of: {allowed}"));
        let spec = match strategy {
            "strong_pulse_double_click" => AttackSpec::StrongPulseDoubleClick {
                countermeasure: match counter.unwrap_or("random_assign") {
                    "random_assign" => DoubleClickPolicy::RandomAssign,
                    "discard_doubles" | "discard" => DoubleClickPolicy::Discard,
                    _ => return Err(bad_counter("random_assign, discard_doubles")),
                },
                intensity: a.intensity,
            },
            "dead_time_two_pulse" | "dead_time_three_pulse" => AttackSpec::DeadTime {
                variant: if strategy == "dead_time_two_pulse" {
                    DeadTimeVariant::TwoPulse
                } else {
                    DeadTimeVariant::ThreePulse
                },
                countermeasure: match counter.unwrap_or("quiet_period_2tdead") {
                    "none" => SeparationRule::None,
                    "naive_separation" | "naive" => SeparationRule::Naive,
                    "quiet_period_2tdead" | "quiet_period" => SeparationRule::QuietPeriod,
                    _ => return Err(bad_counter("none, naive_separation, quiet_period_2tdead")),
                },
                intensity: a.intensity,
                offset: a.offset,
                epsilon: a.epsilon,
            },
            "multi_photon_split" => AttackSpec::MultiPhotonSplit {
                estimation: a.estimation,
            },
            "delayed_commit" => {
                let location = match a.commit_location.as_str() {
                    "bob" => CommitLocation::Bob,
                    "a0" => CommitLocation::A0,
                    "a1" => CommitLocation::A1,
                    "max_point" => CommitLocation::MaxPoint,
                    "random" => CommitLocation::Random,
                    "polar" => CommitLocation::Polar {
                        distance: a
                            .commit_distance
                            .ok_or_else(|| config_err("attack.commit_distance", "required for a polar commit point"))?,
                        psi: a
                            .commit_psi
                            .ok_or_else(|| config_err("attack.commit_psi", "required for a polar commit point"))?,
                    },
                    _ => return Err(config_err("attack.commit_location", "expected bob, a0, a1, max_point, polar or random")),
                };
                let time = match a.commit_time {
                    None => CommitTime::Latest,
                    Some(time) => CommitTime::At { time },
                };
                AttackSpec::DelayedCommit {
                    plan: CommitPlan { location, time },
                }
            }
            _ => return Err(config_err("attack.strategy", format!("unknown strategy `{strategy}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_estimation(key: &str, value: &str) -> Result<EstimationMode> {
    match value {
        "worst_case" => Ok(EstimationMode::WorstCase),
        "disabled" => Ok(EstimationMode::Disabled),
        _ => Err(config_err(key, "expected worst_case or disabled")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parses_units_and_comments() {
        let cfg = RunConfig::from_text(
            "# layout\nlayout.d_alice_a0 = 9.3km\nlayout.theta=165deg # wide\n\ndetector.dead_time = 30ns\nsecurity.e_tol = 1.5%\nrun.seed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.protocol.layout.d_alice_a0, 9300.0);
        assert_abs_diff_eq!(cfg.protocol.layout.theta, 165f64.to_radians(), epsilon = 1e-15);
        assert_abs_diff_eq!(cfg.protocol.detector.dead_time, 30e-9, epsilon = 1e-20);
        assert_abs_diff_eq!(cfg.protocol.security.e_tol, 0.015, epsilon = 1e-15);
        assert_eq!(cfg.seed, Some(7));
    }

    #[test]
    fn errors_name_the_key() {
        let err = RunConfig::from_text("layout.d_alice_a0 = 9.3").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "layout.d_alice_a0"), "{err}");
        let err = RunConfig::from_text("layout.nonsense = 1km").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "layout.nonsense"));
        assert!(RunConfig::from_text("just words").is_err());
        assert!(RunConfig::from_text("run.seed = 1\nrun.seed = 2").is_err());
    }

    #[test]
    fn resolve_validates_and_syncs_source() {
        let mut cfg = RunConfig::default();
        cfg.set("source.mu", "0.3").unwrap();
        let cfg = cfg.resolve().unwrap();
        assert_eq!(cfg.protocol.security.mu, 0.3);
        let mut bad = RunConfig::default();
        bad.set("detector.efficiency", "1.5").unwrap();
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn timing_is_all_or_nothing() {
        let mut cfg = RunConfig::default();
        cfg.set("timing.t0", "1.53us").unwrap();
        cfg.set("timing.t_b0", "92.85us").unwrap();
        let err = cfg.clone().resolve().unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "timing.t_b1"));
        cfg.set("timing.t_b1", "102.74us").unwrap();
        assert!(cfg.resolve().is_ok());
    }

    #[test]
    fn builds_attack_specs() {
        let mut cfg = RunConfig::default();
        assert!(cfg.attack_spec().is_err());
        cfg.set("attack.strategy", "dead_time_three_pulse").unwrap();
        cfg.set("attack.countermeasure", "naive_separation").unwrap();
        assert_eq!(cfg.attack_spec().unwrap().name(), "dead_time_three_pulse");
        cfg.set("attack.countermeasure", "discard_doubles").unwrap();
        assert!(cfg.attack_spec().is_err());
        cfg.set("attack.strategy", "delayed_commit").unwrap();
        cfg.set("attack.commit_location", "polar").unwrap();
        assert!(cfg.attack_spec().is_err());
        cfg.set("attack.commit_distance", "3km").unwrap();
        cfg.set("attack.commit_psi", "10deg").unwrap();
        assert!(cfg.attack_spec().is_ok());
    }

    #[test]
    fn sweep_range() {
        let s = SweepSettings {
            from: Some(50),
            to: Some(300),
            step: Some(50),
        };
        assert_eq!(s.values().unwrap().unwrap(), vec![50, 100, 150, 200, 250, 300]);
        let half = SweepSettings {
            from: Some(50),
            ..SweepSettings::default()
        };
        assert!(half.values().is_err());
    }

    #[test]
    fn every_listed_key_is_accepted() {
        let samples = [
            ("length", "1km"),
            ("angle", "90deg"),
            ("time", "1us"),
            ("rate", "1MHz"),
        ];
        for (key, desc) in KEYS {
            let value = samples
                .iter()
                .find(|(d, _)| desc == d || desc.starts_with(&format!("{d} ")) || desc.ends_with(d))
                .map(|(_, v)| *v);
            let value = match (*key, value) {
                ("protocol.committed_bit", _) => "1",
                ("protocol.key_bits", _) => "auto",
                ("protocol.double_clicks", _) => "discard",
                ("protocol.separation", _) => "naive",
                ("protocol.estimation" | "attack.estimation", _) => "disabled",
                ("run.out" | "run.transcript", _) => "x.json",
                ("attack.strategy" | "attack.countermeasure" | "attack.commit_location", _) => "x",
                ("attack.commit_time", _) => "latest",
                (_, Some(v)) => v,
                _ => "3",
            };
            RunConfig::default().set(key, value).unwrap_or_else(|e| panic!("{key}={value}: {e}"));
        }
    }
}
