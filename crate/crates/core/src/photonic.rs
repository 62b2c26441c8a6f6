//! Weak-coherent-pulse BB84 source and Alice's two-detector polarisation
//! measurement, including threshold-detector dead time and the click
//! post-selection rules that keep her detection pattern basis-independent.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::rng::{seeded, ChaCha8Rng};
use crate::{Error, Result};

/// Slack for comparing event times built from different float expressions.
const TIME_EPS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Rect,
    Diag,
}

impl Basis {
    /// Measuring in the rectilinear basis commits to 0, diagonal to 1.
    pub fn for_commitment(bit: u8) -> Basis {
        if bit == 0 {
            Basis::Rect
        } else {
            Basis::Diag
        }
    }

    pub fn committed_bit(self) -> u8 {
        match self {
            Basis::Rect => 0,
            Basis::Diag => 1,
        }
    }

    pub fn conjugate(self) -> Basis {
        match self {
            Basis::Rect => Basis::Diag,
            Basis::Diag => Basis::Rect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Mean photon number per pulse.
    pub mu: f64,
    /// Bound on the relative intensity fluctuation.
    pub intensity_fluctuation: f64,
    pub rep_rate: f64,
    /// Pulses per train.
    pub n_pulses: usize,
    pub n_parallel: usize,
    /// Emission time of the first pulse of every train.
    pub start_time: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams {
            mu: 0.183,
            intensity_fluctuation: 0.1,
            rep_rate: 50e6,
            n_pulses: 2838,
            n_parallel: 2,
            start_time: 1.53e-6,
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::param("source.mu", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.intensity_fluctuation) {
            return Err(Error::param("source.intensity_fluctuation", "must lie in [0, 1)"));
        }
        if !(self.rep_rate > 0.0 && self.rep_rate.is_finite()) {
            return Err(Error::param("source.rep_rate", "must be positive"));
        }
        if self.n_parallel == 0 {
            return Err(Error::param("source.n_parallel", "need at least one train"));
        }
        Ok(())
    }

    pub fn total_pulses(&self) -> usize {
        self.n_pulses * self.n_parallel
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rep_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub extra_optics_efficiency: f64,
    /// Dark counts per second per detector.
    pub dark_rate: f64,
    pub dead_time: f64,
    /// A click this soon after a retained click is discarded.
    pub double_event_window: f64,
    /// Window over which dark counts can fire for one pulse.
    pub gate_duration: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            efficiency: 0.5,
            extra_optics_efficiency: 0.9,
            dark_rate: 100.0,
            dead_time: 30e-9,
            double_event_window: 60e-9,
            gate_duration: 20e-9,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("detector.efficiency", self.efficiency),
            ("detector.extra_optics_efficiency", self.extra_optics_efficiency),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, "probability outside [0, 1]"));
            }
        }
        if !(self.dead_time > 0.0) {
            return Err(Error::param("detector.dead_time", "must be positive"));
        }
        if !(self.dark_rate >= 0.0 && self.double_event_window >= 0.0 && self.gate_duration >= 0.0) {
            return Err(Error::param("detector", "rates and windows must be >= 0"));
        }
        if self.dark_click_probability() > 1.0 {
            return Err(Error::param("detector.dark_rate", "dark click probability per gate exceeds 1"));
        }
        Ok(())
    }

    /// Probability that one photon reaching a detector is registered.
    pub fn photon_detection_probability(&self) -> f64 {
        self.efficiency * self.extra_optics_efficiency
    }

    pub fn dark_click_probability(&self) -> f64 {
        self.dark_rate * self.gate_duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    /// Global index across all trains.
    pub index: usize,
    pub train: usize,
    pub basis: Basis,
    pub bit: u8,
    pub photon_number: u32,
    pub emit_time: f64,
}

/// Bob's pulses, train after train, with uniformly random basis and bit and
/// Poisson photon number at a per-pulse fluctuating intensity.
pub fn generate_pulse_train(src: &SourceParams, rng_seed: u64) -> Result<Vec<PulseRecord>> {
    let mut rng = seeded(rng_seed);
    generate_pulse_train_with(src, &mut rng)
}

pub fn generate_pulse_train_with(src: &SourceParams, rng: &mut ChaCha8Rng) -> Result<Vec<PulseRecord>> {
    src.validate()?;
    let mut pulses = Vec::with_capacity(src.total_pulses());
    for train in 0..src.n_parallel {
        for slot in 0..src.n_pulses {
            let basis = if rng.random::<bool>() { Basis::Diag } else { Basis::Rect };
            let bit = rng.random::<bool>() as u8;
            let fluctuation = if src.intensity_fluctuation > 0.0 {
                rng.random_range(-src.intensity_fluctuation..=src.intensity_fluctuation)
            } else {
                0.0
            };
            let photon_number = sample_poisson(src.mu * (1.0 + fluctuation), rng);
            pulses.push(PulseRecord {
                index: train * src.n_pulses + slot,
                train,
                basis,
                bit,
                photon_number,
                emit_time: src.start_time + slot as f64 / src.rep_rate,
            });
        }
    }
    Ok(pulses)
}

pub(crate) fn sample_poisson(lambda: f64, rng: &mut ChaCha8Rng) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(lambda).expect("positive finite rate");
    poisson.sample(rng) as u32
}

/// Which of the two detectors fired for one pulse. Detector 0 registers bit 0
/// of the measured basis (H or +), detector 1 registers bit 1 (V or -).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClickPair {
    pub d0: bool,
    pub d1: bool,
    /// Every click in this pair came from dark counts.
    pub dark_only: bool,
}

impl ClickPair {
    pub fn any(&self) -> bool {
        self.d0 || self.d1
    }

    pub fn double(&self) -> bool {
        self.d0 && self.d1
    }
}

/// Photon-by-photon measurement of one pulse in `alice_basis`.
///
/// In the matching basis a photon goes to the detector of the prepared bit
/// except with probability `baseline_error`; in the conjugate basis it picks a
/// detector uniformly. Each photon is then registered with the total detection
/// efficiency, and each detector may add a dark click during the gate.
pub fn measure_pulse(
    pulse: &PulseRecord,
    alice_basis: Basis,
    det: &DetectorModel,
    baseline_error: f64,
    rng: &mut ChaCha8Rng,
) -> ClickPair {
    let eta = det.photon_detection_probability();
    let mut photon_hit = [false, false];
    for _ in 0..pulse.photon_number {
        let target = if pulse.basis == alice_basis {
            if rng.random::<f64>() < baseline_error {
                1 - pulse.bit
            } else {
                pulse.bit
            }
        } else {
            rng.random::<bool>() as u8
        } as usize;
        if rng.random::<f64>() < eta {
            photon_hit[target] = true;
            if photon_hit[1 - target] {
                break;
            }
        }
    }
    let p_dark = det.dark_click_probability();
    let dark = [rng.random::<f64>() < p_dark, rng.random::<f64>() < p_dark];
    let d0 = photon_hit[0] || dark[0];
    let d1 = photon_hit[1] || dark[1];
    ClickPair {
        d0,
        d1,
        dark_only: (d0 || d1) && !photon_hit[0] && !photon_hit[1],
    }
}

/// Two threshold detectors with independent dead time.
#[derive(Debug, Clone)]
pub struct DetectorPair {
    model: DetectorModel,
    dead_until: [f64; 2],
}

impl DetectorPair {
    pub fn new(model: DetectorModel) -> Self {
        DetectorPair {
            model,
            dead_until: [f64::NEG_INFINITY; 2],
        }
    }

    pub fn model(&self) -> &DetectorModel {
        &self.model
    }

    /// Measures `pulse` arriving at `time`; a detector still dead from an
    /// earlier click stays silent.
    pub fn detect(
        &mut self,
        pulse: &PulseRecord,
        time: f64,
        alice_basis: Basis,
        baseline_error: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<RawClick> {
        let wanted = measure_pulse(pulse, alice_basis, &self.model, baseline_error, rng);
        let alive = |i: usize| time + TIME_EPS >= self.dead_until[i];
        let pair = ClickPair {
            d0: wanted.d0 && alive(0),
            d1: wanted.d1 && alive(1),
            dark_only: wanted.dark_only,
        };
        if pair.d0 {
            self.dead_until[0] = time + self.model.dead_time;
        }
        if pair.d1 {
            self.dead_until[1] = time + self.model.dead_time;
        }
        pair.any().then_some(RawClick {
            pulse_index: pulse.index,
            time,
            clicks: pair,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawClick {
    pub pulse_index: usize,
    pub time: f64,
    pub clicks: ClickPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawClickType {
    Single,
    Double,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub pulse_index: usize,
    pub click_time: f64,
    pub outcome_bit: u8,
    pub raw_click_type: RawClickType,
    pub retained: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoubleClickPolicy {
    /// Keep the event with a fair random outcome.
    #[default]
    RandomAssign,
    /// Drop the event. Leaks the basis to a strong-pulse attacker.
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationRule {
    /// Keep every click.
    None,
    /// Keep a click only if more than one dead time has passed since the
    /// previous click.
    Naive,
    /// Keep a click only after at least two dead times without any click, and
    /// never within the double-event window of a retained click.
    #[default]
    QuietPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PostSelection {
    pub double_clicks: DoubleClickPolicy,
    pub separation: SeparationRule,
}

/// Applies the double-click and separation rules to one detector pair's
/// time-ordered clicks. Every raw click yields one event; dropped ones carry
/// `retained = false`.
pub fn postselect_clicks(
    clicks: &[RawClick],
    det: &DetectorModel,
    policy: PostSelection,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DetectionEvent>> {
    if clicks.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::Invariant("clicks passed to post-selection are not time-ordered".into()));
    }
    let mut events = Vec::with_capacity(clicks.len());
    let mut last_click: Option<f64> = None;
    let mut last_retained: Option<f64> = None;
    for click in clicks {
        let pair = click.clicks;
        let raw_click_type = if pair.double() {
            RawClickType::Double
        } else if pair.dark_only {
            RawClickType::Dark
        } else {
            RawClickType::Single
        };
        let outcome_bit = if pair.double() {
            rng.random::<bool>() as u8
        } else {
            pair.d1 as u8
        };
        let since = |prev: Option<f64>| prev.map_or(f64::INFINITY, |p| click.time - p);
        let separated = match policy.separation {
            SeparationRule::None => true,
            SeparationRule::Naive => since(last_click) > det.dead_time + TIME_EPS,
            SeparationRule::QuietPeriod => {
                since(last_click) + TIME_EPS >= 2.0 * det.dead_time
                    && since(last_retained) + TIME_EPS >= det.double_event_window
            }
        };
        let keep_double = !pair.double() || policy.double_clicks == DoubleClickPolicy::RandomAssign;
        let retained = separated && keep_double;
        if retained {
            last_retained = Some(click.time);
        }
        last_click = Some(click.time);
        events.push(DetectionEvent {
            pulse_index: click.pulse_index,
            click_time: click.time,
            outcome_bit,
            raw_click_type,
            retained,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn pulse(basis: Basis, bit: u8, photons: u32) -> PulseRecord {
        PulseRecord {
            index: 0,
            train: 0,
            basis,
            bit,
            photon_number: photons,
            emit_time: 0.0,
        }
    }

    fn ideal() -> DetectorModel {
        DetectorModel {
            efficiency: 1.0,
            extra_optics_efficiency: 1.0,
            dark_rate: 0.0,
            ..DetectorModel::default()
        }
    }

    fn click(index: usize, time: f64, d0: bool, d1: bool) -> RawClick {
        RawClick {
            pulse_index: index,
            time,
            clicks: ClickPair { d0, d1, dark_only: false },
        }
    }

    #[test]
    fn train_spacing_and_length() {
        let src = SourceParams {
            n_parallel: 1,
            ..SourceParams::default()
        };
        let pulses = generate_pulse_train(&src, 1).unwrap();
        assert_eq!(pulses.len(), 2838);
        let span = pulses.last().unwrap().emit_time - pulses[0].emit_time;
        assert!((span - 56.74e-6).abs() < 1e-12);
    }

    #[test]
    fn vacuum_source_emits_nothing() {
        let src = SourceParams {
            mu: 0.0,
            ..SourceParams::default()
        };
        assert!(generate_pulse_train(&src, 3).unwrap().iter().all(|p| p.photon_number == 0));
    }

    #[test]
    fn same_seed_same_train() {
        let src = SourceParams::default();
        assert_eq!(generate_pulse_train(&src, 9).unwrap(), generate_pulse_train(&src, 9).unwrap());
        assert_ne!(generate_pulse_train(&src, 9).unwrap(), generate_pulse_train(&src, 10).unwrap());
    }

    #[test]
    fn matched_basis_single_photon_is_deterministic() {
        let mut rng = stream(1, 0);
        for _ in 0..100 {
            let c = measure_pulse(&pulse(Basis::Rect, 0, 1), Basis::Rect, &ideal(), 0.0, &mut rng);
            assert!(c.d0 && !c.d1);
        }
    }

    #[test]
    fn conjugate_basis_splits_evenly() {
        let mut rng = stream(2, 0);
        let trials = 100_000;
        let d0 = (0..trials)
            .filter(|_| measure_pulse(&pulse(Basis::Rect, 0, 1), Basis::Diag, &ideal(), 0.0, &mut rng).d0)
            .count();
        let f = d0 as f64 / trials as f64;
        assert!((f - 0.5).abs() < 0.005, "{f}");
    }

    #[test]
    fn strong_pulse_in_conjugate_basis_double_clicks() {
        let mut rng = stream(3, 0);
        let det = DetectorModel::default();
        let trials = 20_000;
        let doubles = (0..trials)
            .filter(|_| measure_pulse(&pulse(Basis::Rect, 0, 1000), Basis::Diag, &det, 0.0, &mut rng).double())
            .count();
        assert!(doubles as f64 / trials as f64 >= 1.0 - 1e-4);
    }

    #[test]
    fn dead_time_blocks_second_click() {
        let mut rng = stream(4, 0);
        let mut pair = DetectorPair::new(ideal());
        let p = pulse(Basis::Rect, 0, 1);
        assert!(pair.detect(&p, 0.0, Basis::Rect, 0.0, &mut rng).is_some());
        assert!(pair.detect(&p, 20e-9, Basis::Rect, 0.0, &mut rng).is_none());
        assert!(pair.detect(&p, 31e-9, Basis::Rect, 0.0, &mut rng).is_some());
    }

    #[test]
    fn isolated_click_is_retained() {
        let mut rng = stream(5, 0);
        let ev = postselect_clicks(&[click(0, 1e-6, true, false)], &DetectorModel::default(), PostSelection::default(), &mut rng)
            .unwrap();
        assert!(ev[0].retained);
        assert_eq!(ev[0].outcome_bit, 0);
        assert_eq!(ev[0].raw_click_type, RawClickType::Single);
    }

    #[test]
    fn later_click_inside_window_dropped() {
        let mut rng = stream(6, 0);
        let clicks = [click(0, 0.0, true, false), click(2, 40e-9, false, true)];
        let ev = postselect_clicks(&clicks, &DetectorModel::default(), PostSelection::default(), &mut rng).unwrap();
        assert!(ev[0].retained);
        assert!(!ev[1].retained);
    }

    #[test]
    fn quiet_period_counts_dropped_clicks() {
        let mut rng = stream(7, 0);
        let clicks = [
            click(0, 0.0, true, false),
            click(1, 40e-9, true, false),
            click(2, 80e-9, true, false),
            click(3, 140e-9, true, false),
        ];
        let ev = postselect_clicks(&clicks, &DetectorModel::default(), PostSelection::default(), &mut rng).unwrap();
        let kept: Vec<bool> = ev.iter().map(|e| e.retained).collect();
        // 80 ns is only 40 ns after a (dropped) click; 140 ns has 60 ns of quiet.
        assert_eq!(kept, vec![true, false, false, true]);
    }

    #[test]
    fn double_click_outcome_is_fair() {
        let mut rng = stream(8, 0);
        let n = 100_000;
        let clicks: Vec<RawClick> = (0..n).map(|i| click(i, i as f64 * 1e-6, true, true)).collect();
        let ev = postselect_clicks(&clicks, &DetectorModel::default(), PostSelection::default(), &mut rng).unwrap();
        assert!(ev.iter().all(|e| e.retained && e.raw_click_type == RawClickType::Double));
        let mean = ev.iter().map(|e| e.outcome_bit as f64).sum::<f64>() / n as f64;
        assert!((0.497..=0.503).contains(&mean), "{mean}");
    }

    #[test]
    fn discarding_doubles_drops_them() {
        let mut rng = stream(9, 0);
        let policy = PostSelection {
            double_clicks: DoubleClickPolicy::Discard,
            ..PostSelection::default()
        };
        let ev = postselect_clicks(&[click(0, 0.0, true, true)], &DetectorModel::default(), policy, &mut rng).unwrap();
        assert!(!ev[0].retained);
    }

    #[test]
    fn unordered_clicks_rejected() {
        let mut rng = stream(10, 0);
        let clicks = [click(0, 1e-6, true, false), click(1, 0.0, true, false)];
        assert!(postselect_clicks(&clicks, &DetectorModel::default(), PostSelection::default(), &mut rng).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(SourceParams { intensity_fluctuation: 1.0, ..SourceParams::default() }.validate().is_err());
        assert!(DetectorModel { efficiency: 1.5, ..DetectorModel::default() }.validate().is_err());
        assert!(DetectorModel { dead_time: 0.0, ..DetectorModel::default() }.validate().is_err());
    }
}
