//! Explicit cheating strategies for both parties, run as seeded trials.
//!
//! Trial `k` of a run with master seed `s` draws all of its randomness from
//! `rng::stream(s, k)`, so trials are independent and the aggregate does not
//! depend on the order in which they execute.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{location_exclusion, solve_commit_point, Point, ProtocolLayout, TimingObservations};
use crate::photonic::{
    generate_pulse_train_with, postselect_clicks, sample_poisson, Basis, DetectorModel, DetectorPair, DoubleClickPolicy,
    PostSelection, PulseRecord, SeparationRule, SourceParams,
};
use crate::protocol::PartyId;
use crate::rng::{stream, ChaCha8Rng};
use crate::security::{epsilon_b_bound, verify, Declaration, EstimationMode, SecurityParams, VerificationInput};
use crate::units::{C, MICROSECOND, NANOSECOND};
use crate::{Error, Result};

/// Slack on Bob's deadline check, far below any physical timing resolution.
const DEADLINE_SLACK: f64 = 1e-12;
const MAX_STRATEGY_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attacker {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadTimeVariant {
    /// H at `t`, V at `t + offset`.
    TwoPulse,
    /// H at `t`, V at `t + offset`, V again just after `t + t_dead`.
    ThreePulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommitLocation {
    Bob,
    A0,
    A1,
    /// The farthest point from Bob allowed by the deadlines.
    MaxPoint,
    /// `distance` from Bob, `psi` radians from the Bob-B0 direction towards B1.
    Polar { distance: f64, psi: f64 },
    /// A fresh feasible point and time for every trial.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommitTime {
    /// The latest instant from which both reveals still meet their deadlines.
    Latest,
    /// Seconds after `t0`.
    At { time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitPlan {
    pub location: CommitLocation,
    pub time: CommitTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum AttackSpec {
    StrongPulseDoubleClick {
        countermeasure: DoubleClickPolicy,
        /// Mean photon number of the strong pulse.
        intensity: f64,
    },
    DeadTime {
        variant: DeadTimeVariant,
        countermeasure: SeparationRule,
        intensity: f64,
        /// Delay of the second pulse; `None` means half a dead time.
        offset: Option<f64>,
        /// How far after one dead time the third pulse comes.
        epsilon: f64,
    },
    MultiPhotonSplit {
        estimation: EstimationMode,
    },
    DelayedCommit {
        plan: CommitPlan,
    },
}

impl AttackSpec {
    pub fn attacker(&self) -> Attacker {
        match self {
            AttackSpec::StrongPulseDoubleClick { .. } | AttackSpec::DeadTime { .. } => Attacker::Bob,
            AttackSpec::MultiPhotonSplit { .. } | AttackSpec::DelayedCommit { .. } => Attacker::Alice,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::StrongPulseDoubleClick { .. } => "strong_pulse_double_click",
            AttackSpec::DeadTime {
                variant: DeadTimeVariant::TwoPulse,
                ..
            } => "dead_time_two_pulse",
            AttackSpec::DeadTime {
                variant: DeadTimeVariant::ThreePulse,
                ..
            } => "dead_time_three_pulse",
            AttackSpec::MultiPhotonSplit { .. } => "multi_photon_split",
            AttackSpec::DelayedCommit { .. } => "delayed_commit",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackSpec::StrongPulseDoubleClick { intensity, .. } => check_intensity(intensity),
            AttackSpec::DeadTime {
                intensity,
                offset,
                epsilon,
                ..
            } => {
                check_intensity(intensity)?;
                if offset.is_some_and(|o| !(o >= 0.0 && o.is_finite())) {
                    return Err(Error::param("attack.offset", "must be finite and >= 0"));
                }
                if !(epsilon >= 0.0 && epsilon.is_finite()) {
                    return Err(Error::param("attack.epsilon", "must be finite and >= 0"));
                }
                Ok(())
            }
            AttackSpec::MultiPhotonSplit { .. } => Ok(()),
            AttackSpec::DelayedCommit { plan } => {
                if let CommitLocation::Polar { distance, psi } = plan.location {
                    if !(distance >= 0.0 && distance.is_finite() && psi.is_finite()) {
                        return Err(Error::param("attack.commit_location", "polar point must be finite, distance >= 0"));
                    }
                }
                if let CommitTime::At { time } = plan.time {
                    if !(time >= 0.0 && time.is_finite()) {
                        return Err(Error::param("attack.commit_time", "must be finite and >= 0"));
                    }
                }
                Ok(())
            }
        }
    }
}

fn check_intensity(intensity: f64) -> Result<()> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::param("attack.intensity", "must be finite and >= 0"));
    }
    Ok(())
}

/// The honest side of an attack: the equipment and thresholds the attacker
/// faces, and the reveal deadlines Bob enforces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackContext {
    pub layout: ProtocolLayout,
    pub source: SourceParams,
    pub detector: DetectorModel,
    pub security: SecurityParams,
    pub deadlines: TimingObservations,
}

impl Default for AttackContext {
    /// Field-test equipment with the first field run's arrival times as deadlines.
    fn default() -> Self {
        AttackContext {
            layout: ProtocolLayout::field_test(),
            source: SourceParams::default(),
            detector: DetectorModel::default(),
            security: SecurityParams::default(),
            deadlines: TimingObservations {
                t0: 1.53 * MICROSECOND,
                t_b0: 92.85 * MICROSECOND,
                t_b1: 102.74 * MICROSECOND,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub attacker: Attacker,
    pub strategy: String,
    pub trials: u64,
    pub success_count: u64,
    pub estimated_probability: f64,
    /// Wilson 95% interval on `estimated_probability`.
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub guarantee_respected: bool,
    /// Strategy-specific figures, keyed by name.
    pub metrics: BTreeMap<String, f64>,
}

impl AttackOutcome {
    fn new(spec: &AttackSpec, trials: u64, success_count: u64, guarantee_respected: bool) -> Self {
        let (wilson_low, wilson_high) = wilson_interval(success_count, trials);
        AttackOutcome {
            attacker: spec.attacker(),
            strategy: spec.name().to_string(),
            trials,
            success_count,
            estimated_probability: if trials == 0 {
                0.0
            } else {
                success_count as f64 / trials as f64
            },
            wilson_low,
            wilson_high,
            guarantee_respected,
            metrics: BTreeMap::new(),
        }
    }

    fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2n = z * z / n;
    let centre = (p + z2n / 2.0) / (1.0 + z2n);
    let half = z * (p * (1.0 - p) / n + z2n / (4.0 * n)).sqrt() / (1.0 + z2n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn run_attack(spec: &AttackSpec, ctx: &AttackContext, trials: u64, seed: u64) -> Result<AttackOutcome> {
    spec.validate()?;
    match *spec {
        AttackSpec::StrongPulseDoubleClick {
            countermeasure,
            intensity,
        } => bob_double_click_attack(countermeasure, intensity, ctx, trials, seed),
        AttackSpec::DeadTime {
            variant,
            countermeasure,
            intensity,
            offset,
            epsilon,
        } => bob_dead_time_attack(variant, countermeasure, intensity, offset, epsilon, ctx, trials, seed),
        AttackSpec::MultiPhotonSplit { estimation } => alice_multi_photon_attack(estimation, ctx, trials, seed),
        AttackSpec::DelayedCommit { plan } => alice_delayed_commit_attack(plan, ctx, trials, seed),
    }
}

/// Sends strong pulses `(time, basis, bit)` into Alice's detectors and
/// returns which of them she reports as detected.
fn alice_reports(
    shots: &[(f64, Basis, u8)],
    alice_basis: Basis,
    intensity: f64,
    det: &DetectorModel,
    policy: PostSelection,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<bool>> {
    let mut detectors = DetectorPair::new(*det);
    let mut clicks = Vec::new();
    for (index, &(time, basis, bit)) in shots.iter().enumerate() {
        let pulse = PulseRecord {
            index,
            train: 0,
            basis,
            bit,
            photon_number: sample_poisson(intensity, rng),
            emit_time: time,
        };
        // Ideal optics: a misrouting probability per photon would make every
        // strong pulse double-click and hide the effect being exploited.
        if let Some(click) = detectors.detect(&pulse, time, alice_basis, 0.0, rng) {
            clicks.push(click);
        }
    }
    let mut reported = vec![false; shots.len()];
    for event in postselect_clicks(&clicks, det, policy, rng)? {
        if event.retained {
            reported[event.pulse_index] = true;
        }
    }
    Ok(reported)
}

/// Runs `trials` basis-guessing rounds. Committed bits alternate so each
/// value is used in exactly half of the rounds.
fn bob_guessing_game(
    spec: &AttackSpec,
    trials: u64,
    seed: u64,
    mut play: impl FnMut(Basis, &mut ChaCha8Rng) -> Result<u8>,
) -> Result<AttackOutcome> {
    let mut wins = 0;
    for k in 0..trials {
        let bit = (k % 2) as u8;
        let mut rng = stream(seed, k);
        if play(Basis::for_commitment(bit), &mut rng)? == bit {
            wins += 1;
        }
    }
    let p = if trials == 0 { 0.5 } else { wins as f64 / trials as f64 };
    let sigma = (0.25 / trials.max(1) as f64).sqrt();
    Ok(AttackOutcome::new(spec, trials, wins, p <= 0.5 + 3.0 * sigma))
}

/// One strong horizontal pulse. In the rectilinear basis it fires a single
/// detector; in the diagonal basis it fires both. Bob guesses "rectilinear"
/// whenever Alice reports the pulse.
pub fn bob_double_click_attack(
    countermeasure: DoubleClickPolicy,
    intensity: f64,
    ctx: &AttackContext,
    trials: u64,
    seed: u64,
) -> Result<AttackOutcome> {
    let spec = AttackSpec::StrongPulseDoubleClick {
        countermeasure,
        intensity,
    };
    spec.validate()?;
    ctx.detector.validate()?;
    let policy = PostSelection {
        double_clicks: countermeasure,
        separation: SeparationRule::QuietPeriod,
    };
    let shots = [(0.0, Basis::Rect, 0u8)];
    let out = bob_guessing_game(&spec, trials, seed, |basis, rng| {
        let reported = alice_reports(&shots, basis, intensity, &ctx.detector, policy, rng)?;
        Ok(if reported[0] { 0 } else { 1 })
    })?;
    Ok(out.metric("intensity", intensity))
}

/// Strong H then V half a dead time later (two-pulse), plus a second V just
/// after one dead time (three-pulse). In the rectilinear basis the pulses hit
/// different detectors; in the diagonal basis the first pulse blinds both.
#[allow(clippy::too_many_arguments)]
pub fn bob_dead_time_attack(
    variant: DeadTimeVariant,
    countermeasure: SeparationRule,
    intensity: f64,
    offset: Option<f64>,
    epsilon: f64,
    ctx: &AttackContext,
    trials: u64,
    seed: u64,
) -> Result<AttackOutcome> {
    let spec = AttackSpec::DeadTime {
        variant,
        countermeasure,
        intensity,
        offset,
        epsilon,
    };
    spec.validate()?;
    ctx.detector.validate()?;
    let dead = ctx.detector.dead_time;
    let offset = offset.unwrap_or(dead / 2.0);
    let policy = PostSelection {
        double_clicks: DoubleClickPolicy::RandomAssign,
        separation: countermeasure,
    };
    let mut shots = vec![(0.0, Basis::Rect, 0u8), (offset, Basis::Rect, 1u8)];
    if variant == DeadTimeVariant::ThreePulse {
        shots.push((dead + epsilon, Basis::Rect, 1));
    }
    let out = bob_guessing_game(&spec, trials, seed, |basis, rng| {
        let reported = alice_reports(&shots, basis, intensity, &ctx.detector, policy, rng)?;
        Ok(match variant {
            // Only the rectilinear basis lets the second pulse through.
            DeadTimeVariant::TwoPulse => u8::from(!reported[1]),
            // Only the diagonal basis leaves a detector alive for the third.
            DeadTimeVariant::ThreePulse => u8::from(reported[2]),
        })
    })?;
    Ok(out.metric("intensity", intensity).metric("offset_ns", offset / NANOSECOND))
}

/// Alice measures the photon number of every pulse, keeps only pulses with
/// two or more photons, and measures one photon in each basis. Both agents
/// receive both outcome sets and open whichever bit is requested later.
pub fn alice_multi_photon_attack(
    estimation: EstimationMode,
    ctx: &AttackContext,
    trials: u64,
    seed: u64,
) -> Result<AttackOutcome> {
    let spec = AttackSpec::MultiPhotonSplit { estimation };
    ctx.security.validate()?;
    let eps_b = epsilon_b_bound(&ctx.security)?.eps_b;
    let (mut accepted, mut both, mut multi_total) = ([0u64; 2], 0u64, 0u64);
    for k in 0..trials {
        let mut rng = stream(seed, k);
        let pulses = generate_pulse_train_with(&ctx.source, &mut rng)?;
        let detected: Vec<usize> = pulses.iter().filter(|p| p.photon_number >= 2).map(|p| p.index).collect();
        multi_total += detected.len() as u64;
        let outcomes = |basis: Basis, rng: &mut ChaCha8Rng| -> Vec<u8> {
            detected
                .iter()
                .map(|&i| {
                    let p = &pulses[i];
                    if p.basis == basis {
                        p.bit
                    } else {
                        rng.random::<bool>() as u8
                    }
                })
                .collect()
        };
        let mut opened = [false; 2];
        for bit in [0u8, 1] {
            let decl = Declaration::from_report(&detected, &outcomes(Basis::for_commitment(bit), &mut rng))?;
            let verdict = verify(&VerificationInput {
                params: &ctx.security,
                pulses: &pulses,
                detected: Some(&detected),
                declaration_b0: Some(&decl),
                declaration_b1: Some(&decl),
                layout: &ctx.layout,
                observations: Some(ctx.deadlines),
                estimation,
            })?;
            opened[bit as usize] = verdict.accepted && verdict.deduced_bit == Some(bit);
            accepted[bit as usize] += u64::from(opened[bit as usize]);
        }
        both += u64::from(opened[0] && opened[1]);
    }
    let n = trials.max(1) as f64;
    let (p0, p1) = (accepted[0] as f64 / n, accepted[1] as f64 / n);
    let sigma = ((p0 * (1.0 - p0) + p1 * (1.0 - p1)) / n).sqrt();
    let advantage = p0 + p1 - 1.0;
    let respected = advantage <= eps_b + 3.0 * sigma;
    Ok(AttackOutcome::new(&spec, trials, both, respected)
        .metric("p0", p0)
        .metric("p1", p1)
        .metric("p0_plus_p1", p0 + p1)
        .metric("eps_b", eps_b)
        .metric("mean_multi_photon_detections", multi_total as f64 / n))
}

struct Courier {
    point: Point,
    /// Commit time after `t0`.
    time: f64,
}

/// Latest commit time at `point` that meets both deadlines with light-speed
/// forwarding, and the earliest at which Bob's first pulse can be there.
fn commit_window(ctx: &AttackContext, point: Point) -> (f64, f64) {
    let obs = &ctx.deadlines;
    let to = |party: PartyId| point.dist(ctx.layout.position(party)) / C;
    let latest = (obs.t_b0 - obs.t0 - to(PartyId::B0)).min(obs.t_b1 - obs.t0 - to(PartyId::B1));
    (to(PartyId::Bob), latest)
}

fn plan_courier(plan: &CommitPlan, ctx: &AttackContext, rng: &mut ChaCha8Rng) -> Result<Option<Courier>> {
    let layout = &ctx.layout;
    let bob = layout.position(PartyId::Bob);
    let point = match plan.location {
        CommitLocation::Bob => bob,
        CommitLocation::A0 => layout.position(PartyId::A0),
        CommitLocation::A1 => layout.position(PartyId::A1),
        CommitLocation::MaxPoint => {
            let sol = solve_commit_point(layout, &ctx.deadlines)?;
            if sol.at_max_point {
                // On the cap the bearing is not unique; the point itself is
                // the split point of the B0-B1 segment.
                let (b0, b1) = (layout.position(PartyId::B0), layout.position(PartyId::B1));
                let obs = &ctx.deadlines;
                let span = b0.dist(b1);
                let q = if span > 0.0 {
                    (0.5 * (1.0 - C * (obs.t_b1 - obs.t_b0) / span)).clamp(0.0, 1.0)
                } else {
                    0.5
                };
                Point::new(b0.x + q * (b1.x - b0.x), b0.y + q * (b1.y - b0.y))
            } else {
                polar_point(layout, sol.d_bob_pcommit, sol.psi)
            }
        }
        CommitLocation::Polar { distance, psi } => polar_point(layout, distance, psi),
        CommitLocation::Random => return random_feasible_courier(ctx, rng),
    };
    let time = match plan.time {
        CommitTime::Latest => commit_window(ctx, point).1.max(0.0),
        CommitTime::At { time } => time,
    };
    Ok(Some(Courier { point, time }))
}

fn polar_point(layout: &ProtocolLayout, distance: f64, psi: f64) -> Point {
    let bob = layout.position(PartyId::Bob);
    let b0 = layout.position(PartyId::B0);
    let axis = (b0.y - bob.y).atan2(b0.x - bob.x);
    // B1 lies clockwise of B0 as seen from Bob.
    let angle = axis - psi;
    Point::new(bob.x + distance * angle.cos(), bob.y + distance * angle.sin())
}

/// Draws points uniformly from a box around the layout until one admits a
/// non-empty commit window, then a commit time uniformly inside it.
fn random_feasible_courier(ctx: &AttackContext, rng: &mut ChaCha8Rng) -> Result<Option<Courier>> {
    let pts: Vec<Point> = PartyId::ALL.iter().map(|&p| ctx.layout.position(p)).collect();
    let margin = 1000.0;
    let (x_lo, x_hi) = (
        pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - margin,
        pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + margin,
    );
    let (y_lo, y_hi) = (
        pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - margin,
        pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + margin,
    );
    for _ in 0..MAX_STRATEGY_DRAWS {
        let point = Point::new(rng.random_range(x_lo..=x_hi), rng.random_range(y_lo..=y_hi));
        let (earliest, latest) = commit_window(ctx, point);
        if earliest <= latest {
            let time = if latest > earliest {
                rng.random_range(earliest..=latest)
            } else {
                latest
            };
            return Ok(Some(Courier { point, time }));
        }
    }
    Ok(None)
}

/// Alice carries Bob's signals in a quantum memory to a chosen point, commits
/// there, and forwards her results at light speed to both of Bob's agents.
/// A trial succeeds when both reveals meet Bob's deadlines; the guarantee
/// holds when every such trial committed no later than the verifier's bound.
pub fn alice_delayed_commit_attack(plan: CommitPlan, ctx: &AttackContext, trials: u64, seed: u64) -> Result<AttackOutcome> {
    let spec = AttackSpec::DelayedCommit { plan };
    spec.validate()?;
    ctx.layout.validate()?;
    ctx.deadlines.validate()?;
    let exclusion = location_exclusion(&ctx.layout, &ctx.deadlines)?;
    let obs = ctx.deadlines;
    let (mut accepted, mut violations, mut infeasible) = (0u64, 0u64, 0u64);
    let mut worst_gap = f64::NEG_INFINITY;
    let (mut last_actual, mut last_bound) = (f64::NAN, f64::NAN);
    for k in 0..trials {
        let mut rng = stream(seed, k);
        let Some(courier) = plan_courier(&plan, ctx, &mut rng)? else {
            infeasible += 1;
            continue;
        };
        let bob = ctx.layout.position(PartyId::Bob);
        let arrive = |party: PartyId| obs.t0 + courier.time + courier.point.dist(ctx.layout.position(party)) / C;
        let reachable = courier.point.dist(bob) <= C * courier.time * (1.0 + 1e-12) + 1e-9;
        let (t_b0, t_b1) = (arrive(PartyId::B0), arrive(PartyId::B1));
        let on_time = t_b0 <= obs.t_b0 + DEADLINE_SLACK && t_b1 <= obs.t_b1 + DEADLINE_SLACK;
        if !(reachable && on_time) {
            infeasible += 1;
            continue;
        }
        accepted += 1;
        let observed = TimingObservations::new(obs.t0, t_b0, t_b1)?;
        let bound = solve_commit_point(&ctx.layout, &observed)?.t_commit_upper;
        let gap = courier.time - bound;
        worst_gap = worst_gap.max(gap);
        // The solver's own tolerance is far below a picosecond.
        if gap > DEADLINE_SLACK + 1e-9 * bound.abs() {
            violations += 1;
        }
        last_actual = courier.time;
        last_bound = bound;
    }
    Ok(AttackOutcome::new(&spec, trials, accepted, violations == 0)
        .metric("infeasible", infeasible as f64)
        .metric("violations", violations as f64)
        .metric("worst_gap_us", worst_gap / MICROSECOND)
        .metric("last_actual_us", last_actual / MICROSECOND)
        .metric("last_bound_us", last_bound / MICROSECOND)
        .metric("a0_excluded", f64::from(u8::from(exclusion.a0_excluded)))
        .metric("a1_excluded", f64::from(u8::from(exclusion.a1_excluded))))
}
