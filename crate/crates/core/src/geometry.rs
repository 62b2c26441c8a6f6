//! Planar layout of the six parties and the light-cone bounds on when and
//! where Alice can have fixed her commitment.
//!
//! Alice sits at the origin. Her agents lie on two rays separated by the
//! angle `theta`, symmetric about the +x axis; each of Bob's agents sits
//! further out on the same ray as its partner. Bob is placed at distance
//! `d_alice_bob` on the -x axis, behind Alice. Callers only ever supply
//! distances and the angle; coordinates stay internal.
//!
//! All quantities are SI: metres, seconds, radians.

use serde::{Deserialize, Serialize};

use crate::numeric::golden_section_max;
use crate::protocol::PartyId;
use crate::units::{C, FIBER_SPEED_FACTOR};
use crate::{Error, Result};

/// Speed of each link as a fraction of `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpeeds {
    pub bob_alice: f64,
    pub alice_a0: f64,
    pub alice_a1: f64,
    pub a0_b0: f64,
    pub a1_b1: f64,
}

impl Default for LinkSpeeds {
    /// Free space between Alice and her agents, short fibre patches elsewhere.
    fn default() -> Self {
        LinkSpeeds {
            bob_alice: 1.0,
            alice_a0: 1.0,
            alice_a1: 1.0,
            a0_b0: FIBER_SPEED_FACTOR,
            a1_b1: FIBER_SPEED_FACTOR,
        }
    }
}

impl LinkSpeeds {
    pub fn uniform(factor: f64) -> Self {
        LinkSpeeds {
            bob_alice: factor,
            alice_a0: factor,
            alice_a1: factor,
            a0_b0: factor,
            a1_b1: factor,
        }
    }

    /// Speed factor of the direct link between two parties, if one exists.
    pub fn between(&self, a: PartyId, b: PartyId) -> Option<f64> {
        use PartyId::*;
        let pair = if (a as u8) <= (b as u8) { (a, b) } else { (b, a) };
        match pair {
            (Alice, Bob) => Some(self.bob_alice),
            (Alice, A0) => Some(self.alice_a0),
            (Alice, A1) => Some(self.alice_a1),
            (A0, B0) => Some(self.a0_b0),
            (A1, B1) => Some(self.a1_b1),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("speeds.bob_alice", self.bob_alice),
            ("speeds.alice_a0", self.alice_a0),
            ("speeds.alice_a1", self.alice_a1),
            ("speeds.a0_b0", self.a0_b0),
            ("speeds.a1_b1", self.a1_b1),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::param(name, format!("speed factor {v} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolLayout {
    pub d_alice_bob: f64,
    pub d_alice_a0: f64,
    pub d_alice_a1: f64,
    pub d_a0_b0: f64,
    pub d_a1_b1: f64,
    /// The A0-Alice-A1 angle.
    pub theta: f64,
    pub speeds: LinkSpeeds,
}

impl ProtocolLayout {
    pub fn new(
        d_alice_bob: f64,
        d_alice_a0: f64,
        d_alice_a1: f64,
        d_a0_b0: f64,
        d_a1_b1: f64,
        theta: f64,
    ) -> Result<Self> {
        let layout = ProtocolLayout {
            d_alice_bob,
            d_alice_a0,
            d_alice_a1,
            d_a0_b0,
            d_a1_b1,
            theta,
            speeds: LinkSpeeds::default(),
        };
        layout.validate()?;
        Ok(layout)
    }

    /// The field-test layout: 9.3 km and 12.3 km arms at 165 degrees, with
    /// the co-located parties treated as coincident.
    pub fn field_test() -> Self {
        ProtocolLayout {
            d_alice_bob: 0.0,
            d_alice_a0: 9_300.0,
            d_alice_a1: 12_300.0,
            d_a0_b0: 0.0,
            d_a1_b1: 0.0,
            theta: 165f64.to_radians(),
            speeds: LinkSpeeds::default(),
        }
    }

    pub fn with_speeds(mut self, speeds: LinkSpeeds) -> Result<Self> {
        self.speeds = speeds;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("layout.d_alice_bob", self.d_alice_bob),
            ("layout.d_alice_a0", self.d_alice_a0),
            ("layout.d_alice_a1", self.d_alice_a1),
            ("layout.d_a0_b0", self.d_a0_b0),
            ("layout.d_a1_b1", self.d_a1_b1),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("distance {v} must be finite and >= 0")));
            }
        }
        if !(self.theta > 0.0 && self.theta <= std::f64::consts::PI) {
            return Err(Error::param("layout.theta", "angle must lie in (0, pi]"));
        }
        self.speeds.validate()
    }

    pub(crate) fn position(&self, party: PartyId) -> Point {
        let half = self.theta / 2.0;
        let ray = |r: f64, sign: f64| Point::new(r * half.cos(), sign * r * half.sin());
        match party {
            PartyId::Alice => Point::new(0.0, 0.0),
            PartyId::Bob => Point::new(-self.d_alice_bob, 0.0),
            PartyId::A0 => ray(self.d_alice_a0, 1.0),
            PartyId::A1 => ray(self.d_alice_a1, -1.0),
            PartyId::B0 => ray(self.d_alice_a0 + self.d_a0_b0, 1.0),
            PartyId::B1 => ray(self.d_alice_a1 + self.d_a1_b1, -1.0),
        }
    }

    /// Euclidean distance between two parties.
    pub fn distance(&self, a: PartyId, b: PartyId) -> f64 {
        self.position(a).dist(self.position(b))
    }

    pub fn d_a0_a1(&self) -> f64 {
        self.distance(PartyId::A0, PartyId::A1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingObservations {
    /// Bob's first emission.
    pub t0: f64,
    /// Last reveal signal received by B0.
    pub t_b0: f64,
    /// Last reveal signal received by B1.
    pub t_b1: f64,
}

impl TimingObservations {
    pub fn new(t0: f64, t_b0: f64, t_b1: f64) -> Result<Self> {
        let obs = TimingObservations { t0, t_b0, t_b1 };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t_b0.is_finite() && self.t_b1.is_finite()) {
            return Err(Error::param("timing", "times must be finite"));
        }
        if self.t_b0 <= self.t0 || self.t_b1 <= self.t0 {
            return Err(Error::param("timing", "t_b0 and t_b1 must be later than t0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedDistances {
    pub d_bob_b0: f64,
    pub d_bob_b1: f64,
    /// Angle at Bob between the Bob-Alice axis and B0.
    pub theta0: f64,
    /// Angle at Bob between the Bob-Alice axis and B1.
    pub theta1: f64,
    pub d_b0_b1: f64,
}

impl DerivedDistances {
    /// The B0-Bob-B1 angle.
    pub fn wedge(&self) -> f64 {
        self.theta0 + self.theta1
    }
}

pub fn derived_distances(layout: &ProtocolLayout) -> Result<DerivedDistances> {
    layout.validate()?;
    let cos_half = (layout.theta / 2.0).cos();
    let ab = layout.d_alice_bob;
    let arm = |reach: f64| -> Result<(f64, f64)> {
        let d = (ab * ab + reach * reach + 2.0 * ab * reach * cos_half).max(0.0).sqrt();
        if d == 0.0 {
            return Err(Error::DegenerateLayout(
                "Bob coincides with one of his agents; angles undefined".into(),
            ));
        }
        let angle = ((ab + reach * cos_half) / d).clamp(-1.0, 1.0).acos();
        Ok((d, angle))
    };
    let (d_bob_b0, theta0) = arm(layout.d_alice_a0 + layout.d_a0_b0)?;
    let (d_bob_b1, theta1) = arm(layout.d_alice_a1 + layout.d_a1_b1)?;
    let wedge = theta0 + theta1;
    let d_b0_b1 = (d_bob_b0 * d_bob_b0 + d_bob_b1 * d_bob_b1
        - 2.0 * d_bob_b0 * d_bob_b1 * wedge.cos())
    .max(0.0)
    .sqrt();
    Ok(DerivedDistances {
        d_bob_b0,
        d_bob_b1,
        theta0,
        theta1,
        d_b0_b1,
    })
}

/// Latest commitment time (relative to `t0`) when the small offsets are
/// negligible: `(t_b0 + t_b1 - d_a0_a1 / c) / 2 - t0`.
pub fn t_max_simple(obs: &TimingObservations, d_a0_a1: f64) -> Result<f64> {
    if !(d_a0_a1 > 0.0) {
        return Err(Error::param("d_a0_a1", "must be positive"));
    }
    Ok(0.5 * (obs.t_b0 + obs.t_b1 - d_a0_a1 / C) - obs.t0)
}

/// Same bound with the exact B0-B1 distance, valid when Alice can reach the
/// point on B0B1 where she would wait.
pub fn t_commit_at_max_point(obs: &TimingObservations, d_b0_b1: f64) -> f64 {
    0.5 * (obs.t_b0 + obs.t_b1 - d_b0_b1 / C) - obs.t0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitPointMax {
    /// Fraction of B0B1 between B0 and the waiting point.
    pub q: f64,
    pub d_bob_pcommit_max: f64,
}

/// The point on B0B1 from which both reveals arrive exactly on time, and its
/// distance from Bob.
pub fn commit_point_max(layout: &ProtocolLayout, obs: &TimingObservations) -> Result<CommitPointMax> {
    obs.validate()?;
    let dd = derived_distances(layout)?;
    if dd.d_b0_b1 == 0.0 {
        return Err(Error::DegenerateLayout("B0 and B1 coincide".into()));
    }
    let q = split_fraction(&dd, obs);
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InconsistentTiming(format!(
            "arrival gap {:.3e} s exceeds the B0-B1 light time {:.3e} s (q = {q})",
            obs.t_b1 - obs.t_b0,
            dd.d_b0_b1 / C
        )));
    }
    Ok(CommitPointMax {
        q,
        d_bob_pcommit_max: max_point_distance(&dd, q),
    })
}

fn split_fraction(dd: &DerivedDistances, obs: &TimingObservations) -> f64 {
    0.5 * (1.0 - C * (obs.t_b1 - obs.t_b0) / dd.d_b0_b1)
}

fn max_point_distance(dd: &DerivedDistances, q: f64) -> f64 {
    let wedge = dd.wedge();
    // Angle of the Bob-B0-B1 triangle at B1. atan2 keeps it right when obtuse.
    let beta = (dd.d_bob_b0 * wedge.sin()).atan2(dd.d_bob_b1 - dd.d_bob_b0 * wedge.cos());
    let xi = (1.0 - q) * dd.d_bob_b0 * wedge.sin();
    let along = (1.0 - q) * dd.d_b0_b1 * beta.cos();
    xi.hypot(dd.d_bob_b1 - along)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitPointSolution {
    pub d_bob_pcommit: f64,
    /// B0-Bob-P_commit angle.
    pub psi: f64,
    /// Upper bound on the commitment time, relative to `t0`.
    pub t_commit_upper: f64,
    pub at_max_point: bool,
}

impl CommitPointSolution {
    fn at_bob() -> Self {
        CommitPointSolution {
            d_bob_pcommit: 0.0,
            psi: 0.0,
            t_commit_upper: 0.0,
            at_max_point: false,
        }
    }
}

const PSI_GRID: usize = 10_000;
const PSI_TOL: f64 = 1e-9;

/// Farthest distance from Bob at bearing `angle` off the Bob-B axis such
/// that a light-speed courier can still reach B (at distance `reach` from Bob)
/// within the path budget `budget`. Solves `d + |P B| = budget` exactly.
fn courier_reach(budget: f64, reach: f64, angle: f64) -> f64 {
    let denom = 2.0 * (budget - reach * angle.cos());
    if denom <= 0.0 {
        return budget;
    }
    ((budget * budget - reach * reach) / denom).min(budget)
}

/// Maximises the commit point's distance from Bob under both light-cone
/// constraints and converts it into an upper bound on the commitment time.
///
/// Infeasible observations (a reveal that arrived faster than light from
/// Bob's first emission) yield the "commit at Bob at `t0`" solution.
pub fn solve_commit_point(layout: &ProtocolLayout, obs: &TimingObservations) -> Result<CommitPointSolution> {
    obs.validate()?;
    let dd = derived_distances(layout)?;
    let budget0 = C * (obs.t_b0 - obs.t0);
    let budget1 = C * (obs.t_b1 - obs.t0);
    if budget0 < dd.d_bob_b0 || budget1 < dd.d_bob_b1 {
        return Ok(CommitPointSolution::at_bob());
    }

    let q = if dd.d_b0_b1 > 0.0 {
        split_fraction(&dd, obs).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let d_max = max_point_distance(&dd, q);
    let cap = budget0.min(budget1).min(d_max);
    let wedge = dd.wedge();

    let objective = |psi: f64| {
        courier_reach(budget0, dd.d_bob_b0, psi)
            .min(courier_reach(budget1, dd.d_bob_b1, wedge - psi))
            .min(cap)
    };

    let step = wedge / PSI_GRID as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..=PSI_GRID {
        let v = objective(i as f64 * step);
        if v > best.1 {
            best = (i, v);
        }
    }
    let lo = best.0.saturating_sub(1) as f64 * step;
    let hi = ((best.0 + 1).min(PSI_GRID)) as f64 * step;
    let (psi, d_sol) = golden_section_max(objective, lo, hi, PSI_TOL);
    let (psi, d_sol) = if d_sol >= best.1 {
        (psi, d_sol)
    } else {
        (best.0 as f64 * step, best.1)
    };

    let at_max_point = d_sol >= d_max * (1.0 - 1e-12);
    let t_commit_upper = if at_max_point {
        if (0.0..=1.0).contains(&split_fraction(&dd, obs)) {
            t_commit_at_max_point(obs, dd.d_b0_b1)
        } else {
            // Arrival gap longer than the B0-B1 light time: Alice waits at the
            // nearer endpoint and the earlier deadline binds.
            ((budget0 - q * dd.d_b0_b1).min(budget1 - (1.0 - q) * dd.d_b0_b1)) / C
        }
    } else {
        d_sol / C
    };
    Ok(CommitPointSolution {
        d_bob_pcommit: d_sol,
        psi,
        t_commit_upper,
        at_max_point,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub a0_excluded: bool,
    pub a1_excluded: bool,
}

/// Whether the observed timings rule out a commitment made at A0 or A1:
/// a detour Bob -> A_i -> B_{1-i} must take longer than the opposite deadline.
pub fn location_exclusion(layout: &ProtocolLayout, obs: &TimingObservations) -> Result<Exclusion> {
    layout.validate()?;
    use PartyId::*;
    let budget0 = C * (obs.t_b0 - obs.t0);
    let budget1 = C * (obs.t_b1 - obs.t0);
    Ok(Exclusion {
        a0_excluded: layout.distance(Bob, A0) + layout.distance(A0, B1) > budget1,
        a1_excluded: layout.distance(Bob, A1) + layout.distance(A1, B0) > budget0,
    })
}

/// The same test with Bob at Alice and each B_i at A_i.
pub fn location_exclusion_approx(layout: &ProtocolLayout, obs: &TimingObservations) -> Exclusion {
    let d_a0_a1 = layout.d_a0_a1();
    Exclusion {
        a0_excluded: layout.d_alice_a0 + d_a0_a1 > C * (obs.t_b1 - obs.t0),
        a1_excluded: layout.d_alice_a1 + d_a0_a1 > C * (obs.t_b0 - obs.t0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const US: f64 = 1e-6;

    fn exp1() -> TimingObservations {
        TimingObservations::new(1.53 * US, 92.85 * US, 102.74 * US).unwrap()
    }

    #[test]
    fn field_test_b0_b1_distance() {
        let dd = derived_distances(&ProtocolLayout::field_test()).unwrap();
        // planar placement: A0 and A1 at 9.3 km and 12.3 km, 165 deg apart
        let a = Point::new(9300.0 * (82.5f64).to_radians().cos(), 9300.0 * (82.5f64).to_radians().sin());
        let b = Point::new(12300.0 * (82.5f64).to_radians().cos(), -12300.0 * (82.5f64).to_radians().sin());
        assert_abs_diff_eq!(dd.d_b0_b1, a.dist(b), epsilon = 1e-6);
        assert_abs_diff_eq!(dd.d_b0_b1 / 1e3, 21.42, epsilon = 5e-3);
    }

    #[test]
    fn collinear_symmetric_layout() {
        let layout = ProtocolLayout::new(0.0, 5000.0, 5000.0, 0.0, 0.0, PI).unwrap();
        let dd = derived_distances(&layout).unwrap();
        assert_abs_diff_eq!(dd.d_b0_b1, 10_000.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_offsets_give_half_angle() {
        let layout = ProtocolLayout::new(0.0, 7000.0, 3000.0, 0.0, 0.0, 2.0).unwrap();
        let dd = derived_distances(&layout).unwrap();
        assert_abs_diff_eq!(dd.d_bob_b0, 7000.0, epsilon = 1e-9);
        assert_abs_diff_eq!(dd.theta0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dd.theta1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_layout_is_degenerate() {
        let layout = ProtocolLayout::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert!(matches!(derived_distances(&layout), Err(Error::DegenerateLayout(_))));
    }

    #[test]
    fn layout_rejects_bad_angle_and_speed() {
        assert!(ProtocolLayout::new(0.0, 1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ProtocolLayout::new(0.0, 1.0, 1.0, 0.0, 0.0, 4.0).is_err());
        assert!(ProtocolLayout::new(-1.0, 1.0, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(ProtocolLayout::field_test().with_speeds(LinkSpeeds::uniform(1.2)).is_err());
    }

    #[test]
    fn t_max_matches_field_runs() {
        let d = ProtocolLayout::field_test().d_a0_a1();
        assert_abs_diff_eq!(t_max_simple(&exp1(), d).unwrap() / US, 60.54, epsilon = 0.05);
        let exp3 = TimingObservations::new(1.53 * US, 92.99 * US, 102.92 * US).unwrap();
        assert_abs_diff_eq!(t_max_simple(&exp3, d).unwrap() / US, 60.70, epsilon = 0.05);
    }

    #[test]
    fn t_max_zero_when_forced_at_start() {
        let t0 = 1.0 * US;
        let t = 51.0 * US;
        let d = 2.0 * (t - t0) * C;
        let obs = TimingObservations::new(t0, t, t).unwrap();
        assert_abs_diff_eq!(t_max_simple(&obs, d).unwrap(), 0.0, epsilon = 1e-15);
        assert!(t_max_simple(&obs, 0.0).is_err());
    }

    #[test]
    fn equal_arrivals_split_in_half() {
        let obs = TimingObservations::new(0.0, 200.0 * US, 200.0 * US).unwrap();
        let m = commit_point_max(&ProtocolLayout::field_test(), &obs).unwrap();
        assert_eq!(m.q, 0.5);
    }

    #[test]
    fn symmetric_layout_waits_at_midpoint() {
        let layout = ProtocolLayout::new(0.0, 8000.0, 8000.0, 0.0, 0.0, 2.5).unwrap();
        let dd = derived_distances(&layout).unwrap();
        let obs = TimingObservations::new(0.0, 100.0 * US, 100.0 * US).unwrap();
        let m = commit_point_max(&layout, &obs).unwrap();
        let expected = (dd.d_bob_b0.powi(2) - (dd.d_b0_b1 / 2.0).powi(2)).sqrt();
        assert_abs_diff_eq!(m.d_bob_pcommit_max, expected, epsilon = 1e-6);
    }

    #[test]
    fn max_point_split_sums_to_b0_b1() {
        let layout = ProtocolLayout::field_test();
        let dd = derived_distances(&layout).unwrap();
        let m = commit_point_max(&layout, &exp1()).unwrap();
        let to_b0 = m.q * dd.d_b0_b1;
        let to_b1 = (1.0 - m.q) * dd.d_b0_b1;
        assert_abs_diff_eq!(to_b0 + to_b1, dd.d_b0_b1, epsilon = 1e-9);
    }

    #[test]
    fn arrival_gap_beyond_light_time_is_inconsistent() {
        let obs = TimingObservations::new(0.0, 50.0 * US, 150.0 * US).unwrap();
        assert!(matches!(
            commit_point_max(&ProtocolLayout::field_test(), &obs),
            Err(Error::InconsistentTiming(_))
        ));
    }

    #[test]
    fn generous_timing_saturates_max_point() {
        let layout = ProtocolLayout::field_test();
        let obs = TimingObservations::new(0.0, 900.0 * US, 905.0 * US).unwrap();
        let sol = solve_commit_point(&layout, &obs).unwrap();
        let dd = derived_distances(&layout).unwrap();
        assert!(sol.at_max_point);
        assert_abs_diff_eq!(sol.t_commit_upper, t_commit_at_max_point(&obs, dd.d_b0_b1), epsilon = 1e-15);
    }

    #[test]
    fn field_run_bound_close_to_simple_form() {
        let sol = solve_commit_point(&ProtocolLayout::field_test(), &exp1()).unwrap();
        assert!(sol.at_max_point);
        assert_abs_diff_eq!(sol.t_commit_upper / US, 60.54, epsilon = 0.5);
    }

    #[test]
    fn impossible_timing_commits_at_bob() {
        let obs = TimingObservations::new(0.0, 1.0 * US, 1.0 * US).unwrap();
        let sol = solve_commit_point(&ProtocolLayout::field_test(), &obs).unwrap();
        assert_eq!(sol, CommitPointSolution::at_bob());
    }

    #[test]
    fn exclusion_on_field_run() {
        let layout = ProtocolLayout::field_test();
        let ex = location_exclusion(&layout, &exp1()).unwrap();
        assert!(ex.a0_excluded && ex.a1_excluded);
        assert_eq!(location_exclusion_approx(&layout, &exp1()), ex);
    }

    #[test]
    fn exclusion_limits() {
        let layout = ProtocolLayout::field_test();
        let late = TimingObservations::new(0.0, 1e3, 1e3).unwrap();
        assert!(!location_exclusion(&layout, &late).unwrap().a0_excluded);
        let tight = TimingObservations { t0: 0.0, t_b0: 0.0, t_b1: 0.0 };
        assert!(location_exclusion(&layout, &tight).unwrap().a0_excluded);
    }
}
