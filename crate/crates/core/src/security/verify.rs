use serde::{Deserialize, Serialize};

use super::{count_errors, estimate_n_single, p_multi_bound, solve_delta_multi, Declaration, EstimationResult, SecurityParams};
use crate::geometry::{location_exclusion, solve_commit_point, Exclusion, ProtocolLayout, TimingObservations};
use crate::photonic::{Basis, PulseRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    Ok,
    /// The two agents revealed different data.
    Mismatch,
    InsufficientSingles,
    ExcessiveErrors,
    /// The revealed data passes the test for both bit values.
    Ambiguous,
}

/// How Bob lower-bounds the single-photon detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    /// Subtract the worst-case number of multi-photon pulses.
    #[default]
    WorstCase,
    /// Count every detection as a single photon. Only for demonstrating attacks.
    Disabled,
}

/// Everything Bob holds once both reveals are in.
#[derive(Debug, Clone, Copy)]
pub struct VerificationInput<'a> {
    pub params: &'a SecurityParams,
    pub pulses: &'a [PulseRecord],
    /// Pulse indices Alice reported as detected.
    pub detected: Option<&'a [usize]>,
    pub declaration_b0: Option<&'a Declaration>,
    pub declaration_b1: Option<&'a Declaration>,
    pub layout: &'a ProtocolLayout,
    pub observations: Option<TimingObservations>,
    pub estimation: EstimationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    pub accepted: bool,
    pub deduced_bit: Option<u8>,
    pub reason: VerdictReason,
    pub estimation: Option<EstimationResult>,
    pub t_commit_upper: f64,
    pub exclusions: Exclusion,
}

/// Bob's decision. Bit 0 is accepted when both single-photon estimates reach
/// `n_tol` and the rectilinear errors stay within `floor(e_tol * n_tol)`;
/// bit 1 likewise with the diagonal errors.
pub fn verify(input: &VerificationInput<'_>) -> Result<VerificationVerdict> {
    let missing = |what: &str| Error::Protocol(format!("transcript is missing {what}"));
    let detected = input.detected.ok_or_else(|| missing("the detection report"))?;
    let decl0 = input.declaration_b0.ok_or_else(|| missing("B0's reveal"))?;
    let decl1 = input.declaration_b1.ok_or_else(|| missing("B1's reveal"))?;
    let obs = input.observations.ok_or_else(|| missing("reveal arrival times"))?;
    input.params.validate()?;

    let t_commit_upper = solve_commit_point(input.layout, &obs)?.t_commit_upper;
    let exclusions = location_exclusion(input.layout, &obs)?;
    let verdict = |reason: VerdictReason, estimation: Option<EstimationResult>, bit: Option<u8>| VerificationVerdict {
        accepted: reason == VerdictReason::Ok,
        deduced_bit: bit,
        reason,
        estimation,
        t_commit_upper,
        exclusions,
    };

    if decl0 != decl1 {
        return Ok(verdict(VerdictReason::Mismatch, None, None));
    }
    let estimation = estimate(input.params, input.pulses, detected, decl0, input.estimation)?;
    let n_tol = input.params.n_tol;
    if estimation.n_rect < n_tol || estimation.n_diag < n_tol {
        return Ok(verdict(VerdictReason::InsufficientSingles, Some(estimation), None));
    }
    let budget = input.params.max_errors();
    let pass0 = estimation.n_e_rect <= budget;
    let pass1 = estimation.n_e_diag <= budget;
    Ok(match (pass0, pass1) {
        (true, true) => verdict(VerdictReason::Ambiguous, Some(estimation), None),
        (true, false) => verdict(VerdictReason::Ok, Some(estimation), Some(0)),
        (false, true) => verdict(VerdictReason::Ok, Some(estimation), Some(1)),
        (false, false) => verdict(VerdictReason::ExcessiveErrors, Some(estimation), None),
    })
}

fn estimate(
    params: &SecurityParams,
    pulses: &[PulseRecord],
    detected: &[usize],
    declaration: &Declaration,
    mode: EstimationMode,
) -> Result<EstimationResult> {
    let counts = count_errors(pulses, detected, declaration)?;
    let n_sent_rect = pulses.iter().filter(|p| p.basis == Basis::Rect).count() as u64;
    let n_sent_diag = pulses.len() as u64 - n_sent_rect;
    let p_multi = p_multi_bound(params.mu, params.intensity_fluctuation)?;
    let (n_rect, n_diag, delta_multi_rect, delta_multi_diag) = match mode {
        EstimationMode::Disabled => (counts.n_detect_rect, counts.n_detect_diag, 0.0, 0.0),
        EstimationMode::WorstCase => {
            // An unreachable target means every pulse may be multi-photon.
            let deviation = |n: u64, eps: f64| solve_delta_multi(p_multi, n, eps).unwrap_or(1.0 - p_multi);
            let dr = deviation(n_sent_rect, params.eps_rect);
            let dd = deviation(n_sent_diag, params.eps_diag);
            (
                estimate_n_single(counts.n_detect_rect, n_sent_rect, p_multi, dr),
                estimate_n_single(counts.n_detect_diag, n_sent_diag, p_multi, dd),
                dr,
                dd,
            )
        }
    };
    Ok(EstimationResult {
        n_rect,
        n_diag,
        p_multi,
        delta_multi_rect,
        delta_multi_diag,
        n_e_rect: counts.n_e_rect,
        n_e_diag: counts.n_e_diag,
        n_detect_rect: counts.n_detect_rect,
        n_detect_diag: counts.n_detect_diag,
        n_sent_rect,
        n_sent_diag,
    })
}
