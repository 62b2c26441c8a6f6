//! Command drivers and their reports: an aligned text table for humans and a
//! JSON document for machines. Reports are built completely before anything
//! is written, and contain nothing that varies between identical runs.

use std::fmt::Write as _;

use rand::RngCore;
use serde::Serialize;
use serde_json::{json, Value};

use crate::adversary::{run_attack, AttackOutcome};
use crate::config::RunConfig;
use crate::geometry::{
    commit_point_max, derived_distances, location_exclusion, solve_commit_point, t_max_simple, Exclusion,
};
use crate::protocol::run_honest_protocol;
use crate::rng::stream;
use crate::security::{epsilon_b_bound, BindingBound, SecurityParams, VerdictReason};
use crate::units::{to_km, to_us};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: String,
    pub json: Value,
    /// JSONL transcripts of every repetition, when requested.
    pub transcript: Option<Vec<u8>>,
}

impl Report {
    pub fn json_text(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.json).expect("report values serialise");
        text.push('\n');
        text
    }
}

/// Seed of repetition `rep`: the first word of stream `rep` of the master seed.
pub fn repetition_seed(master: u64, rep: u64) -> u64 {
    stream(master, rep).next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub rep: u64,
    pub seed: u64,
    pub bit_committed: u8,
    pub bit_deduced: Option<u8>,
    pub accepted: bool,
    pub reason: VerdictReason,
    /// Errors in the committed basis.
    pub n_e: Option<u64>,
    pub n_rect: Option<u64>,
    pub n_diag: Option<u64>,
    pub t_b0_us: f64,
    pub t_b1_us: f64,
    pub t_commit_us: f64,
    pub t_unveil_us: f64,
    pub t_commit_actual_us: f64,
    pub exclusions: Exclusion,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn bound_or_none(params: &SecurityParams) -> Option<BindingBound> {
    epsilon_b_bound(params).ok()
}

pub fn cmd_run(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.require_seed()?;
    let mut rows = Vec::new();
    let mut transcript = cfg.transcript.as_ref().map(|_| Vec::new());
    for rep in 0..cfg.reps {
        let rep_seed = repetition_seed(seed, rep);
        let bit = cfg.committed_bit.for_rep(rep);
        let (t, v) = run_honest_protocol(&cfg.protocol, bit, rep_seed)?;
        if v.accepted && v.deduced_bit != Some(bit) {
            return Err(Error::Invariant(format!("repetition {rep}: committed {bit}, deduced {:?}", v.deduced_bit)));
        }
        if v.t_commit_upper + 1e-12 < t.t_commit_actual {
            return Err(Error::Invariant(format!(
                "repetition {rep}: commit at {} exceeds the bound {}",
                t.t_commit_actual, v.t_commit_upper
            )));
        }
        if let Some(buf) = transcript.as_mut() {
            t.write_jsonl(buf).map_err(|e| Error::Protocol(format!("transcript export: {e}")))?;
        }
        let est = v.estimation.as_ref();
        rows.push(RunRow {
            rep,
            seed: rep_seed,
            bit_committed: bit,
            bit_deduced: v.deduced_bit,
            accepted: v.accepted,
            reason: v.reason,
            n_e: est.map(|e| if bit == 0 { e.n_e_rect } else { e.n_e_diag }),
            n_rect: est.map(|e| e.n_rect),
            n_diag: est.map(|e| e.n_diag),
            t_b0_us: to_us(t.observations.t_b0),
            t_b1_us: to_us(t.observations.t_b1),
            t_commit_us: to_us(v.t_commit_upper),
            t_unveil_us: to_us(t.t_unveil),
            t_commit_actual_us: to_us(t.t_commit_actual),
            exclusions: v.exclusions,
        });
    }
    let bound = bound_or_none(&cfg.protocol.security);

    let mut table = String::new();
    let _ = writeln!(
        table,
        "{:>4} {:>9} {:>7} {:>20} {:>4} {:>6} {:>6} {:>9} {:>9} {:>10} {:>10}",
        "rep", "committed", "deduced", "verdict", "n_e", "n_rect", "n_diag", "t_B0/us", "t_B1/us", "t_commit", "t_unveil"
    );
    for r in &rows {
        let _ = writeln!(
            table,
            "{:>4} {:>9} {:>7} {:>20} {:>4} {:>6} {:>6} {:>9.2} {:>9.2} {:>10.2} {:>10.2}",
            r.rep,
            r.bit_committed,
            opt(r.bit_deduced),
            format!("{:?}", r.reason),
            opt(r.n_e),
            opt(r.n_rect),
            opt(r.n_diag),
            r.t_b0_us,
            r.t_b1_us,
            r.t_commit_us,
            r.t_unveil_us
        );
    }
    let accepted = rows.iter().filter(|r| r.accepted).count();
    let _ = writeln!(table, "accepted {accepted} of {}", rows.len());
    match &bound {
        Some(b) => {
            let _ = writeln!(table, "eps_b = {:.6} (delta* = {:.4})", b.eps_b, b.delta_star);
        }
        None => {
            let _ = writeln!(table, "eps_b undefined for n_tol < 2");
        }
    }

    let json = json!({
        "command": "run",
        "config": cfg,
        "eps_b": bound.map(|b| b.eps_b),
        "delta_star": bound.map(|b| b.delta_star),
        "accepted": accepted,
        "rows": rows,
    });
    Ok(Report {
        table,
        json,
        transcript,
    })
}

pub fn cmd_bound(cfg: &RunConfig) -> Result<Report> {
    let params = cfg.protocol.security;
    let b = epsilon_b_bound(&params)?;
    let mut table = String::new();
    let _ = writeln!(table, "n_tol                 {}", params.n_tol);
    let _ = writeln!(table, "e_tol                 {}", params.e_tol);
    let _ = writeln!(table, "max errors            {}", b.components.max_errors);
    let _ = writeln!(table, "eps_b                 {:.6}", b.eps_b);
    let _ = writeln!(table, "delta*                {:.6}", b.delta_star);
    let _ = writeln!(table, "exponential term      {:.6e}", b.components.exponential_term);
    let _ = writeln!(table, "entropy term          {:.6e}", b.components.entropy_term);
    let _ = writeln!(table, "combinatorial factor  {:.6e}", b.components.combinatorial_factor);

    let mut sweep_rows = Vec::new();
    if let Some(values) = cfg.sweep.values()? {
        let _ = writeln!(table, "\n{:>8} {:>14} {:>10}", "n_tol", "eps_b", "delta*");
        for n_tol in values {
            let sb = epsilon_b_bound(&SecurityParams { n_tol, ..params })?;
            let _ = writeln!(table, "{:>8} {:>14.6e} {:>10.6}", n_tol, sb.eps_b, sb.delta_star);
            sweep_rows.push(json!({ "n_tol": n_tol, "eps_b": sb.eps_b, "delta_star": sb.delta_star }));
        }
    }
    let json = json!({
        "command": "bound",
        "config": cfg,
        "bound": b,
        "sweep": sweep_rows,
    });
    Ok(Report {
        table,
        json,
        transcript: None,
    })
}

pub fn cmd_geometry(cfg: &RunConfig) -> Result<Report> {
    let layout = &cfg.protocol.layout;
    let obs = cfg.timing.require()?;
    let dd = derived_distances(layout)?;
    let d_a0_a1 = layout.d_a0_a1();
    let t_simple = t_max_simple(&obs, d_a0_a1)?;
    let sol = solve_commit_point(layout, &obs)?;
    let q = commit_point_max(layout, &obs).ok().map(|m| m.q);
    let excl = location_exclusion(layout, &obs)?;

    let mut table = String::new();
    let _ = writeln!(table, "d_A0A1 (km)           {:.4}", to_km(d_a0_a1));
    let _ = writeln!(table, "d_B0B1 (km)           {:.4}", to_km(dd.d_b0_b1));
    let _ = writeln!(table, "t_max simple (us)     {:.3}", to_us(t_simple));
    let _ = writeln!(table, "t_commit_upper (us)   {:.3}", to_us(sol.t_commit_upper));
    let _ = writeln!(table, "d_Bob_Pcommit (km)    {:.4}", to_km(sol.d_bob_pcommit));
    let _ = writeln!(table, "at_max_point          {}", sol.at_max_point);
    let _ = writeln!(table, "q                     {}", q.map_or("-".into(), |q| format!("{q:.6}")));
    let _ = writeln!(table, "A0 excluded           {}", excl.a0_excluded);
    let _ = writeln!(table, "A1 excluded           {}", excl.a1_excluded);
    let json = json!({
        "command": "geometry",
        "config": cfg,
        "derived": dd,
        "d_a0_a1": d_a0_a1,
        "t_max_simple": t_simple,
        "solution": sol,
        "q": q,
        "exclusions": excl,
    });
    Ok(Report {
        table,
        json,
        transcript: None,
    })
}

pub fn cmd_attack(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.require_seed()?;
    let spec = cfg.attack_spec()?;
    let ctx = cfg.attack_context()?;
    let outcome: AttackOutcome = run_attack(&spec, &ctx, cfg.attack.trials, seed)?;
    let mut table = String::new();
    let _ = writeln!(
        table,
        "{:<26} {:>8} {:>9} {:>9} {:>21} {:>10}",
        "strategy", "trials", "successes", "p", "wilson 95%", "guarantee"
    );
    let _ = writeln!(
        table,
        "{:<26} {:>8} {:>9} {:>9.4} {:>21} {:>10}",
        outcome.strategy,
        outcome.trials,
        outcome.success_count,
        outcome.estimated_probability,
        format!("[{:.4}, {:.4}]", outcome.wilson_low, outcome.wilson_high),
        if outcome.guarantee_respected { "held" } else { "broken" }
    );
    for (name, value) in &outcome.metrics {
        let _ = writeln!(table, "  {name:<30} {value}");
    }
    let json = json!({
        "command": "attack",
        "config": cfg,
        "spec": spec,
        "outcome": outcome,
    });
    Ok(Report {
        table,
        json,
        transcript: None,
    })
}
