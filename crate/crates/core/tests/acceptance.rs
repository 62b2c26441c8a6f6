//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion with its
//! runtime and exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use relbc_core::adversary::{
    alice_delayed_commit_attack, alice_multi_photon_attack, bob_dead_time_attack, bob_double_click_attack,
    AttackContext, CommitLocation, CommitPlan, CommitTime, DeadTimeVariant,
};
use relbc_core::geometry::{location_exclusion, location_exclusion_approx, solve_commit_point, t_max_simple, ProtocolLayout, TimingObservations};
use relbc_core::photonic::{DoubleClickPolicy, SeparationRule};
use relbc_core::rng::stream;
use relbc_core::security::{
    combinatorial_factor, epsilon_b_bound, estimate_n_single, p_multi_bound, solve_delta_multi, EstimationMode,
    SecurityParams,
};
use rand::Rng;

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn binding_bound() -> Result<String, String> {
    let params = SecurityParams::default();
    let b = epsilon_b_bound(&params).map_err(|e| e.to_string())?;
    ensure((0.0560..=0.0572).contains(&b.eps_b), || format!("eps_b = {}", b.eps_b))?;
    ensure((b.delta_star - 0.2953).abs() <= 5e-4, || format!("delta* = {}", b.delta_star))?;
    let (grid, grid_delta) = eps_b_grid(107, 0.015, 1, 108.0, 0.0042, 200_000);
    ensure((b.eps_b - grid).abs() <= 1e-7, || format!("eps_b {} vs grid {grid}", b.eps_b))?;
    ensure((b.delta_star - grid_delta).abs() <= 1e-4, || format!("delta* {} vs grid {grid_delta}", b.delta_star))?;
    Ok(format!("eps_b = {:.6}, delta* = {:.4}", b.eps_b, b.delta_star))
}

fn multi_photon_estimates() -> Result<String, String> {
    let p = p_multi_bound(0.183, 0.1).map_err(|e| e.to_string())?;
    let x: f64 = 0.183 * 1.1;
    let direct = 1.0 - (-x).exp() - x * (-x).exp();
    ensure((p - direct).abs() < 1e-12, || format!("p_multi {p} vs {direct}"))?;
    ensure(format!("{p:.4}") == "0.0177", || format!("p_multi = {p}"))?;
    let d = solve_delta_multi(0.0177, 2838, 0.0021).map_err(|e| e.to_string())?;
    ensure((d - 0.00937).abs() <= 1e-4, || format!("delta_multi = {d}"))?;
    let y = 0.0177 + d;
    let kl = y * (y / 0.0177).ln() + (1.0 - y) * ((1.0 - y) / (1.0 - 0.0177)).ln();
    let tail = (-kl * 2838.0).exp();
    ensure((tail / 0.0021 - 1.0).abs() < 1e-6, || format!("tail {tail}"))?;
    Ok(format!("p_multi = {p:.4}, delta_multi = {d:.5}"))
}

fn table_two() -> Result<String, String> {
    let p = p_multi_bound(0.183, 0.1).map_err(|e| e.to_string())?;
    let d = solve_delta_multi(p, 2838, 0.0021).map_err(|e| e.to_string())?;
    let mut cells = 0;
    for (k, &(det_r, det_d, n_r, n_d)) in FIELD_SINGLES.iter().enumerate() {
        let got = (estimate_n_single(det_r, 2838, p, d), estimate_n_single(det_d, 2838, p, d));
        ensure(got == (n_r, n_d), || format!("run {}: {got:?} vs ({n_r}, {n_d})", k + 1))?;
        cells += 2;
    }
    Ok(format!("{cells}/16 cells match"))
}

fn field_geometry() -> Result<String, String> {
    let layout = ProtocolLayout::field_test();
    let d = (9300f64.powi(2) + 12300f64.powi(2) - 2.0 * 9300.0 * 12300.0 * 165f64.to_radians().cos()).sqrt();
    ensure((layout.d_a0_a1() - d).abs() < 1e-6, || format!("d_A0A1 {}", layout.d_a0_a1()))?;
    let mut worst: f64 = 0.0;
    for (k, &(tb0, tb1, t_commit)) in FIELD_RUNS.iter().enumerate() {
        let obs = TimingObservations::new(FIELD_T0_US * US, tb0 * US, tb1 * US).map_err(|e| e.to_string())?;
        let t = t_max_simple(&obs, layout.d_a0_a1()).map_err(|e| e.to_string())? / US;
        worst = worst.max((t - t_commit).abs());
        ensure((t - t_commit).abs() <= 0.05, || format!("run {}: {t:.3} vs {t_commit}", k + 1))?;
        let ex = location_exclusion(&layout, &obs).map_err(|e| e.to_string())?;
        let approx = location_exclusion_approx(&layout, &obs);
        ensure(ex.a0_excluded && ex.a1_excluded && approx.a0_excluded && approx.a1_excluded, || {
            format!("run {}: exclusions {ex:?} / {approx:?}", k + 1)
        })?;
    }
    Ok(format!("8 runs, worst |dt| = {worst:.3} us, all exclusions hold"))
}

fn honest_runs() -> Result<String, String> {
    let st = honest_suite(&miniature_config(), 10_000, 1);
    ensure(st.wrong_deductions == 0, || format!("{} wrong deductions", st.wrong_deductions))?;
    ensure(st.accepted > 0, || "no run accepted".into())?;
    ensure(st.unsound_bounds == 0, || format!("{} unsound bounds", st.unsound_bounds))?;
    ensure(st.misordered == 0, || format!("{} misordered timelines", st.misordered))?;
    let rate = st.error_rate();
    ensure((0.002..=0.025).contains(&rate), || format!("error rate {rate}"))?;
    let p = st.concealing_p_value();
    ensure(p > 0.01, || format!("concealing p = {p}"))?;
    Ok(format!(
        "{} runs, {} accepted, error rate {:.2}%, concealing p = {p:.3}",
        st.runs,
        st.accepted,
        100.0 * rate
    ))
}

fn attacks() -> Result<String, String> {
    let ctx = AttackContext::default();
    let e = |e: relbc_core::Error| e.to_string();
    let trials = 10_000;
    let dc_off = bob_double_click_attack(DoubleClickPolicy::Discard, 1e3, &ctx, trials, 11).map_err(e)?;
    let dc_on = bob_double_click_attack(DoubleClickPolicy::RandomAssign, 1e3, &ctx, trials, 12).map_err(e)?;
    let dt = |sep, seed| bob_dead_time_attack(DeadTimeVariant::ThreePulse, sep, 1e3, None, 1e-9, &ctx, trials, seed);
    let dt_off = dt(SeparationRule::Naive, 13).map_err(e)?;
    let dt_on = dt(SeparationRule::QuietPeriod, 14).map_err(e)?;
    for (name, off, on) in [("double-click", &dc_off, &dc_on), ("three-pulse", &dt_off, &dt_on)] {
        ensure(off.estimated_probability >= 0.99, || format!("{name} off: {}", off.estimated_probability))?;
        ensure((0.49..=0.51).contains(&on.estimated_probability), || {
            format!("{name} on: {}", on.estimated_probability)
        })?;
    }
    let mp = alice_multi_photon_attack(EstimationMode::WorstCase, &ctx, 200, 15).map_err(e)?;
    ensure(mp.success_count == 0 && mp.metrics["p0"] == 0.0 && mp.metrics["p1"] == 0.0, || {
        format!("multi-photon openings accepted: {:?}", mp.metrics)
    })?;
    let plan = CommitPlan {
        location: CommitLocation::Random,
        time: CommitTime::Latest,
    };
    let dl = alice_delayed_commit_attack(plan, &ctx, 1000, 16).map_err(e)?;
    ensure(dl.success_count == 1000, || format!("{} of 1000 strategies feasible", dl.success_count))?;
    ensure(dl.metrics["violations"] == 0.0 && dl.guarantee_respected, || {
        format!("delayed commit violations: {:?}", dl.metrics)
    })?;
    Ok(format!(
        "double-click {:.4}/{:.4}, three-pulse {:.4}/{:.4}, multi-photon openings 0/{}, delayed commit 0 violations in 1000 (worst gap {:.2e} us)",
        dc_off.estimated_probability,
        dc_on.estimated_probability,
        dt_off.estimated_probability,
        dt_on.estimated_probability,
        2 * mp.trials,
        dl.metrics["worst_gap_us"]
    ))
}

fn oracles() -> Result<String, String> {
    for n in 0..=20u32 {
        let brute = subset_factor_all_cutoffs(n);
        for k in 0..=n {
            let exact = combinatorial_factor(u64::from(n), u64::from(k));
            ensure(exact == brute[k as usize].into(), || format!("N={n} K={k}: {exact} vs {}", brute[k as usize]))?;
            if n <= 12 {
                ensure(subset_pairs(n, k) == brute[k as usize], || format!("pair count N={n} K={k}"))?;
            }
        }
    }
    let mut rng = stream(2024, 0);
    let mut worst: f64 = 0.0;
    let mut capped = 0;
    for case in 0..20 {
        let layout = ProtocolLayout::new(
            rng.random_range(0.0..3000.0),
            rng.random_range(3000.0..15000.0),
            rng.random_range(3000.0..15000.0),
            rng.random_range(0.0..2000.0),
            rng.random_range(0.0..2000.0),
            rng.random_range(60f64..175.0).to_radians(),
        )
        .map_err(|e| e.to_string())?;
        let s = sites(&layout);
        // Alternate generous and tight slack so both the cap and the light
        // cones bind.
        let slack = if case % 2 == 0 { 200.0..12000.0 } else { 20.0..800.0 };
        let obs = TimingObservations::new(
            0.0,
            (s.bob.dist(s.b0) + rng.random_range(slack.clone())) / C,
            (s.bob.dist(s.b1) + rng.random_range(slack)) / C,
        )
        .map_err(|e| e.to_string())?;
        let sol = solve_commit_point(&layout, &obs).map_err(|e| e.to_string())?;
        let grid = commit_distance_grid(&layout, &obs, 2000);
        let gap = (sol.d_bob_pcommit - grid).abs();
        worst = worst.max(gap);
        capped += usize::from(sol.at_max_point);
        ensure(gap <= 1.0, || format!("layout {case}: solver {} vs grid {grid}", sol.d_bob_pcommit))?;
    }
    Ok(format!(
        "subset enumeration N <= 20 exact; 20 layouts ({capped} capped), worst gap {worst:.3} m"
    ))
}

fn determinism() -> Result<String, String> {
    let dir = std::env::temp_dir().join(format!("relbc-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let path = dir.join("run.json");
    let path_s = path.to_str().ok_or("non-UTF-8 temp path")?.to_owned();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let out = Command::new(env!("CARGO_BIN_EXE_relbc"))
            .args(["run", "--seed", "42", "--reps", "3", "--out", &path_s])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        outputs.push((std::fs::read(&path).map_err(|e| e.to_string())?, out.stdout));
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(outputs[0] == outputs[1], || "repeated run produced different bytes".into())?;
    Ok(format!("{} JSON bytes identical across repeats", outputs[0].0.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 8] = [
        ("binding bound", Duration::from_secs(1), binding_bound),
        ("multi-photon estimates", Duration::from_secs(1), multi_photon_estimates),
        ("single-photon table", Duration::from_secs(1), table_two),
        ("field geometry", Duration::from_secs(1), field_geometry),
        ("honest-run properties", Duration::from_secs(120), honest_runs),
        ("attack suite", Duration::from_secs(300), attacks),
        ("oracle equivalence", Duration::from_secs(120), oracles),
        ("determinism", Duration::from_secs(30), determinism),
    ];
    let total = Instant::now();
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= *budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; over the {budget:?} budget"))
            }
        });
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {tag} {:>8.3} s  {name}: {detail}", i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of 8 passed in {:.3} s", 8 - failed, total.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
