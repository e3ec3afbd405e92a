//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are never captured; exits nonzero if any
//! criterion other than 7 fails.
//!
//! Criterion 7 does not hold for the default model parameters (see
//! README). Its line is still printed here, but it is enforced by the
//! `shifted_dose` target, which runs last so that its failure does not stop
//! the remaining suites.

use std::time::{Duration, Instant};

use harmcalc_core::dose::{
    dose_sweep, shifted_model_analysis, tradeoff_curve, utility_at_harm_reduction, DoseGrid,
    GamParams,
};
use harmcalc_core::harm::HarmEngine;
use harmcalc_core::hetanm::{closed_form_expected_harm, HarmInputs};
use harmcalc_core::verify::{
    closed_form_vs_mc, phi_shift_identities, random_model_invariants, shifted_objective_flag_count,
};
use harmcalc_core::zoo::{preemption_model, treatment_model, Agent, AssistantAction, AssistantSpec};

const SEED: u64 = 20_220_101;

/// Enforced in `tests/shifted_dose.rs`.
const KNOWN_UNATTAINABLE: usize = 7;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{} [{:.2}s]", o.detail, took.as_secs_f64());
    if let Some(limit) = limit {
        if took > limit {
            o.passed = false;
            o.detail += &format!(" exceeds {}s", limit.as_secs());
        }
    }
    o
}

fn treatment() -> Outcome {
    let (scm, util) = treatment_model();
    let r = HarmEngine::new(&scm, &util).unwrap().report(&[], 0.0).unwrap();
    let got = [
        r.actions[0].expected_utility,
        r.actions[1].expected_utility,
        r.actions[2].expected_utility,
        r.actions[1].expected_harm,
        r.actions[2].expected_harm,
    ];
    let want = [0.5, 0.8, 0.8, 0.0, 0.1];
    let err = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    outcome(err <= 1e-12, format!("E[Y_t] = {:?}, harm = {:?}, max error {err:e}", &got[..3], &got[3..]))
}

fn decomposition_and_hpu() -> (Outcome, Outcome) {
    let s = random_model_invariants(500, SEED).unwrap();
    (
        outcome(
            s.models == 500 && s.max_residual <= 1e-10,
            format!("max residual {:e} over {} contexts of {} models", s.max_residual, s.contexts, s.models),
        ),
        outcome(s.hpu_violations == 0, format!("{} violations / {} models", s.hpu_violations, s.models)),
    )
}

fn closed_form() -> Outcome {
    let (worst, misses) = closed_form_vs_mc(50, 1_000_000, SEED).unwrap();
    let h = closed_form_expected_harm(HarmInputs::new(1.0, 1.0).unwrap());
    outcome(
        misses == 0 && (h - 0.08332).abs() < 5e-5,
        format!("{misses}/50 pairs outside 3 SE (worst {worst:.2} SE); H(1, 1) = {h:.6}"),
    )
}

fn assistant() -> Outcome {
    let spec = AssistantSpec::default();
    let grid_hits = (1..=10_000)
        .filter(|&i| spec.decide(Agent::RiskAverse(i as f64 * 1e-4)).unwrap().action == AssistantAction::AddBonus)
        .count();
    let t2 = spec.risk_averse_cancel_threshold();
    let t3 = spec.harm_averse_switch_threshold();
    // The decisions themselves must flip at the reported thresholds.
    let flips = |agent: fn(f64) -> Agent, t: f64| {
        let (lo, hi) = (spec.decide(agent(t - 1e-6)).unwrap(), spec.decide(agent(t + 1e-6)).unwrap());
        lo.action != hi.action
    };
    let ok = grid_hits == 0
        && (t2 - 0.003125).abs() <= 1e-4
        && (t3 - 11.93).abs() <= 0.05
        && flips(Agent::RiskAverse, t2)
        && flips(Agent::HarmAverse, t3);
    outcome(ok, format!("action 2 on {grid_hits}/10000 grid points; agent-2 switch {t2:.6}; agent-3 switch {t3:.4}"))
}

fn dose() -> Outcome {
    let p = GamParams::default();
    let grid = DoseGrid::default();
    let t = dose_sweep(&p, &grid, &[0.0, 100.0]).unwrap();
    let (d0, d100) = (t.argmax(0).dose, t.argmax(1).dose);
    let curve = tradeoff_curve(&p, &grid).unwrap();
    let loss = |r: f64| utility_at_harm_reduction(&curve, r).map_or(f64::INFINITY, |row| 1.0 - row.relative_utility);
    let (l50, l90) = (loss(0.5), loss(0.9));
    let ok = (d0 - 19.3).abs() <= 0.1 + 1e-9
        && (d100 - 17.3).abs() <= 0.1 + 1e-9
        && l90 <= 0.025
        && l50 <= 0.004;
    outcome(
        ok,
        format!(
            "optimum {d0:.1} at λ=0, {d100:.1} at λ=100; utility loss {:.3}% at 50% harm reduction, {:.3}% at 90%",
            100.0 * l50,
            100.0 * l90
        ),
    )
}

fn shifted_dose() -> Outcome {
    let r = shifted_model_analysis(
        &GamParams::default(),
        &[0.001, 0.01, 0.1],
        &[1.0, 10.0, 100.0],
        &DoseGrid::default(),
    )
    .unwrap();
    let hpu: Vec<String> = r.hpu.iter().map(|h| format!("λ={}→{:.1}", h.lambda, h.dose)).collect();
    let ra: Vec<String> = r
        .risk_averse
        .iter()
        .map(|x| format!("β={}→{:.1}{}", x.beta, x.dose, if x.dominated_by.is_some() { " (dominated)" } else { "" }))
        .collect();
    outcome(
        r.holds(),
        format!(
            "μ argmax {:.1}; HPU {}; risk-averse {}; {} HPU and {} risk-averse exceptions",
            r.mu_argmax,
            hpu.join(" "),
            ra.join(" "),
            r.hpu_exceptions(),
            r.risk_averse_exceptions()
        ),
    )
}

fn adversary() -> Outcome {
    let (marg, delta, others, coef) = phi_shift_identities(100, SEED).unwrap();
    let flagged = shifted_objective_flag_count(100, SEED).unwrap();
    outcome(
        marg <= 1e-12 && delta <= 1e-12 && others <= 1e-12 && coef > 0.0 && flagged == 100,
        format!(
            "marginal deviation {marg:e}, harm-shift deviation {delta:e}, other-harm change {others:e}; flagged {flagged}/100"
        ),
    )
}

fn preemption() -> Outcome {
    let (scm, util) = preemption_model();
    let r = HarmEngine::new(&scm, &util).unwrap().report(&[], 0.0).unwrap();
    let (wait, shoot) = (r.actions[0].expected_harm, r.actions[1].expected_harm);
    outcome(shoot == 1.0 && wait == 0.0, format!("harm of shooting {shoot}, default harm {wait}"))
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let mut results = Vec::new();
    results.push((1, timed(secs(1), treatment)));
    let mut c3 = None;
    results.push((2, timed(secs(60), || {
        let (c2, hpu) = decomposition_and_hpu();
        c3 = Some(hpu);
        c2
    })));
    results.push((3, c3.expect("criterion 3 shares the criterion 2 pass")));
    results.push((4, timed(None, closed_form)));
    results.push((5, timed(secs(10), assistant)));
    results.push((6, timed(secs(30), dose)));
    results.push((7, timed(None, shifted_dose)));
    results.push((8, timed(None, adversary)));
    results.push((9, timed(None, preemption)));

    for (n, o) in &results {
        println!("criterion {n}: {} — {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<_> = results.iter().filter(|(_, o)| !o.passed).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
    }
    if failed.iter().any(|&n| n != KNOWN_UNATTAINABLE) {
        std::process::exit(1);
    }
}
