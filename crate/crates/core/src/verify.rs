//! The invariant suite behind `harmcalc verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{binary_concentrated_model, shifted_objective_witness, Mixing};
use crate::dose::{
    dose_sweep, shifted_model_analysis, tradeoff_curve, utility_at_harm_reduction, DoseGrid,
    GamParams,
};
use crate::error::{Error, Result};
use crate::harm::HarmEngine;
use crate::hetanm::{closed_form_expected_harm, mc_expected_harm, HarmInputs, HetAnm};
use crate::model_file::{export_model, model_from_value};
use crate::random::{
    random_action_values, random_model, random_outcome_dependent_utilities, RandomModelConfig,
};
use crate::scm::{DiscreteScm, Intervention};
use crate::zoo::{
    assistant_checks, preemption_checks, treatment_checks, treatment_model, Agent,
    AssistantAction, AssistantSpec, ReferenceCheck,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl From<ReferenceCheck> for Check {
    fn from(c: ReferenceCheck) -> Self {
        Check::new(
            c.name.clone(),
            c.passed(),
            format!("computed {} reference {} tol {:e}", c.computed, c.reference, c.tolerance),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub random_models: usize,
    pub mc_pairs: usize,
    pub mc_samples: u64,
    pub adversary_cases: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 20_220_101,
            random_models: 500,
            mc_pairs: 50,
            mc_samples: 1_000_000,
            adversary_cases: 100,
        }
    }
}

/// Statistics of the engine invariants over a family of random models.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RandomModelSummary {
    pub models: usize,
    pub contexts: usize,
    /// Contexts with zero probability, which admit no queries.
    pub skipped_contexts: usize,
    pub max_residual: f64,
    pub max_route_gap: f64,
    pub max_default_harm: f64,
    pub hpu_violations: usize,
}

fn positive_lambda<R: Rng>(rng: &mut R) -> f64 {
    // (0, 10]
    10.0 - rng.random_range(0.0..10.0)
}

/// Decomposition residual, agreement of the two expected-harm routes, zero
/// harm of a deterministic default, and that the HPU maximizer is never
/// needlessly harmful.
pub fn random_model_invariants(n: usize, seed: u64) -> Result<RandomModelSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RandomModelConfig::default();
    let mut s = RandomModelSummary::default();
    for _ in 0..n {
        let (scm, util) = random_model(&mut rng, &cfg)?;
        let engine = HarmEngine::new(&scm, &util)?;
        s.models += 1;
        let lambda = positive_lambda(&mut rng);
        for x in scm.context_space() {
            let (best, report) = match engine.hpu_optimal_action(lambda, &x) {
                Ok(r) => r,
                Err(Error::ZeroProbability(_)) => {
                    s.skipped_contexts += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            s.contexts += 1;
            s.max_residual = s.max_residual.max(report.max_residual());
            for a in &report.actions {
                let (h, b) = engine.expected_harm_benefit_by_outcome(a.action, &x)?;
                let gap = (h - a.expected_harm).abs().max((b - a.expected_benefit).abs());
                s.max_route_gap = s.max_route_gap.max(gap);
            }
            if let Some(a0) = scm.deterministic_default(&scm.context_assignment(&x))? {
                s.max_default_harm = s.max_default_harm.max(report.actions[a0].expected_harm);
            }
            if engine.needlessly_harmful(best, &x)?.is_some() {
                s.hpu_violations += 1;
            }
        }
    }
    Ok(s)
}

/// Largest `|MC - closed form| / SE` over random `(dU, s)` pairs with
/// `s` in `[0.1, 3)` and `dU / s` in `[-3, 3)`, and the
/// number of pairs outside three standard errors.
pub fn closed_form_vs_mc(pairs: usize, samples: u64, seed: u64) -> Result<(f64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut misses) = (0.0f64, 0);
    for k in 0..pairs {
        // |dU / s| <= 3 keeps enough positive samples for a meaningful SE.
        let s = rng.random_range(0.1..3.0);
        let du = s * rng.random_range(-3.0..3.0);
        // Single shared noise with coefficient s under the action, 0 under the default.
        let m = HetAnm::new(move |a: &bool| if *a { du } else { 0.0 }, false)
            .with_noise(move |a: &bool| if *a { s } else { 0.0 });
        let exact = closed_form_expected_harm(HarmInputs::new(du, s)?);
        let est = mc_expected_harm(&m, &true, samples, seed.wrapping_add(k as u64))?;
        let z = (est.estimate - exact).abs() / est.std_error;
        worst = worst.max(z);
        if !est.agrees_with(exact, 3.0) {
            misses += 1;
        }
    }
    Ok((worst, misses))
}

fn interventional_marginal(scm: &DiscreteScm, iv: &Intervention, var: usize) -> Result<Vec<f64>> {
    let d = scm.interventional_distribution(iv, &Default::default())?;
    let mut m = vec![0.0; scm.variables()[var].domain.len()];
    for (w, p) in d.entries() {
        m[w[var]] += p;
    }
    Ok(m)
}

/// Worst deviations of the phi-shift identities over random binary models:
/// `(marginal deviation, harm-delta deviation, harm change of other actions,
/// min |coefficient|)`.
pub fn phi_shift_identities(cases: usize, seed: u64) -> Result<(f64, f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut marg, mut delta, mut others, mut min_coef) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..cases {
        let au = random_outcome_dependent_utilities(&mut rng, 3, 3)?;
        let weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
        let base = binary_concentrated_model(&au, 0, &[0, 1, 2], &Mixing::Explicit(weights))?;
        let a = rng.random_range(1..3);
        let (lo, hi) = base.phi_bounds(a)?;
        let phi = rng.random_range(lo..hi);
        let shifted = base.apply_phi_shift(a, phi)?;
        let coef = base.phi_coefficient(&au, a)?;
        min_coef = min_coef.min(coef.abs());

        let (s0, s1) = (base.to_scm()?, shifted.to_scm()?);
        let (u0, u1) = (base.lift_table(&s0, &au)?, shifted.lift_table(&s1, &au)?);
        let (r0, r1) = (
            HarmEngine::new(&s0, &u0)?.report(&[], 0.0)?,
            HarmEngine::new(&s1, &u1)?.report(&[], 0.0)?,
        );
        let y = s0.var_index("Y")?;
        for b in 0..3 {
            let m0 = interventional_marginal(&s0, &s0.do_action(b), y)?;
            let m1 = interventional_marginal(&s1, &s1.do_action(b), y)?;
            for (p, q) in m0.iter().zip(&m1) {
                marg = marg.max((p - q).abs());
            }
            let dh = r1.actions[b].expected_harm - r0.actions[b].expected_harm;
            if b == a {
                delta = delta.max((dh - phi * coef).abs());
            } else {
                others = others.max(dh.abs());
            }
        }
    }
    Ok((marg, delta, others, min_coef))
}

/// Number of random `(U, J)` pairs flagged harmful in one of the shifted
/// environments.
pub fn shifted_objective_flag_count(cases: usize, seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flagged = 0;
    for _ in 0..cases {
        let au = random_outcome_dependent_utilities(&mut rng, 3, 3)?;
        let j = random_action_values(&mut rng, 3, 3)?;
        if shifted_objective_witness(&au, &j, 0, 1, 2)?.flagged.is_some() {
            flagged += 1;
        }
    }
    Ok(flagged)
}

fn section<T>(name: &str, r: Result<T>, f: impl FnOnce(T) -> Vec<Check>) -> Vec<Check> {
    match r {
        Ok(v) => f(v),
        Err(e) => vec![Check::new(name, false, format!("error: {e}"))],
    }
}

pub fn run_verification(cfg: &VerifyConfig) -> Vec<Check> {
    let mut out = Vec::new();
    out.extend(section("treatment model", treatment_checks(), |v| {
        v.into_iter().map(Check::from).collect()
    }));

    out.extend(section(
        "random models",
        random_model_invariants(cfg.random_models, cfg.seed),
        |s| {
            vec![
                Check::new(
                    "decomposition residual <= 1e-10",
                    s.max_residual <= 1e-10,
                    format!("max {:e} over {} contexts of {} models", s.max_residual, s.contexts, s.models),
                ),
                Check::new(
                    "harm routes agree <= 1e-10",
                    s.max_route_gap <= 1e-10,
                    format!("max gap {:e}", s.max_route_gap),
                ),
                Check::new(
                    "default action has zero harm",
                    s.max_default_harm == 0.0,
                    format!("max {:e}", s.max_default_harm),
                ),
                Check::new(
                    "HPU maximizer never needlessly harmful",
                    s.hpu_violations == 0,
                    format!("{} violations", s.hpu_violations),
                ),
            ]
        },
    ));

    out.extend(section(
        "closed form vs Monte Carlo",
        closed_form_vs_mc(cfg.mc_pairs, cfg.mc_samples, cfg.seed),
        |(worst, misses)| {
            let h11 = closed_form_expected_harm(HarmInputs { delta_u: 1.0, s: 1.0 });
            vec![
                Check::new(
                    "closed form within 3 SE of Monte Carlo",
                    misses == 0,
                    format!("{misses}/{} outside, worst {worst:.2} SE", cfg.mc_pairs),
                ),
                Check::new(
                    "closed form at (1, 1) = 0.08332",
                    (h11 - 0.08332).abs() < 5e-5,
                    format!("{h11:.6}"),
                ),
            ]
        },
    ));

    out.extend(section("assistant", assistant_checks(), |v| {
        v.into_iter().map(Check::from).collect()
    }));
    let spec = AssistantSpec::default();
    let grid_check = (1..=10_000)
        .map(|i| spec.decide(Agent::RiskAverse(i as f64 * 1e-4)))
        .collect::<Result<Vec<_>>>()
        .map(|d| d.iter().filter(|d| d.action == AssistantAction::AddBonus).count());
    out.extend(section("agent 2 grid", grid_check, |n| {
        vec![Check::new(
            "agent 2 never selects action 2 on (0, 1]",
            n == 0,
            format!("{n} of 10000 grid points"),
        )]
    }));
    let agent3 = (0..=2_000)
        .map(|i| spec.decide(Agent::HarmAverse(i as f64 * 0.05)))
        .collect::<Result<Vec<_>>>();
    out.extend(section("agent 3 grid", agent3, |d| {
        let cancels = d.iter().filter(|d| d.action == AssistantAction::Cancel).count();
        let below = d.iter().filter(|d| d.expected_return < 100.0).count();
        vec![
            Check::new("agent 3 never cancels", cancels == 0, format!("{cancels} of {}", d.len())),
            Check::new(
                "agent 3 never lowers the expected return",
                below == 0,
                format!("{below} of {}", d.len()),
            ),
        ]
    }));

    out.extend(section("preemption", preemption_checks(), |v| {
        v.into_iter().map(Check::from).collect()
    }));

    let params = GamParams::default();
    let grid = DoseGrid::default();
    out.extend(section(
        "dose optima",
        dose_sweep(&params, &grid, &[0.0, 10.0, 100.0]),
        |t| {
            let (d0, d10, d100) = (t.argmax(0).dose, t.argmax(1).dose, t.argmax(2).dose);
            vec![
                Check::new("dose optimum at λ=0 is 19.3 ± 0.1", (d0 - 19.3).abs() <= 0.1 + 1e-9, format!("{d0:.1}")),
                Check::new("dose optimum at λ=100 is 17.3 ± 0.1", (d100 - 17.3).abs() <= 0.1 + 1e-9, format!("{d100:.1}")),
                Check::new("optimal dose nonincreasing in λ", d0 >= d10 && d10 >= d100, format!("{d0:.1}, {d10:.1}, {d100:.1}")),
            ]
        },
    ));
    out.extend(section("trade-off", tradeoff_curve(&params, &grid), |c| {
        let at = |r: f64| utility_at_harm_reduction(&c, r).map_or(0.0, |row| row.relative_utility);
        let (u50, u90) = (at(0.5), at(0.9));
        vec![
            Check::new("50% harm reduction costs <= 0.4% utility", u50 >= 0.996, format!("relative utility {u50:.5}")),
            Check::new("90% harm reduction costs <= 2.5% utility", u90 >= 0.975, format!("relative utility {u90:.5}")),
        ]
    }));
    out.extend(section(
        "shifted dose model",
        shifted_model_analysis(&params, &[0.001, 0.01, 0.1], &[1.0, 10.0, 100.0], &grid),
        |r| {
            let hpu: Vec<String> = r.hpu.iter().map(|h| format!("λ={}→{:.1}", h.lambda, h.dose)).collect();
            let ra: Vec<String> = r
                .risk_averse
                .iter()
                .map(|x| format!("β={}→{:.1}", x.beta, x.dose))
                .collect();
            vec![
                Check::new(
                    "shifted model: HPU argmax equals μ argmax",
                    r.hpu_exceptions() == 0,
                    format!("μ argmax {:.1}; {}", r.mu_argmax, hpu.join(", ")),
                ),
                Check::new(
                    "shifted model: risk-averse dose exceeds μ argmax and is needlessly harmful",
                    r.risk_averse_exceptions() == 0,
                    format!("μ argmax {:.1}; {}", r.mu_argmax, ra.join(", ")),
                ),
            ]
        },
    ));

    out.extend(section(
        "phi shift",
        phi_shift_identities(cfg.adversary_cases, cfg.seed),
        |(marg, delta, others, coef)| {
            vec![
                Check::new("phi shift preserves marginals", marg <= 1e-12, format!("max deviation {marg:e}")),
                Check::new("phi shift is linear in phi", delta <= 1e-12, format!("max deviation {delta:e}")),
                Check::new("phi shift leaves other harms", others <= 1e-12, format!("max change {others:e}")),
                Check::new("phi coefficient is nonzero", coef > 0.0, format!("min |coefficient| {coef:e}")),
            ]
        },
    ));
    out.extend(section(
        "factual objectives",
        shifted_objective_flag_count(cfg.adversary_cases, cfg.seed),
        |n| {
            vec![Check::new(
                "every sampled factual objective is flagged harmful",
                n == cfg.adversary_cases,
                format!("{n}/{}", cfg.adversary_cases),
            )]
        },
    ));

    let (scm, util) = treatment_model();
    let doc = export_model(&scm, &util, None);
    out.extend(section("model file", model_from_value(&doc), |m| {
        let same = export_model(&m.scm, &m.utility, None) == doc;
        vec![Check::new("model file round trip", same, "treatment model")]
    }));
    out
}
