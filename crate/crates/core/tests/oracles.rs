//! Engine results against independent brute-force oracles.

use harmcalc_core::harm::HarmEngine;
use harmcalc_core::random::{random_model, RandomModelConfig};
use harmcalc_core::scm::{product_space, Assignment, DiscreteScm, Intervention};
use harmcalc_core::zoo::treatment_model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Value of `var` by recursive substitution through the mechanism tables,
/// ignoring the precomputed topological order and strides.
fn substitute(scm: &DiscreteScm, var: usize, noise: &[usize], clamp: &[Option<usize>]) -> usize {
    if let Some(v) = clamp[var] {
        return v;
    }
    let m = scm.mechanism(var);
    let mut idx = 0;
    for &p in &m.parents {
        idx = idx * scm.variables()[p].domain.len() + substitute(scm, p, noise, clamp);
    }
    for &e in &m.exo {
        idx = idx * scm.exogenous()[e].domain.len() + noise[e];
    }
    m.table[idx]
}

fn world(scm: &DiscreteScm, noise: &[usize], clamp: &[Option<usize>]) -> Vec<usize> {
    (0..scm.variables().len())
        .map(|v| substitute(scm, v, noise, clamp))
        .collect()
}

fn noise_states(scm: &DiscreteScm) -> Vec<(Vec<usize>, f64)> {
    let radix: Vec<usize> = scm.exogenous().iter().map(|e| e.domain.len()).collect();
    product_space(&radix)
        .into_iter()
        .map(|n| {
            let p = n
                .iter()
                .zip(scm.exogenous())
                .map(|(&x, e)| e.probs[x])
                .product();
            (n, p)
        })
        .collect()
}

#[test]
fn treatment_model_matches_hand_enumeration() {
    // (robust, resistant, allergic) patient traits.
    let mut eu = [0.0; 3];
    let mut harm = [0.0; 3];
    for robust in [false, true] {
        for resistant in [false, true] {
            for allergic in [false, true] {
                let p = 0.5
                    * if resistant { 0.4 } else { 0.6 }
                    * if allergic { 0.2 } else { 0.8 };
                let y = [
                    robust as u8 as f64,
                    (robust || !resistant) as u8 as f64,
                    (!allergic) as u8 as f64,
                ];
                for t in 0..3 {
                    eu[t] += p * y[t];
                    harm[t] += p * (y[0] - y[t]).max(0.0);
                }
            }
        }
    }
    let (scm, util) = treatment_model();
    let r = HarmEngine::new(&scm, &util).unwrap().report(&[], 0.0).unwrap();
    for t in 0..3 {
        assert!((r.actions[t].expected_utility - eu[t]).abs() < 1e-12);
        assert!((r.actions[t].expected_harm - harm[t]).abs() < 1e-12);
    }
}

#[test]
fn evaluate_world_matches_recursive_substitution() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (scm, _) = random_model(&mut rng, &RandomModelConfig::default()).unwrap();
        let n = scm.variables().len();
        let v = rng.random_range(0..n);
        let x = rng.random_range(0..scm.variables()[v].domain.len());
        let mut clamp = vec![None; n];
        clamp[v] = Some(x);
        for (noise, _) in noise_states(&scm) {
            let got = scm.evaluate_world(&noise, &Intervention::single(v, x)).unwrap();
            assert_eq!(got.endogenous, world(&scm, &noise, &clamp));
        }
    }
}

#[test]
fn report_matches_brute_force_over_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let (scm, util) = random_model(&mut rng, &RandomModelConfig::default()).unwrap();
        let engine = HarmEngine::new(&scm, &util).unwrap();
        let n = scm.variables().len();
        let action = scm.action();
        let ctx_vars = &scm.roles().context;
        for x in scm.context_space() {
            let (mut mass, mut eu, mut h) = (0.0, vec![0.0; scm.action_domain_size()], vec![0.0; scm.action_domain_size()]);
            for (noise, p) in noise_states(&scm) {
                let w0 = world(&scm, &noise, &vec![None; n]);
                if ctx_vars.iter().zip(&x).any(|(&c, &v)| w0[c] != v) {
                    continue;
                }
                mass += p;
                let u0 = util.get(w0[action], &x, &scm.outcome_values(&w0));
                for a in 0..eu.len() {
                    let mut clamp = vec![None; n];
                    clamp[action] = Some(a);
                    let wa = world(&scm, &noise, &clamp);
                    let ua = util.get(a, &x, &scm.outcome_values(&wa));
                    eu[a] += p * ua;
                    h[a] += p * (u0 - ua).max(0.0);
                }
            }
            if mass == 0.0 {
                continue;
            }
            let r = engine.report(&x, 0.0).unwrap();
            for a in 0..eu.len() {
                assert!((r.actions[a].expected_utility - eu[a] / mass).abs() < 1e-12);
                assert!((r.actions[a].expected_harm - h[a] / mass).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn counterfactual_joint_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let (scm, _) = random_model(&mut rng, &RandomModelConfig::default()).unwrap();
        let n = scm.variables().len();
        let a = scm.action();
        let y = scm.roles().outcomes[0];
        let k = scm.action_domain_size();
        let (a1, a2) = (rng.random_range(0..k), rng.random_range(0..k));
        let (y1, y2) = (
            rng.random_range(0..scm.variables()[y].domain.len()),
            rng.random_range(0..scm.variables()[y].domain.len()),
        );
        let mut c1 = vec![None; n];
        c1[a] = Some(a1);
        let mut c2 = vec![None; n];
        c2[a] = Some(a2);
        let oracle: f64 = noise_states(&scm)
            .iter()
            .filter(|(e, _)| world(&scm, e, &c1)[y] == y1 && world(&scm, e, &c2)[y] == y2)
            .map(|(_, p)| p)
            .sum();
        let q = harmcalc_core::scm::CounterfactualQuery::new()
            .world("w1", Intervention::single(a, a1))
            .unwrap()
            .query("w1", Assignment::from_pairs([(y, y1)]))
            .unwrap()
            .world("w2", Intervention::single(a, a2))
            .unwrap()
            .query("w2", Assignment::from_pairs([(y, y2)]))
            .unwrap();
        assert!((scm.counterfactual_joint(&q).unwrap() - oracle).abs() < 1e-12);
    }
}

/// Compares the exact posterior with a rejection-sampling estimate, state by
/// state, at three standard errors.
fn check_posterior_by_rejection(scm: &DiscreteScm, iv: &Intervention, evidence: &Assignment, seed: u64) {
    let post = scm.posterior_over_noise(iv, evidence).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = noise_states(scm);
    let n = 100_000;
    let mut counts = vec![0u32; states.len()];
    let mut accepted = 0u32;
    for _ in 0..n {
        let noise: Vec<usize> = scm
            .exogenous()
            .iter()
            .map(|e| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                e.probs.iter().position(|&p| {
                    acc += p;
                    u < acc
                }).unwrap_or(e.probs.len() - 1)
            })
            .collect();
        let w = scm.evaluate_world(&noise, iv).unwrap();
        if evidence.matches(&w.endogenous) {
            accepted += 1;
            let i = states.iter().position(|(s, _)| *s == noise).unwrap();
            counts[i] += 1;
        }
    }
    assert!(accepted > 0);
    for (i, (s, _)) in states.iter().enumerate() {
        let p = post.prob(s);
        let est = counts[i] as f64 / accepted as f64;
        let se = (p * (1.0 - p) / accepted as f64).sqrt().max(1e-9);
        assert!((est - p).abs() <= 3.0 * se + 1e-12, "state {s:?}: {est} vs {p}");
    }
}

#[test]
fn posterior_matches_rejection_sampling() {
    let (scm, _) = treatment_model();
    let t = scm.var_index("T").unwrap();
    let y = scm.var_index("Y").unwrap();
    check_posterior_by_rejection(
        &scm,
        &Intervention::single(t, 1),
        &Assignment::from_pairs([(y, 1)]),
        14,
    );
}

#[test]
fn posterior_matches_rejection_sampling_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let cfg = RandomModelConfig { max_vars: 3, max_values: 2, ..Default::default() };
    for k in 0..5 {
        let (scm, _) = random_model(&mut rng, &cfg).unwrap();
        let a = rng.random_range(0..scm.action_domain_size());
        let iv = scm.do_action(a);
        let y = scm.roles().outcomes[0];
        // Observe the outcome value that is most likely under the action.
        let dist = scm.interventional_distribution(&iv, &Assignment::empty()).unwrap();
        let m = dist.marginal(&[y]);
        let (v, _) = m.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        check_posterior_by_rejection(&scm, &iv, &Assignment::from_pairs([(y, v[0])]), 100 + k);
    }
}
