use harmcalc_core::dose::{
    dose_mean_and_sigma, dose_model, dose_sweep, expected_harm_dose, shifted_dose_model, spline_f,
    DoseGrid, GamParams,
};
use harmcalc_core::hetanm::{closed_form_expected_harm, mc_expected_harm, HarmInputs, HetAnm};
use harmcalc_core::zoo::{Agent, AssistantAction, AssistantSpec};

/// `E[max(0, -(du + s Z))]` by composite Simpson on [-12, 12].
fn harm_by_quadrature(du: f64, s: f64) -> f64 {
    let n = 200_000;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / n as f64;
    let f = |z: f64| {
        (-(du + s * z)).max(0.0) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn closed_form_matches_quadrature() {
    for &(du, s) in &[(1.0, 1.0), (-1.0, 1.0), (0.0, 2.0), (2.5, 0.3), (-0.7, 4.0)] {
        let exact = closed_form_expected_harm(HarmInputs::new(du, s).unwrap());
        assert!((exact - harm_by_quadrature(du, s)).abs() < 1e-8, "{du} {s}");
    }
}

#[test]
fn closed_form_is_monotone_on_a_grid() {
    let h = |du: f64, s: f64| closed_form_expected_harm(HarmInputs::new(du, s).unwrap());
    for i in 0..40 {
        let s = 0.1 + 0.1 * i as f64;
        for k in 0..60 {
            let du = -3.0 + 0.1 * k as f64;
            // In either tail the change drops below an ulp of the value.
            assert!(h(du + 0.1, s) <= h(du, s) + 1e-15);
            assert!(h(du, s + 0.1) >= h(du, s) - 1e-15);
            if (du / s).abs() <= 5.0 {
                assert!(h(du + 0.1, s) < h(du, s) && h(du, s + 0.1) > h(du, s));
            }
        }
    }
}

#[test]
fn degenerate_scale_is_the_rectified_gap() {
    for du in [-2.0, -0.5, 0.0, 0.5, 2.0] {
        let h = closed_form_expected_harm(HarmInputs::new(du, 0.0).unwrap());
        assert_eq!(h, (-du).max(0.0));
    }
}

#[test]
fn two_noise_terms_combine_in_quadrature() {
    let m = HetAnm::new(|a: &bool| if *a { 1.0 } else { 0.0 }, false)
        .with_noise(|a: &bool| if *a { 3.0 } else { 0.0 })
        .with_noise(|a: &bool| if *a { 4.0 } else { 0.0 });
    assert_eq!(m.counterfactual_diff_std(&true), 5.0);
    let exact = m.expected_harm(&true).unwrap();
    assert!((exact - closed_form_expected_harm(HarmInputs::new(1.0, 5.0).unwrap())).abs() < 1e-15);
    let est = mc_expected_harm(&m, &true, 1_000_000, 5).unwrap();
    assert!(est.agrees_with(exact, 3.0), "{est:?} vs {exact}");
}

#[test]
fn monte_carlo_is_deterministic_per_seed() {
    let m = HetAnm::new(|a: &bool| if *a { 0.2 } else { 0.0 }, false).with_noise(|a: &bool| *a as u8 as f64);
    let a = mc_expected_harm(&m, &true, 200_000, 9).unwrap();
    let b = mc_expected_harm(&m, &true, 200_000, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn spline_is_twice_differentiable_at_the_knots() {
    let p = GamParams::default();
    let eps = 1e-4;
    for k in p.knots {
        let d_left = (spline_f(k, &p) - spline_f(k - eps, &p)) / eps;
        let d_right = (spline_f(k + eps, &p) - spline_f(k, &p)) / eps;
        assert!((d_left - d_right).abs() < 1e-3, "first derivative at {k}");
        let dd = |x: f64| (spline_f(x + eps, &p) - 2.0 * spline_f(x, &p) + spline_f(x - eps, &p)) / (eps * eps);
        assert!((dd(k - 2.0 * eps) - dd(k + 2.0 * eps)).abs() < 1e-2, "second derivative at {k}");
    }
    // Linear beyond the last knot.
    let d = |x: f64| spline_f(x + 1.0, &p) - spline_f(x, &p);
    assert!((d(35.0) - d(50.0)).abs() < 1e-9);
}

#[test]
fn dose_harm_agrees_with_monte_carlo_at_twenty() {
    let p = GamParams::default();
    let est = mc_expected_harm(&dose_model(&p), &20.0, 1_000_000, 3).unwrap();
    assert!(est.agrees_with(expected_harm_dose(20.0, &p), 3.0));
    let (mu, g) = dose_mean_and_sigma(20.0, &p);
    let direct = closed_form_expected_harm(HarmInputs::new(mu, g).unwrap());
    assert!((direct - expected_harm_dose(20.0, &p)).abs() < 1e-15);
}

#[test]
fn optimal_dose_falls_with_harm_aversion() {
    let t = dose_sweep(&GamParams::default(), &DoseGrid::default(), &[0.0, 1.0, 10.0, 100.0]).unwrap();
    let doses: Vec<f64> = (0..4).map(|j| t.argmax(j).dose).collect();
    assert!(doses.windows(2).all(|w| w[0] >= w[1]), "{doses:?}");
}

#[test]
fn shifted_model_adds_a_shared_noise_term() {
    let p = GamParams::default();
    let (base, shifted) = (dose_model(&p), shifted_dose_model(&p));
    for a in [5.0, 19.3, 25.0] {
        assert_eq!(base.mean(&a), shifted.mean(&a));
        let extra = (10.0 - 0.5 * a) - 10.0;
        let s2 = base.counterfactual_diff_std(&a).powi(2) + extra * extra;
        assert!((shifted.counterfactual_diff_std(&a).powi(2) - s2).abs() < 1e-9);
    }
}

#[test]
fn harm_averse_assistant_never_cancels_or_loses_return() {
    let spec = AssistantSpec::default();
    for i in 0..=4000 {
        let d = spec.decide(Agent::HarmAverse(i as f64 * 0.025)).unwrap();
        assert_ne!(d.action, AssistantAction::Cancel);
        assert!(d.expected_return >= spec.mean);
    }
}

#[test]
fn risk_averse_switch_sits_at_the_cancel_threshold() {
    let spec = AssistantSpec::default();
    let t = spec.risk_averse_cancel_threshold();
    // mu^2 / (4 principal sigma^2)
    assert!((t - 100.0f64.powi(2) / (4.0 * 80.0 * 100.0f64.powi(2))).abs() < 1e-15);
    let below = spec.decide(Agent::RiskAverse(t * 0.99)).unwrap();
    let above = spec.decide(Agent::RiskAverse(t * 1.01)).unwrap();
    assert!(matches!(below.action, AssistantAction::Scale(_)));
    assert_eq!(above.action, AssistantAction::Cancel);
}
