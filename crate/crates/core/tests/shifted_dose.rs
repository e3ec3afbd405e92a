//! The shifted dose model: risk aversion should pick a dose above the
//! utility-maximizing one that is needlessly harmful, while every
//! harm-averse agent keeps the utility-maximizing dose.
//!
//! With the default parameters neither half holds; this test is expected
//! to fail (see README, "Known deviations").

use harmcalc_core::dose::{shifted_model_analysis, DoseGrid, GamParams};

#[test]
fn risk_aversion_is_harmful_in_the_shifted_dose_model() {
    let r = shifted_model_analysis(
        &GamParams::default(),
        &[0.001, 0.01, 0.1],
        &[1.0, 10.0, 100.0],
        &DoseGrid::default(),
    )
    .unwrap();
    for h in &r.hpu {
        println!("λ={}: HPU dose {} (μ argmax {})", h.lambda, h.dose, r.mu_argmax);
    }
    for x in &r.risk_averse {
        println!(
            "β={}: risk-averse dose {}, dominated by {:?} (μ argmax {})",
            x.beta, x.dose, x.dominated_by, r.mu_argmax
        );
    }
    assert_eq!(r.hpu_exceptions(), 0, "HPU argmax differs from the μ argmax");
    assert_eq!(r.risk_averse_exceptions(), 0, "risk-averse dose is not above the μ argmax");
}
