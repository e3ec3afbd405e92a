//! Expected harm in heteroskedastic additive-noise models.
//!
//! The outcome under action `a` is `mu(a) + sum_k s_k(a) * eps_k` with the
//! `eps_k` independent standard normals shared by every intervention, and the
//! utility is the outcome itself. Harm relative to the default action `a0`
//! is then `E[max(0, -dU - Z)]` with `Z ~ N(0, s^2)`, which has a closed form.
//!
//! `erf`/`erfc` come from `libm`, a port of the FreeBSD msun routines
//! (rational approximations, under 1 ulp error on the real line).

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Name of the generator used by [`mc_expected_harm`], for output metadata.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha), one stream per shard";

/// Samples per Monte Carlo shard; shard `i` draws from stream `i` of the seed.
const MC_SHARD: u64 = 1 << 16;

/// Inputs of the closed form: the expected-utility gap to the default and
/// the standard deviation of the counterfactual utility difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmInputs {
    pub delta_u: f64,
    pub s: f64,
}

impl HarmInputs {
    pub fn new(delta_u: f64, s: f64) -> Result<Self> {
        if !delta_u.is_finite() || !s.is_finite() || s < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "harm inputs need finite dU and s >= 0, got dU={delta_u}, s={s}"
            )));
        }
        Ok(Self { delta_u, s })
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `s/sqrt(2 pi) exp(-dU^2 / 2 s^2) + dU/2 (erf(dU / (sqrt 2 s)) - 1)`,
/// and `max(0, -dU)` when `s = 0`.
///
/// The second term is evaluated as `-dU/2 erfc(...)`, which is the same
/// quantity without the cancellation of `erf(z) - 1` at large `z`.
pub fn closed_form_expected_harm(inputs: HarmInputs) -> f64 {
    let HarmInputs { delta_u, s } = inputs;
    if s == 0.0 {
        return (-delta_u).max(0.0);
    }
    let z = delta_u / s;
    let h = s * std_normal_pdf(z) - 0.5 * delta_u * libm::erfc(z * FRAC_1_SQRT_2);
    h.max(0.0)
}

/// Mirror image of the harm: `E[max(0, dU + Z)]`. Benefit minus harm is `dU`.
pub fn closed_form_expected_benefit(inputs: HarmInputs) -> f64 {
    let HarmInputs { delta_u, s } = inputs;
    if s == 0.0 {
        return delta_u.max(0.0);
    }
    let z = delta_u / s;
    let b = s * std_normal_pdf(z) + 0.5 * delta_u * libm::erfc(-z * FRAC_1_SQRT_2);
    b.max(0.0)
}

type ActionFn<A> = Arc<dyn Fn(&A) -> f64 + Send + Sync>;

/// A heteroskedastic additive-noise outcome model at a fixed context.
///
/// Scale coefficients may be negative; only their differences across actions
/// enter the harm.
#[derive(Clone)]
pub struct HetAnm<A> {
    mean: ActionFn<A>,
    scales: Vec<ActionFn<A>>,
    default_action: A,
}

impl<A: fmt::Debug> fmt::Debug for HetAnm<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HetAnm")
            .field("noise_terms", &self.scales.len())
            .field("default_action", &self.default_action)
            .finish()
    }
}

impl<A> HetAnm<A> {
    pub fn new(mean: impl Fn(&A) -> f64 + Send + Sync + 'static, default_action: A) -> Self {
        Self {
            mean: Arc::new(mean),
            scales: Vec::new(),
            default_action,
        }
    }

    /// Adds a shared standard-normal noise term with coefficient `s(a)`.
    pub fn with_noise(mut self, scale: impl Fn(&A) -> f64 + Send + Sync + 'static) -> Self {
        self.scales.push(Arc::new(scale));
        self
    }

    pub fn default_action(&self) -> &A {
        &self.default_action
    }

    pub fn noise_terms(&self) -> usize {
        self.scales.len()
    }

    pub fn mean(&self, a: &A) -> f64 {
        (self.mean)(a)
    }

    pub fn scale_coefficients(&self, a: &A) -> Vec<f64> {
        self.scales.iter().map(|s| s(a)).collect()
    }

    /// Outcome variance, `sum_k s_k(a)^2`.
    pub fn variance(&self, a: &A) -> f64 {
        self.scales.iter().map(|s| s(a).powi(2)).sum()
    }

    /// Coefficient differences `s_k(a0) - s_k(a)`.
    fn diff_coefficients(&self, a: &A) -> Vec<f64> {
        self.scales
            .iter()
            .map(|s| s(&self.default_action) - s(a))
            .collect()
    }

    /// `sqrt(sum_k (s_k(a0) - s_k(a))^2)`.
    pub fn counterfactual_diff_std(&self, a: &A) -> f64 {
        self.diff_coefficients(a)
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }

    pub fn harm_inputs(&self, a: &A) -> Result<HarmInputs> {
        HarmInputs::new(
            self.mean(a) - self.mean(&self.default_action),
            self.counterfactual_diff_std(a),
        )
    }

    pub fn expected_harm(&self, a: &A) -> Result<f64> {
        self.harm_inputs(a).map(closed_form_expected_harm)
    }

    pub fn expected_benefit(&self, a: &A) -> Result<f64> {
        self.harm_inputs(a).map(closed_form_expected_benefit)
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.std_error
    }
}

/// Sample average of `f(eps)` over `n` draws of `dims` i.i.d. standard
/// normals, sharded so the result depends only on `(seed, n)`.
pub fn mc_mean(dims: usize, n: u64, seed: u64, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let shards = n.div_ceil(MC_SHARD);
    let parts: Vec<(f64, f64)> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let count = MC_SHARD.min(n - shard * MC_SHARD);
            let mut eps = vec![0.0; dims];
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..count {
                for e in eps.iter_mut() {
                    *e = StandardNormal.sample(&mut rng);
                }
                let v = f(&eps);
                sum += v;
                sq += v * v;
            }
            (sum, sq)
        })
        .collect();
    let (sum, sq) = parts
        .into_iter()
        .fold((0.0, 0.0), |(s, q), (s2, q2)| (s + s2, q + q2));
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / nf).sqrt(),
        samples: n,
    })
}

/// Monte Carlo expected harm: the average of
/// `max(0, sum_k eps_k (s_k(a0) - s_k(a)) - dU)`.
pub fn mc_expected_harm<A>(model: &HetAnm<A>, action: &A, n: u64, seed: u64) -> Result<McEstimate> {
    let du = model.mean(action) - model.mean(model.default_action());
    let diffs = model.diff_coefficients(action);
    mc_mean(diffs.len(), n, seed, |eps| {
        let z: f64 = eps.iter().zip(&diffs).map(|(e, d)| e * d).sum();
        (z - du).max(0.0)
    })
}

/// Monte Carlo expected benefit, `max(0, dU - sum_k eps_k (s_k(a0) - s_k(a)))`.
pub fn mc_expected_benefit<A>(model: &HetAnm<A>, action: &A, n: u64, seed: u64) -> Result<McEstimate> {
    let du = model.mean(action) - model.mean(model.default_action());
    let diffs = model.diff_coefficients(action);
    mc_mean(diffs.len(), n, seed, |eps| {
        let z: f64 = eps.iter().zip(&diffs).map(|(e, d)| e * d).sum();
        (du - z).max(0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(du: f64, s: f64) -> f64 {
        closed_form_expected_harm(HarmInputs::new(du, s).unwrap())
    }

    #[test]
    fn reference_values() {
        assert!((h(1.0, 1.0) - 0.08332).abs() < 5e-6);
        assert!((h(0.0, 1.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(h(2.0, 0.0), 0.0);
        assert_eq!(h(-2.0, 0.0), 2.0);
        assert!((h(-20.0, 100.0) - 50.69).abs() < 5e-3);
    }

    #[test]
    fn invalid_inputs() {
        assert!(HarmInputs::new(1.0, -1.0).is_err());
        assert!(HarmInputs::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn benefit_minus_harm_is_delta_u() {
        for &du in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            for &s in &[0.0, 0.3, 1.0, 5.0] {
                let i = HarmInputs::new(du, s).unwrap();
                let d = closed_form_expected_benefit(i) - closed_form_expected_harm(i);
                assert!((d - du).abs() < 1e-12, "du={du} s={s}");
            }
        }
    }

    #[test]
    fn diff_std_and_zero_harm_for_identical_scales() {
        let m = HetAnm::new(|a: &f64| 2.0 * a, 0.0)
            .with_noise(|a: &f64| 1.0 + a)
            .with_noise(|_: &f64| 3.0);
        assert_eq!(m.counterfactual_diff_std(&2.0), 2.0);
        assert_eq!(m.counterfactual_diff_std(&0.0), 0.0);

        let same = HetAnm::new(|a: &f64| *a, 0.0).with_noise(|_: &f64| 4.0);
        let est = mc_expected_harm(&same, &1.5, 1000, 7).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn single_noise_recovers_abs_sigma_difference() {
        let m = HetAnm::new(|_: &f64| 0.0, 1.0).with_noise(|a: &f64| 3.0 * a);
        assert_eq!(m.counterfactual_diff_std(&4.0), 9.0);
        assert_eq!(m.counterfactual_diff_std(&-1.0), 6.0);
    }

    #[test]
    fn mc_is_reproducible_and_rejects_zero_samples() {
        let m = HetAnm::new(|a: &f64| *a, 0.0).with_noise(|a: &f64| *a);
        let a = mc_expected_harm(&m, &1.0, 200_000, 11).unwrap();
        let b = mc_expected_harm(&m, &1.0, 200_000, 11).unwrap();
        assert_eq!(a, b);
        assert!(mc_expected_harm(&m, &1.0, 0, 11).is_err());
        let one = mc_expected_harm(&m, &1.0, 1, 11).unwrap();
        assert_eq!(one.std_error, 0.0);
    }
}
