//! Aripiprazole dose-response: a restricted cubic spline mean with Gaussian
//! random effects on both slopes, harm-aware dosing and the trade-off between
//! symptom improvement and harm.
//!
//! The default policy is zero dose. Utility is the PANSS reduction itself.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::{sig12, write_metadata};
use crate::hetanm::HetAnm;

/// Random-effects GAM parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GamParams {
    pub theta1: f64,
    pub theta2: f64,
    /// Variance of the linear slope.
    pub v1: f64,
    /// Variance of the spline slope.
    pub v2: f64,
    /// Sample-noise variance. Cancels in the harm; only the risk-averse
    /// variance of the shifted model uses it.
    pub v0: f64,
    pub knots: [f64; 3],
}

impl Default for GamParams {
    fn default() -> Self {
        Self {
            theta1: 0.937,
            theta2: -1.156,
            v1: 0.03,
            v2: 0.10,
            v0: 0.0,
            knots: [0.0, 10.0, 30.0],
        }
    }
}

impl GamParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta1, self.theta2, self.v1, self.v2, self.v0]
            .iter()
            .chain(&self.knots)
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("GAM parameters must be finite".into()));
        }
        if self.v0 < 0.0 || self.v1 < 0.0 || self.v2 < 0.0 {
            return Err(Error::InvalidArgument("variances must be >= 0".into()));
        }
        let [k1, k2, k3] = self.knots;
        if !(k1 < k2 && k2 < k3) {
            return Err(Error::InvalidArgument(format!(
                "knots must be strictly increasing, got {k1}, {k2}, {k3}"
            )));
        }
        Ok(())
    }
}

fn cube_plus(u: f64) -> f64 {
    if u > 0.0 {
        u * u * u
    } else {
        0.0
    }
}

/// Restricted cubic spline basis term; linear beyond the last knot.
pub fn spline_f(a: f64, p: &GamParams) -> f64 {
    let [k1, k2, k3] = p.knots;
    (cube_plus(a - k1) - (k3 - k1) / (k3 - k2) * cube_plus(a - k2)
        + (k2 - k1) / (k3 - k2) * cube_plus(a - k3))
        / ((k3 - k1) * (k3 - k1))
}

/// Mean improvement and random-effects scale `g(a) = sqrt(a^2 V1 + f(a)^2 V2)`.
pub fn dose_mean_and_sigma(a: f64, p: &GamParams) -> (f64, f64) {
    let f = spline_f(a, p);
    (
        p.theta1 * a + p.theta2 * f,
        (a * a * p.v1 + f * f * p.v2).sqrt(),
    )
}

/// The dose response as an additive-noise model: one shared standard normal
/// per random slope, default dose 0.
pub fn dose_model(p: &GamParams) -> HetAnm<f64> {
    let (pm, p1, p2) = (*p, *p, *p);
    HetAnm::new(move |a: &f64| dose_mean_and_sigma(*a, &pm).0, 0.0)
        .with_noise(move |a: &f64| a * p1.v1.sqrt())
        .with_noise(move |a: &f64| spline_f(*a, &p2) * p2.v2.sqrt())
}

/// Coefficient of the extra noise term of the shifted environment.
pub fn shift_noise_coefficient(a: f64) -> f64 {
    10.0 - 0.5 * a
}

/// [`dose_model`] with the additional shared noise term `(10 - 0.5 a) eta`.
pub fn shifted_dose_model(p: &GamParams) -> HetAnm<f64> {
    dose_model(p).with_noise(|a: &f64| shift_noise_coefficient(*a))
}

/// Expected harm of dose `a` relative to no treatment.
pub fn expected_harm_dose(a: f64, p: &GamParams) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    dose_model(p)
        .expected_harm(&a)
        .expect("dose model has finite mean and scale")
}

/// Evenly spaced doses `min, min + step, ..., <= max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoseGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for DoseGrid {
    fn default() -> Self {
        Self {
            min: 0.0,
            max: 30.0,
            step: 0.1,
        }
    }
}

impl DoseGrid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && step.is_finite()) {
            return Err(Error::InvalidArgument("dose grid must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::InvalidArgument(format!("dose step must be > 0, got {step}")));
        }
        if min < 0.0 || max < min {
            return Err(Error::InvalidArgument(format!(
                "dose range must satisfy 0 <= min <= max, got {min}:{max}"
            )));
        }
        Ok(Self { min, max, step })
    }

    /// Parses `min:max:step`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!("expected min:max:step, got `{s}`")));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("`{t}` is not a number")))
        };
        Self::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Doses are computed as `min + i * step` so that grid points do not
    /// accumulate rounding error.
    pub fn dose(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    pub fn doses(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.dose(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoseRow {
    pub dose: f64,
    pub expected_utility: f64,
    pub expected_harm: f64,
    /// One entry per λ of the enclosing table.
    pub hpu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoseTable {
    pub grid: DoseGrid,
    pub lambdas: Vec<f64>,
    pub rows: Vec<DoseRow>,
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if let Some(l) = lambdas.iter().find(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument(format!("λ must be finite, got {l}")));
    }
    Ok(())
}

/// First index of the maximum; later entries must beat it strictly.
fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Evaluates utility, harm and HPU on every grid dose, in parallel, in dose order.
pub fn dose_sweep(p: &GamParams, grid: &DoseGrid, lambdas: &[f64]) -> Result<DoseTable> {
    p.validate()?;
    check_lambdas(lambdas)?;
    let rows = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let a = grid.dose(i);
            let (mu, _) = dose_mean_and_sigma(a, p);
            let h = expected_harm_dose(a, p);
            DoseRow {
                dose: a,
                expected_utility: mu,
                expected_harm: h,
                hpu: lambdas.iter().map(|l| mu - l * h).collect(),
            }
        })
        .collect();
    Ok(DoseTable {
        grid: *grid,
        lambdas: lambdas.to_vec(),
        rows,
    })
}

impl DoseTable {
    /// Row maximizing the HPU for the `j`-th λ; ties go to the lower dose.
    pub fn argmax(&self, j: usize) -> &DoseRow {
        &self.rows[argmax_first(self.rows.iter().map(|r| r.hpu[j]))]
    }

    /// Row maximizing expected utility.
    pub fn utility_argmax(&self) -> &DoseRow {
        &self.rows[argmax_first(self.rows.iter().map(|r| r.expected_utility))]
    }

    pub fn write_csv<W: Write>(&self, w: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
        write_metadata(w, meta)?;
        write!(w, "dose,expected_utility,expected_harm")?;
        for l in &self.lambdas {
            write!(w, ",hpu_lambda_{}", sig12(*l))?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(
                w,
                "{},{},{}",
                sig12(r.dose),
                sig12(r.expected_utility),
                sig12(r.expected_harm)
            )?;
            for v in &r.hpu {
                write!(w, ",{}", sig12(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// HPU-optimal dose on the grid.
pub fn optimal_dose(lambda: f64, p: &GamParams, grid: &DoseGrid) -> Result<f64> {
    Ok(dose_sweep(p, grid, &[lambda])?.argmax(0).dose)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffRow {
    pub dose: f64,
    pub relative_harm: f64,
    pub relative_utility: f64,
}

/// Harm and utility of every dose up to the utility-maximizing dose
/// `a_max`, each relative to their values at `a_max`.
pub fn tradeoff_curve(p: &GamParams, grid: &DoseGrid) -> Result<Vec<TradeoffRow>> {
    let table = dose_sweep(p, grid, &[])?;
    let best = table.utility_argmax().clone();
    if best.expected_harm <= 0.0 || best.expected_utility <= 0.0 {
        return Err(Error::InvalidArgument(
            "trade-off needs positive harm and utility at the optimal dose".into(),
        ));
    }
    Ok(table
        .rows
        .iter()
        .filter(|r| r.dose <= best.dose)
        .map(|r| TradeoffRow {
            dose: r.dose,
            relative_harm: r.expected_harm / best.expected_harm,
            relative_utility: r.expected_utility / best.expected_utility,
        })
        .collect())
}

/// Best relative utility among curve points that cut harm by at least
/// `reduction` (e.g. 0.9 for 90%).
pub fn utility_at_harm_reduction(curve: &[TradeoffRow], reduction: f64) -> Option<TradeoffRow> {
    curve
        .iter()
        .filter(|r| r.relative_harm <= 1.0 - reduction)
        .copied()
        .fold(None, |best: Option<TradeoffRow>, r| match best {
            Some(b) if b.relative_utility >= r.relative_utility => Some(b),
            _ => Some(r),
        })
}

pub fn write_tradeoff_csv<W: Write>(
    w: &mut W,
    curve: &[TradeoffRow],
    meta: &[(&str, String)],
) -> io::Result<()> {
    write_metadata(w, meta)?;
    writeln!(w, "dose,relative_harm,relative_utility")?;
    for r in curve {
        writeln!(
            w,
            "{},{},{}",
            sig12(r.dose),
            sig12(r.relative_harm),
            sig12(r.relative_utility)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedHpuRow {
    pub lambda: f64,
    pub dose: f64,
    pub matches_mu_argmax: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskAverseRow {
    pub beta: f64,
    pub dose: f64,
    pub expected_utility: f64,
    pub expected_harm: f64,
    pub exceeds_mu_argmax: bool,
    /// A grid dose with no less expected utility and strictly less harm.
    pub dominated_by: Option<f64>,
}

/// Outcome of the shifted-environment analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedReport {
    pub mu_argmax: f64,
    pub mu_argmax_harm: f64,
    pub hpu: Vec<ShiftedHpuRow>,
    pub risk_averse: Vec<RiskAverseRow>,
}

impl ShiftedReport {
    pub fn hpu_exceptions(&self) -> usize {
        self.hpu.iter().filter(|r| !r.matches_mu_argmax).count()
    }

    pub fn risk_averse_exceptions(&self) -> usize {
        self.risk_averse
            .iter()
            .filter(|r| !(r.exceeds_mu_argmax && r.dominated_by.is_some()))
            .count()
    }

    pub fn holds(&self) -> bool {
        self.hpu_exceptions() == 0 && self.risk_averse_exceptions() == 0
    }

    /// One row per λ (`objective=hpu`) and per β (`objective=risk_averse`).
    pub fn write_csv<W: Write>(&self, w: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
        write_metadata(w, meta)?;
        writeln!(w, "# mu_argmax={}", sig12(self.mu_argmax))?;
        writeln!(w, "objective,parameter,dose,matches_mu_argmax,exceeds_mu_argmax,dominated_by")?;
        for r in &self.hpu {
            writeln!(
                w,
                "hpu,{},{},{},{},",
                sig12(r.lambda),
                sig12(r.dose),
                r.matches_mu_argmax,
                r.dose > self.mu_argmax
            )?;
        }
        for r in &self.risk_averse {
            writeln!(
                w,
                "risk_averse,{},{},{},{},{}",
                sig12(r.beta),
                sig12(r.dose),
                r.dose == self.mu_argmax,
                r.exceeds_mu_argmax,
                r.dominated_by.map(sig12).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// Compares harm-averse and risk-averse dosing in the environment where the
/// outcome gains the extra noise term `(10 - 0.5 a) eta`.
///
/// Harm uses the shifted model's counterfactual difference scale
/// `sqrt(g(a)^2 + (0.5 a)^2)`; the risk-averse objective is
/// `mu(a) - beta (g(a)^2 + (10 - 0.5 a)^2 + V0)`.
pub fn shifted_model_analysis(
    p: &GamParams,
    betas: &[f64],
    lambdas: &[f64],
    grid: &DoseGrid,
) -> Result<ShiftedReport> {
    p.validate()?;
    check_lambdas(lambdas)?;
    check_lambdas(betas)?;
    let model = shifted_dose_model(p);
    let doses = grid.doses();
    let rows: Vec<(f64, f64, f64)> = doses
        .par_iter()
        .map(|&a| {
            let mu = model.mean(&a);
            let h = model.expected_harm(&a)?;
            Ok((mu, h, model.variance(&a) + p.v0))
        })
        .collect::<Result<_>>()?;

    let mu_idx = argmax_first(rows.iter().map(|r| r.0));
    let hpu = lambdas
        .iter()
        .map(|&l| {
            let i = argmax_first(rows.iter().map(|r| r.0 - l * r.1));
            ShiftedHpuRow {
                lambda: l,
                dose: doses[i],
                matches_mu_argmax: i == mu_idx,
            }
        })
        .collect();
    let risk_averse = betas
        .iter()
        .map(|&b| {
            let i = argmax_first(rows.iter().map(|r| r.0 - b * r.2));
            let (mu, h, _) = rows[i];
            let dominated_by = rows
                .iter()
                .position(|r| r.0 >= mu - 1e-12 && r.1 < h)
                .map(|j| doses[j]);
            RiskAverseRow {
                beta: b,
                dose: doses[i],
                expected_utility: mu,
                expected_harm: h,
                exceeds_mu_argmax: i > mu_idx,
                dominated_by,
            }
        })
        .collect();
    Ok(ShiftedReport {
        mu_argmax: doses[mu_idx],
        mu_argmax_harm: rows[mu_idx].1,
        hpu,
        risk_averse,
    })
}
