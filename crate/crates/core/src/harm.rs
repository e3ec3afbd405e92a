//! Counterfactual harm and benefit relative to the model's default policy,
//! the harm-penalized utility (HPU) decision rule, and the "needlessly
//! harmful" / "harmful objective" predicates.
//!
//! Harm of action `a` with factual outcome `y` in context `x` is the expected
//! positive utility gap to the counterfactual world in which the default
//! policy acted instead, with the noise posterior taken from the factual
//! world. Expected harm averages that over `P(y_a | x)`; the same quantity is
//! available as a single sum over noise states, and both routes are exposed
//! so they can be checked against each other.

use crate::error::{Error, Result};
use crate::scm::{product_space, radix_of, Assignment, DiscreteScm, Intervention};

/// Slack used on the "at least as much utility" side of comparisons.
pub const UTILITY_SLACK: f64 = 1e-12;

/// Dimensions of a table over action x context x outcome joint values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableShape {
    pub actions: usize,
    pub context_radix: Vec<usize>,
    pub outcome_radix: Vec<usize>,
}

impl TableShape {
    pub fn of(scm: &DiscreteScm) -> Self {
        let roles = scm.roles();
        Self {
            actions: scm.action_domain_size(),
            context_radix: radix_of(scm.variables(), &roles.context),
            outcome_radix: radix_of(scm.variables(), &roles.outcomes),
        }
    }

    pub fn len(&self) -> usize {
        self.actions * self.contexts() * self.outcomes()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contexts(&self) -> usize {
        self.context_radix.iter().product()
    }

    pub fn outcomes(&self) -> usize {
        self.outcome_radix.iter().product()
    }

    fn flat(radix: &[usize], values: &[usize]) -> usize {
        radix.iter().zip(values).fold(0, |acc, (&r, &v)| acc * r + v)
    }

    pub fn index(&self, a: usize, x: &[usize], y: &[usize]) -> usize {
        let xi = Self::flat(&self.context_radix, x);
        let yi = Self::flat(&self.outcome_radix, y);
        (a * self.contexts() + xi) * self.outcomes() + yi
    }
}

/// `U(a, x, y)`, total over the model's action, context and outcome domains.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    shape: TableShape,
    values: Vec<f64>,
}

impl UtilityTable {
    pub fn from_fn(scm: &DiscreteScm, f: impl Fn(usize, &[usize], &[usize]) -> f64) -> Result<Self> {
        let shape = TableShape::of(scm);
        let mut values = Vec::with_capacity(shape.len());
        let xs = product_space(&shape.context_radix);
        let ys = product_space(&shape.outcome_radix);
        for a in 0..shape.actions {
            for x in &xs {
                for y in &ys {
                    values.push(f(a, x, y));
                }
            }
        }
        Self::from_values(shape, values)
    }

    /// Values in row-major action, context, outcome order.
    pub fn from_values(shape: TableShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Table(format!(
                "{} values for a table of {} entries",
                values.len(),
                shape.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Table(format!("non-finite entry {v}")));
        }
        Ok(Self { shape, values })
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, a: usize, x: &[usize], y: &[usize]) -> f64 {
        self.values[self.shape.index(a, x, y)]
    }

    /// `min_y U(a, x, y)` and `max_y U(a, x, y)`.
    pub fn range(&self, a: usize, x: &[usize]) -> (f64, f64) {
        product_space(&self.shape.outcome_radix)
            .iter()
            .map(|y| self.get(a, x, y))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| {
                (lo.min(u), hi.max(u))
            })
    }
}

/// A factual objective `J(a, x, y)`, shaped like a [`UtilityTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct Objective(UtilityTable);

impl Objective {
    pub fn new(table: UtilityTable) -> Self {
        Self(table)
    }

    pub fn from_fn(scm: &DiscreteScm, f: impl Fn(usize, &[usize], &[usize]) -> f64) -> Result<Self> {
        UtilityTable::from_fn(scm, f).map(Self)
    }

    pub fn table(&self) -> &UtilityTable {
        &self.0
    }

    /// `E[J | a, x] = sum_y P(y_a | x) J(a, x, y)`.
    pub fn expected(&self, scm: &DiscreteScm, a: usize, x: &[usize]) -> Result<f64> {
        let ctx = scm.context_assignment(x);
        let d = scm.interventional_distribution(&scm.do_action(a), &ctx)?;
        Ok(d.expectation(|w| self.0.get(a, x, &scm.outcome_values(w))))
    }
}

/// Expected quantities for one action in one context.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionStats {
    pub action: usize,
    pub expected_utility: f64,
    pub expected_harm: f64,
    pub expected_benefit: f64,
    pub hpu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmReport {
    pub context: Vec<usize>,
    pub lambda: f64,
    /// `E[U | x]` under the default policy.
    pub default_expected_utility: f64,
    pub actions: Vec<ActionStats>,
}

impl HarmReport {
    /// `|(E[U_a|x] - E[U|x]) - (E[b|a,x] - E[h|a,x])|`.
    pub fn decomposition_residual(&self, a: usize) -> f64 {
        let s = &self.actions[a];
        ((s.expected_utility - self.default_expected_utility)
            - (s.expected_benefit - s.expected_harm))
            .abs()
    }

    pub fn max_residual(&self) -> f64 {
        (0..self.actions.len())
            .map(|a| self.decomposition_residual(a))
            .fold(0.0, f64::max)
    }
}

/// Outcome of evaluating an objective for harmfulness.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveVerdict {
    /// `(action, E[J | a, x])` for every candidate action.
    pub expected_objective: Vec<(usize, f64)>,
    pub maximizers: Vec<usize>,
    /// A maximizer that is needlessly harmful, with the action that dominates it.
    pub witness: Option<(usize, usize)>,
}

impl ObjectiveVerdict {
    pub fn is_harmful(&self) -> bool {
        self.witness.is_some()
    }
}

/// Harm computations for one model and utility function.
#[derive(Debug, Clone, Copy)]
pub struct HarmEngine<'a> {
    scm: &'a DiscreteScm,
    util: &'a UtilityTable,
}

impl<'a> HarmEngine<'a> {
    pub fn new(scm: &'a DiscreteScm, util: &'a UtilityTable) -> Result<Self> {
        if *util.shape() != TableShape::of(scm) {
            return Err(Error::Table("utility table shape does not match the model".into()));
        }
        Ok(Self { scm, util })
    }

    pub fn scm(&self) -> &'a DiscreteScm {
        self.scm
    }

    pub fn utility(&self) -> &'a UtilityTable {
        self.util
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.scm.action_domain_size() {
            return Err(Error::InvalidArgument(format!("action #{a} is out of range")));
        }
        Ok(())
    }

    fn check_context(&self, x: &[usize]) -> Result<()> {
        let radix = &self.util.shape().context_radix;
        if x.len() != radix.len() || x.iter().zip(radix).any(|(&v, &r)| v >= r) {
            return Err(Error::InvalidArgument("malformed context".into()));
        }
        Ok(())
    }

    /// Harm and benefit of `a` given factual outcome `y` in context `x`.
    pub fn harm_and_benefit(&self, a: usize, x: &[usize], y: &[usize]) -> Result<(f64, f64)> {
        self.check_action(a)?;
        self.check_context(x)?;
        let scm = self.scm;
        let outcomes = &scm.roles().outcomes;
        if y.len() != outcomes.len() {
            return Err(Error::InvalidArgument("malformed outcome".into()));
        }
        let evidence = scm
            .context_assignment(x)
            .merged(&Assignment::from_pairs(outcomes.iter().copied().zip(y.iter().copied())))
            .expect("context and outcome variables are disjoint");
        let posterior = scm.posterior_over_noise(&scm.do_action(a), &evidence)?;
        let factual = self.util.get(a, x, y);
        let action = scm.action();
        let clamps = scm.clamps(&Intervention::none());
        let mut w = vec![0; scm.variables().len()];
        let (mut harm, mut benefit) = (0.0, 0.0);
        for (noise, p) in &posterior.states {
            scm.eval_into(noise, &clamps, &mut w);
            let counter = self.util.get(w[action], x, &scm.outcome_values(&w));
            harm += p * (counter - factual).max(0.0);
            benefit += p * (factual - counter).max(0.0);
        }
        Ok((harm, benefit))
    }

    pub fn harm(&self, a: usize, x: &[usize], y: &[usize]) -> Result<f64> {
        self.harm_and_benefit(a, x, y).map(|(h, _)| h)
    }

    pub fn benefit(&self, a: usize, x: &[usize], y: &[usize]) -> Result<f64> {
        self.harm_and_benefit(a, x, y).map(|(_, b)| b)
    }

    /// Expected utility, harm and benefit for every action, plus the default
    /// policy's expected utility, in one pass over the noise posterior.
    pub fn report(&self, x: &[usize], lambda: f64) -> Result<HarmReport> {
        self.check_context(x)?;
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument("lambda must be finite".into()));
        }
        let scm = self.scm;
        let n_actions = scm.action_domain_size();
        let ctx = scm.context_assignment(x);
        let action = scm.action();
        let default_clamps = scm.clamps(&Intervention::none());
        let action_clamps: Vec<_> = (0..n_actions).map(|a| scm.clamps(&scm.do_action(a))).collect();
        let n_vars = scm.variables().len();
        // layout: [mass, E[U], then (E[U_a], E[h], E[b]) per action]
        let acc = scm.reduce_noise(
            || vec![0.0; 2 + 3 * n_actions],
            |acc, noise, p| {
                let mut w = vec![0; n_vars];
                scm.eval_into(noise, &default_clamps, &mut w);
                if !ctx.matches(&w) {
                    return;
                }
                let u0 = self.util.get(w[action], x, &scm.outcome_values(&w));
                acc[0] += p;
                acc[1] += p * u0;
                for (a, clamps) in action_clamps.iter().enumerate() {
                    scm.eval_into(noise, clamps, &mut w);
                    let ua = self.util.get(a, x, &scm.outcome_values(&w));
                    acc[2 + 3 * a] += p * ua;
                    acc[3 + 3 * a] += p * (u0 - ua).max(0.0);
                    acc[4 + 3 * a] += p * (ua - u0).max(0.0);
                }
            },
            |acc, other| acc.iter_mut().zip(other).for_each(|(s, o)| *s += o),
        );
        let mass = acc[0];
        if mass <= 0.0 {
            return Err(Error::ZeroProbability(scm.describe(&ctx)));
        }
        let actions = (0..n_actions)
            .map(|a| {
                let eu = acc[2 + 3 * a] / mass;
                let h = acc[3 + 3 * a] / mass;
                ActionStats {
                    action: a,
                    expected_utility: eu,
                    expected_harm: h,
                    expected_benefit: acc[4 + 3 * a] / mass,
                    hpu: eu - lambda * h,
                }
            })
            .collect();
        Ok(HarmReport {
            context: x.to_vec(),
            lambda,
            default_expected_utility: acc[1] / mass,
            actions,
        })
    }

    pub fn expected_harm(&self, a: usize, x: &[usize]) -> Result<f64> {
        self.check_action(a)?;
        Ok(self.report(x, 0.0)?.actions[a].expected_harm)
    }

    pub fn expected_benefit(&self, a: usize, x: &[usize]) -> Result<f64> {
        self.check_action(a)?;
        Ok(self.report(x, 0.0)?.actions[a].expected_benefit)
    }

    pub fn expected_utility(&self, a: usize, x: &[usize]) -> Result<f64> {
        self.check_action(a)?;
        Ok(self.report(x, 0.0)?.actions[a].expected_utility)
    }

    pub fn default_expected_utility(&self, x: &[usize]) -> Result<f64> {
        Ok(self.report(x, 0.0)?.default_expected_utility)
    }

    /// Expected harm and benefit computed as `sum_y P(y_a | x) h(a, x, y)`,
    /// going through the per-outcome posterior.
    pub fn expected_harm_benefit_by_outcome(&self, a: usize, x: &[usize]) -> Result<(f64, f64)> {
        self.check_action(a)?;
        self.check_context(x)?;
        let scm = self.scm;
        let ctx = scm.context_assignment(x);
        let dist = scm.interventional_distribution(&scm.do_action(a), &ctx)?;
        let marginal = dist.marginal(&scm.roles().outcomes);
        let (mut h, mut b) = (0.0, 0.0);
        for (y, p) in marginal {
            if p > 0.0 {
                let (hy, by) = self.harm_and_benefit(a, x, &y)?;
                h += p * hy;
                b += p * by;
            }
        }
        Ok((h, b))
    }

    pub fn hpu_value(&self, lambda: f64, a: usize, x: &[usize]) -> Result<f64> {
        self.check_action(a)?;
        Ok(self.report(x, lambda)?.actions[a].hpu)
    }

    /// Action maximizing the HPU. Near-ties (within [`UTILITY_SLACK`]) go to
    /// the lower expected harm, then to the lower domain index.
    pub fn hpu_optimal_action(&self, lambda: f64, x: &[usize]) -> Result<(usize, HarmReport)> {
        let report = self.report(x, lambda)?;
        let best = report
            .actions
            .iter()
            .map(|s| s.hpu)
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen = report
            .actions
            .iter()
            .filter(|s| s.hpu >= best - UTILITY_SLACK)
            .min_by(|p, q| {
                p.expected_harm
                    .total_cmp(&q.expected_harm)
                    .then(p.action.cmp(&q.action))
            })
            .map(|s| s.action)
            .ok_or_else(|| Error::InvalidArgument("empty action domain".into()))?;
        Ok((chosen, report))
    }

    /// Some other action with at least as much expected utility and strictly
    /// less expected harm, if one exists.
    pub fn needlessly_harmful(&self, a: usize, x: &[usize]) -> Result<Option<usize>> {
        let all: Vec<usize> = (0..self.scm.action_domain_size()).collect();
        self.needlessly_harmful_among(a, x, &all)
    }

    /// As [`HarmEngine::needlessly_harmful`], with alternatives restricted to `actions`.
    pub fn needlessly_harmful_among(
        &self,
        a: usize,
        x: &[usize],
        actions: &[usize],
    ) -> Result<Option<usize>> {
        self.check_action(a)?;
        let report = self.report(x, 0.0)?;
        Ok(dominating_action(&report, a, actions))
    }

    pub fn harmful_objective(&self, obj: &Objective, x: &[usize]) -> Result<ObjectiveVerdict> {
        let all: Vec<usize> = (0..self.scm.action_domain_size()).collect();
        self.harmful_objective_among(obj, x, &all)
    }

    /// Whether some maximizer of `E[J | a, x]` over `actions` is needlessly
    /// harmful relative to `actions`. Any policy mixing over maximizers also
    /// maximizes, so a harmful maximizing policy exists exactly when a
    /// harmful deterministic maximizer does.
    pub fn harmful_objective_among(
        &self,
        obj: &Objective,
        x: &[usize],
        actions: &[usize],
    ) -> Result<ObjectiveVerdict> {
        if actions.is_empty() {
            return Err(Error::InvalidArgument("no candidate actions".into()));
        }
        if *obj.table().shape() != *self.util.shape() {
            return Err(Error::Table("objective table shape does not match the model".into()));
        }
        for &a in actions {
            self.check_action(a)?;
        }
        let report = self.report(x, 0.0)?;
        let expected = actions
            .iter()
            .map(|&a| obj.expected(self.scm, a, x).map(|j| (a, j)))
            .collect::<Result<Vec<_>>>()?;
        let best = expected
            .iter()
            .map(|&(_, j)| j)
            .fold(f64::NEG_INFINITY, f64::max);
        let maximizers: Vec<usize> = expected
            .iter()
            .filter(|&&(_, j)| j >= best - UTILITY_SLACK)
            .map(|&(a, _)| a)
            .collect();
        let witness = maximizers
            .iter()
            .find_map(|&m| dominating_action(&report, m, actions).map(|d| (m, d)));
        Ok(ObjectiveVerdict {
            expected_objective: expected,
            maximizers,
            witness,
        })
    }

    /// `J(a, x, y) = U(a, x, y) - lambda * h(a, x, y)` for every reachable
    /// `(a, x, y)`; unreachable cells keep `U`.
    pub fn hpu_objective(&self, lambda: f64) -> Result<Objective> {
        let scm = self.scm;
        let shape = self.util.shape().clone();
        let mut values = self.util.values().to_vec();
        for x in product_space(&shape.context_radix) {
            let ctx = scm.context_assignment(&x);
            for a in 0..shape.actions {
                let dist = match scm.interventional_distribution(&scm.do_action(a), &ctx) {
                    Ok(d) => d,
                    Err(Error::ZeroProbability(_)) => continue,
                    Err(e) => return Err(e),
                };
                for (y, p) in dist.marginal(&scm.roles().outcomes) {
                    if p > 0.0 {
                        let h = self.harm(a, &x, &y)?;
                        values[shape.index(a, &x, &y)] -= lambda * h;
                    }
                }
            }
        }
        UtilityTable::from_values(shape, values).map(Objective)
    }
}

fn dominating_action(report: &HarmReport, a: usize, candidates: &[usize]) -> Option<usize> {
    let me = &report.actions[a];
    candidates
        .iter()
        .copied()
        .filter(|&b| b != a)
        .find(|&b| {
            let other = &report.actions[b];
            other.expected_utility >= me.expected_utility - UTILITY_SLACK
                && other.expected_harm < me.expected_harm
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::treatment_model;

    fn t(scm: &DiscreteScm, l: &str) -> usize {
        scm.action_index(l).unwrap()
    }

    #[test]
    fn pointwise_treatment_values() {
        let (scm, util) = treatment_model();
        let e = HarmEngine::new(&scm, &util).unwrap();
        assert!((e.harm(t(&scm, "2"), &[], &[0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((e.benefit(t(&scm, "2"), &[], &[1]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(e.harm(t(&scm, "1"), &[], &[1]).unwrap(), 0.0);
        assert_eq!(e.benefit(t(&scm, "1"), &[], &[0]).unwrap(), 0.0);
        for y in [0, 1] {
            assert_eq!(e.harm(t(&scm, "0"), &[], &[y]).unwrap(), 0.0);
            assert_eq!(e.benefit(t(&scm, "0"), &[], &[y]).unwrap(), 0.0);
        }
    }

    #[test]
    fn impossible_factual_outcome_is_an_error() {
        // Under do(T=1) with e1=e2=... there is always some state; force an
        // impossible one by conditioning on a zero-probability context instead.
        let mut b = crate::scm::ScmBuilder::new();
        b.endogenous("A", ["0", "1"]).unwrap();
        b.endogenous("Y", ["0", "1"]).unwrap();
        b.mechanism_fn("A", &[], &[], |_| 0).unwrap();
        b.mechanism_fn("Y", &["A"], &[], |i| i[0]).unwrap();
        b.roles("A", &[], &["Y"]);
        let scm = b.build().unwrap();
        let util = UtilityTable::from_fn(&scm, |_, _, y| y[0] as f64).unwrap();
        let e = HarmEngine::new(&scm, &util).unwrap();
        assert!(matches!(e.harm(1, &[], &[0]), Err(Error::ZeroProbability(_))));
        assert_eq!(e.harm(1, &[], &[1]).unwrap(), 0.0);
    }

    #[test]
    fn expected_values_and_routes() {
        let (scm, util) = treatment_model();
        let e = HarmEngine::new(&scm, &util).unwrap();
        let r = e.report(&[], 1.0).unwrap();
        let s = |l: &str| &r.actions[t(&scm, l)];
        assert_eq!(s("1").expected_harm, 0.0);
        assert!((s("2").expected_harm - 0.1).abs() < 1e-12);
        assert_eq!(s("0").expected_harm, 0.0);
        assert!((s("2").expected_benefit - 0.4).abs() < 1e-12);
        assert!((s("1").expected_benefit - 0.3).abs() < 1e-12);
        assert_eq!(s("0").expected_benefit, 0.0);
        assert!((s("2").hpu - 0.7).abs() < 1e-12);
        assert!((s("1").hpu - 0.8).abs() < 1e-12);
        assert!(r.max_residual() <= 1e-12);
        for a in 0..3 {
            let (h, b) = e.expected_harm_benefit_by_outcome(a, &[]).unwrap();
            assert!((h - r.actions[a].expected_harm).abs() <= 1e-12);
            assert!((b - r.actions[a].expected_benefit).abs() <= 1e-12);
        }
        assert!((e.hpu_value(-1.0, t(&scm, "2"), &[]).unwrap() - 0.9).abs() < 1e-12);
        for a in 0..3 {
            let r0 = e.report(&[], 0.0).unwrap();
            assert_eq!(r0.actions[a].hpu, r0.actions[a].expected_utility);
        }
    }

    #[test]
    fn hpu_argmax_prefers_t1() {
        let (scm, util) = treatment_model();
        let e = HarmEngine::new(&scm, &util).unwrap();
        assert_eq!(e.hpu_optimal_action(1.0, &[]).unwrap().0, t(&scm, "1"));
        // equal expected utility at lambda = 0; the lower-harm tie-break decides
        assert_eq!(e.hpu_optimal_action(0.0, &[]).unwrap().0, t(&scm, "1"));
        assert!(e.hpu_optimal_action(f64::NAN, &[]).is_err());
    }

    #[test]
    fn singleton_action_domain() {
        let mut b = crate::scm::ScmBuilder::new();
        b.endogenous("A", ["only"]).unwrap();
        b.endogenous("Y", ["0", "1"]).unwrap();
        b.exogenous("e", ["0", "1"], &[0.5, 0.5]).unwrap();
        b.mechanism_fn("A", &[], &[], |_| 0).unwrap();
        b.mechanism_fn("Y", &["A"], &["e"], |i| i[1]).unwrap();
        b.roles("A", &[], &["Y"]);
        let scm = b.build().unwrap();
        let util = UtilityTable::from_fn(&scm, |_, _, y| y[0] as f64).unwrap();
        let e = HarmEngine::new(&scm, &util).unwrap();
        assert_eq!(e.hpu_optimal_action(3.0, &[]).unwrap().0, 0);
    }

    #[test]
    fn needless_harm_in_treatment_model() {
        let (scm, util) = treatment_model();
        let e = HarmEngine::new(&scm, &util).unwrap();
        assert_eq!(e.needlessly_harmful(t(&scm, "2"), &[]).unwrap(), Some(t(&scm, "1")));
        assert_eq!(e.needlessly_harmful(t(&scm, "1"), &[]).unwrap(), None);
        assert_eq!(e.needlessly_harmful(t(&scm, "0"), &[]).unwrap(), None);
    }

    #[test]
    fn cate_objective_is_harmful_hpu_is_not() {
        let (scm, util) = treatment_model();
        let e = HarmEngine::new(&scm, &util).unwrap();
        let cate = Objective::from_fn(&scm, |_, _, y| y[0] as f64).unwrap();
        let v = e.harmful_objective(&cate, &[]).unwrap();
        assert!(v.is_harmful());
        assert_eq!(v.witness, Some((t(&scm, "2"), t(&scm, "1"))));

        let hpu = e.hpu_objective(1.0).unwrap();
        let v = e.harmful_objective(&hpu, &[]).unwrap();
        assert!(!v.is_harmful(), "{v:?}");
        assert_eq!(v.maximizers, vec![t(&scm, "1")]);

        let constant = Objective::from_fn(&scm, |_, _, _| 1.0).unwrap();
        let v = e.harmful_objective(&constant, &[]).unwrap();
        assert_eq!(v.maximizers.len(), 3);
        assert!(v.is_harmful());
    }

    #[test]
    fn table_shape_is_checked() {
        let (scm, _) = treatment_model();
        let shape = TableShape::of(&scm);
        assert!(UtilityTable::from_values(shape.clone(), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; shape.len()];
        v[0] = f64::NAN;
        assert!(UtilityTable::from_values(shape, v).is_err());
    }
}
