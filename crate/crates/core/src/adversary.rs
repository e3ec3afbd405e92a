//! Outcome distributional shifts that expose objectives as harmful.
//!
//! Every construction here works at a single context and on counterfactually
//! independent (CFI) models: each action `b` owns a private noise variable
//! whose value *is* the outcome `Y_b`, so potential outcomes under different
//! actions are independent. Coupling the noise of one action `a` with the
//! default's noise, `P(e_a, e_0) + (-1)^(e_a - e_0) phi`, moves the harm of `a`
//! linearly in `phi` while leaving every interventional distribution — and
//! hence every factual objective — unchanged.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::format::sig12;
use crate::harm::{HarmEngine, Objective, ObjectiveVerdict, UtilityTable, UTILITY_SLACK};
use crate::scm::{product_space, DiscreteScm, ScmBuilder};

/// Per-action values over a flattened outcome space at one fixed context.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionUtilities {
    pub action_labels: Vec<String>,
    pub outcome_labels: Vec<String>,
    /// `values[a][y]`.
    pub values: Vec<Vec<f64>>,
}

impl ActionUtilities {
    /// Utilities with labels `0, 1, ...` for actions and outcomes.
    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self> {
        let n_out = values.first().map_or(0, Vec::len);
        if values.is_empty() || n_out == 0 || values.iter().any(|r| r.len() != n_out) {
            return Err(Error::Table("utility rows must be non-empty and equally long".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Table("utilities must be finite".into()));
        }
        Ok(Self {
            action_labels: (0..values.len()).map(|i| i.to_string()).collect(),
            outcome_labels: (0..n_out).map(|i| i.to_string()).collect(),
            values,
        })
    }

    /// Slices a table at context `x`; joint outcomes are labelled by their
    /// comma-joined components.
    pub fn from_table(scm: &DiscreteScm, table: &UtilityTable, x: &[usize]) -> Result<Self> {
        let shape = table.shape();
        if x.len() != shape.context_radix.len() || x.iter().zip(&shape.context_radix).any(|(v, r)| v >= r) {
            return Err(Error::InvalidArgument("malformed context".into()));
        }
        let outcomes = product_space(&shape.outcome_radix);
        let vars = &scm.roles().outcomes;
        Ok(Self {
            action_labels: (0..shape.actions).map(|a| scm.action_label(a).to_string()).collect(),
            outcome_labels: outcomes.iter().map(|y| scm.labels(vars, y).join(",")).collect(),
            values: (0..shape.actions)
                .map(|a| outcomes.iter().map(|y| table.get(a, x, y)).collect())
                .collect(),
        })
    }

    pub fn actions(&self) -> usize {
        self.values.len()
    }

    pub fn outcomes(&self) -> usize {
        self.outcome_labels.len()
    }

    /// First outcome of lowest and of highest utility for `a`.
    pub fn extremes(&self, a: usize) -> (usize, usize) {
        let row = &self.values[a];
        let (mut lo, mut hi) = (0, 0);
        for (y, &v) in row.iter().enumerate() {
            if v < row[lo] {
                lo = y;
            }
            if v > row[hi] {
                hi = y;
            }
        }
        (lo, hi)
    }

    pub fn range(&self, a: usize) -> (f64, f64) {
        let (lo, hi) = self.extremes(a);
        (self.values[a][lo], self.values[a][hi])
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.actions() {
            return Err(Error::InvalidArgument(format!("action #{a} is out of range")));
        }
        Ok(())
    }
}

/// Whether `max U(a_i) > min U(a_j)` for every ordered pair of distinct listed actions.
pub fn outcome_dependent(au: &ActionUtilities, actions: &[usize]) -> bool {
    actions.iter().all(|&i| {
        actions
            .iter()
            .all(|&j| i == j || au.range(i).1 > au.range(j).0)
    })
}

fn check_outcome_dependence(au: &ActionUtilities, actions: &[usize]) -> Result<()> {
    for &a in actions {
        au.check_action(a)?;
    }
    if !outcome_dependent(au, actions) {
        let names: Vec<&str> = actions.iter().map(|&a| au.action_labels[a].as_str()).collect();
        return Err(Error::OutcomeDependence(format!(
            "utility ranges of actions [{}] do not overlap pairwise",
            names.join(", ")
        )));
    }
    Ok(())
}

/// The private noise of one action: a categorical over noise values, each
/// of which maps to an outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseComponent {
    pub outcomes: Vec<usize>,
    pub probs: Vec<f64>,
}

/// The `(a, a0)` pair whose noise variables are jointly perturbed by `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub action: usize,
    pub phi: f64,
}

/// A soft intervention `tau`: play `action` with probability `q`, the
/// default otherwise, on an independent coin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixture {
    pub action: usize,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfiModel {
    pub action_labels: Vec<String>,
    pub outcome_labels: Vec<String>,
    pub default_action: usize,
    pub components: Vec<NoiseComponent>,
    pub coupling: Option<Coupling>,
    pub mixture: Option<Mixture>,
}

pub const TAU_LABEL: &str = "tau";

/// A CFI model whose action `b` has outcome distribution `marginals[b]`.
pub fn build_cfi_model(
    action_labels: &[String],
    outcome_labels: &[String],
    default_action: usize,
    marginals: &[Vec<f64>],
) -> Result<CfiModel> {
    if marginals.len() != action_labels.len() || action_labels.is_empty() {
        return Err(Error::InvalidArgument(
            "need one marginal per action and at least one action".into(),
        ));
    }
    if default_action >= action_labels.len() {
        return Err(Error::InvalidArgument("default action is out of range".into()));
    }
    let mut components = Vec::new();
    for (b, m) in marginals.iter().enumerate() {
        if m.len() != outcome_labels.len() {
            return Err(Error::InvalidDistribution {
                name: format!("P(Y_{})", action_labels[b]),
                reason: format!("{} probabilities for {} outcomes", m.len(), outcome_labels.len()),
            });
        }
        crate::scm::check_probs(&format!("P(Y_{})", action_labels[b]), m)?;
        components.push(NoiseComponent {
            outcomes: (0..m.len()).collect(),
            probs: m.clone(),
        });
    }
    Ok(CfiModel {
        action_labels: action_labels.to_vec(),
        outcome_labels: outcome_labels.to_vec(),
        default_action,
        components,
        coupling: None,
        mixture: None,
    })
}

/// How [`binary_concentrated_model`] chooses the weight on the best outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum Mixing {
    /// Listed actions share the midpoint of their common utility range.
    EqualUtility,
    /// Probability of the highest-utility outcome, per action.
    Explicit(Vec<f64>),
}

/// Weights on the best outcome that give every listed action the expected
/// utility at the midpoint of the overlap of their utility ranges. Unlisted
/// actions get 1/2.
pub fn equal_utility_weights(au: &ActionUtilities, actions: &[usize]) -> Result<Vec<f64>> {
    check_outcome_dependence(au, actions)?;
    let lo = actions.iter().map(|&a| au.range(a).0).fold(f64::NEG_INFINITY, f64::max);
    let hi = actions.iter().map(|&a| au.range(a).1).fold(f64::INFINITY, f64::min);
    let t = 0.5 * (lo + hi);
    let mut w = vec![0.5; au.actions()];
    for &a in actions {
        let (mn, mx) = au.range(a);
        if mx > mn {
            w[a] = ((t - mn) / (mx - mn)).clamp(0.0, 1.0);
        }
    }
    Ok(w)
}

/// CFI model in which action `b` yields its worst outcome with probability
/// `1 - w_b` (noise value 0) and its best with probability `w_b` (value 1).
pub fn binary_concentrated_model(
    au: &ActionUtilities,
    default_action: usize,
    actions: &[usize],
    mixing: &Mixing,
) -> Result<CfiModel> {
    au.check_action(default_action)?;
    check_outcome_dependence(au, actions)?;
    let weights = match mixing {
        Mixing::EqualUtility => equal_utility_weights(au, actions)?,
        Mixing::Explicit(w) => {
            if w.len() != au.actions() || w.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidArgument(
                    "need one weight in [0, 1] per action".into(),
                ));
            }
            w.clone()
        }
    };
    let components = (0..au.actions())
        .map(|b| {
            let (lo, hi) = au.extremes(b);
            NoiseComponent {
                outcomes: vec![lo, hi],
                probs: vec![1.0 - weights[b], weights[b]],
            }
        })
        .collect();
    Ok(CfiModel {
        action_labels: au.action_labels.clone(),
        outcome_labels: au.outcome_labels.clone(),
        default_action,
        components,
        coupling: None,
        mixture: None,
    })
}

impl CfiModel {
    pub fn actions(&self) -> usize {
        self.action_labels.len()
    }

    /// Index of the mixed action, when present; it follows the real actions.
    pub fn tau(&self) -> Option<usize> {
        self.mixture.map(|_| self.actions())
    }

    fn check_action(&self, a: usize) -> Result<()> {
        let n = self.actions() + usize::from(self.mixture.is_some());
        if a >= n {
            return Err(Error::InvalidArgument(format!("action #{a} is out of range")));
        }
        Ok(())
    }

    fn binary_probs(&self, b: usize) -> Result<(f64, f64)> {
        match self.components[b].probs.as_slice() {
            [p0, p1] => Ok((*p0, *p1)),
            _ => Err(Error::InvalidArgument(format!(
                "noise of action `{}` is not binary",
                self.action_labels[b]
            ))),
        }
    }

    /// Joint `P(e_a = i, e_0 = j)` of the coupled pair, row-major over `(i, j)`.
    fn pair_joint(&self, c: Coupling) -> Vec<f64> {
        let pa = &self.components[c.action].probs;
        let p0 = &self.components[self.default_action].probs;
        let mut joint = Vec::with_capacity(4);
        for (i, a) in pa.iter().enumerate() {
            for (j, z) in p0.iter().enumerate() {
                let sign = if i == j { 1.0 } else { -1.0 };
                joint.push((a * z + sign * c.phi).max(0.0));
            }
        }
        joint
    }

    /// `P(Y_b = y)` for every outcome. For the coupled action this is the
    /// row sum of the perturbed joint.
    pub fn marginal(&self, b: usize) -> Result<Vec<f64>> {
        self.check_action(b)?;
        let mut m = vec![0.0; self.outcome_labels.len()];
        if let Some(mix) = self.mixture.filter(|_| b == self.actions()) {
            for (y, p) in self.marginal(mix.action)?.into_iter().enumerate() {
                m[y] += mix.q * p;
            }
            for (y, p) in self.marginal(self.default_action)?.into_iter().enumerate() {
                m[y] += (1.0 - mix.q) * p;
            }
            return Ok(m);
        }
        let comp = &self.components[b];
        match self.coupling {
            Some(c) if b == c.action || b == self.default_action => {
                let joint = self.pair_joint(c);
                let n0 = self.components[self.default_action].probs.len();
                for (k, p) in joint.into_iter().enumerate() {
                    let idx = if b == c.action { k / n0 } else { k % n0 };
                    m[comp.outcomes[idx]] += p;
                }
            }
            _ => {
                for (o, p) in comp.outcomes.iter().zip(&comp.probs) {
                    m[*o] += p;
                }
            }
        }
        Ok(m)
    }

    /// `(lower, upper)` range of `phi` keeping the `(a, a0)` joint nonnegative.
    pub fn phi_bounds(&self, a: usize) -> Result<(f64, f64)> {
        self.check_real_non_default(a)?;
        let (q0_0, q0_1) = self.binary_probs(self.default_action)?;
        let (qa_0, qa_1) = self.binary_probs(a)?;
        let lower = (-q0_1 * qa_1).max(-q0_0 * qa_0);
        let upper = (q0_1 * qa_0).min(q0_0 * qa_1);
        Ok((lower, upper))
    }

    fn check_real_non_default(&self, a: usize) -> Result<()> {
        if a >= self.actions() {
            return Err(Error::InvalidArgument(format!("action #{a} is out of range")));
        }
        if a == self.default_action {
            return Err(Error::InvalidArgument(
                "the shifted action must differ from the default".into(),
            ));
        }
        Ok(())
    }

    /// Couples the noise of `a` and the default with perturbation `phi`.
    pub fn apply_phi_shift(&self, a: usize, phi: f64) -> Result<CfiModel> {
        let (lower, upper) = self.phi_bounds(a)?;
        if !phi.is_finite() || phi < lower || phi > upper {
            return Err(Error::PhiOutOfBounds { phi, lower, upper });
        }
        if let Some(c) = self.coupling {
            if c.action != a {
                return Err(Error::InvalidArgument(format!(
                    "model is already coupled on action `{}`",
                    self.action_labels[c.action]
                )));
            }
        }
        let mut m = self.clone();
        m.coupling = Some(Coupling { action: a, phi });
        Ok(m)
    }

    /// Adds the mixed action `tau = q [A = a] + (1 - q) [A = a0]`.
    pub fn with_mixture(&self, a: usize, q: f64) -> Result<CfiModel> {
        self.check_real_non_default(a)?;
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidArgument(format!("mixing weight must lie in (0, 1], got {q}")));
        }
        let mut m = self.clone();
        m.mixture = Some(Mixture { action: a, q });
        Ok(m)
    }

    /// `Delta_00 + Delta_11 - Delta_10 - Delta_01` for `a` against the default.
    pub fn phi_coefficient(&self, au: &ActionUtilities, a: usize) -> Result<f64> {
        self.check_real_non_default(a)?;
        self.binary_probs(a)?;
        self.binary_probs(self.default_action)?;
        let d = |ys: usize, y: usize| {
            let u0 = au.values[self.default_action][self.components[self.default_action].outcomes[ys]];
            let ua = au.values[a][self.components[a].outcomes[y]];
            (u0 - ua).max(0.0)
        };
        Ok(d(0, 0) + d(1, 1) - d(1, 0) - d(0, 1))
    }

    pub fn expected_utility(&self, au: &ActionUtilities, b: usize) -> Result<f64> {
        if let Some(mix) = self.mixture.filter(|_| b == self.actions()) {
            return Ok(mix.q * self.expected_utility(au, mix.action)?
                + (1.0 - mix.q) * self.expected_utility(au, self.default_action)?);
        }
        let m = self.marginal(b)?;
        Ok(m.iter().zip(&au.values[b]).map(|(p, u)| p * u).sum())
    }

    /// Expected harm of `b` against the default, summed directly over the
    /// pair joint.
    pub fn expected_harm(&self, au: &ActionUtilities, b: usize) -> Result<f64> {
        self.check_action(b)?;
        if let Some(mix) = self.mixture.filter(|_| b == self.actions()) {
            return Ok(mix.q * self.expected_harm(au, mix.action)?);
        }
        let a0 = self.default_action;
        if b == a0 {
            return Ok(0.0);
        }
        let (cb, c0) = (&self.components[b], &self.components[a0]);
        let joint: Vec<f64> = match self.coupling {
            Some(c) if c.action == b => self.pair_joint(c),
            _ => cb
                .probs
                .iter()
                .flat_map(|p| c0.probs.iter().map(move |z| p * z))
                .collect(),
        };
        let mut h = 0.0;
        for (k, p) in joint.into_iter().enumerate() {
            let (i, j) = (k / c0.probs.len(), k % c0.probs.len());
            let gap = au.values[a0][c0.outcomes[j]] - au.values[b][cb.outcomes[i]];
            h += p * gap.max(0.0);
        }
        Ok(h)
    }

    /// The model as a discrete SCM. Endogenous `A` (constant default) and
    /// `Y`; with a mixture, `A` gains the value `tau` and an executed-action
    /// variable `A_exec` driven by a coin `Q` sits between `A` and `Y`.
    pub fn to_scm(&self) -> Result<DiscreteScm> {
        let n = self.actions();
        let mut b = ScmBuilder::new();
        let mut action_dom = self.action_labels.clone();
        if self.mixture.is_some() {
            action_dom.push(TAU_LABEL.into());
        }
        b.endogenous("A", action_dom)?;
        if self.mixture.is_some() {
            b.endogenous("A_exec", self.action_labels.clone())?;
        }
        b.endogenous("Y", self.outcome_labels.clone())?;

        // One noise input per action, except that a coupled pair shares one
        // input over the product of their values. `slot[b]` is the input
        // position feeding action `b` and `part[b]` selects its coordinate.
        let mut exo_names = Vec::new();
        let mut slot = vec![0; n];
        let mut part: Vec<Option<(bool, usize)>> = vec![None; n];
        let coupled = self.coupling.map(|c| c.action);
        for (bi, comp) in self.components.iter().enumerate() {
            if Some(bi) == coupled || (coupled.is_some() && bi == self.default_action) {
                continue;
            }
            let name = format!("E{bi}");
            let dom: Vec<String> = (0..comp.probs.len()).map(|i| i.to_string()).collect();
            b.exogenous(&name, dom, &comp.probs)?;
            slot[bi] = exo_names.len();
            exo_names.push(name);
        }
        if let Some(c) = self.coupling {
            let a0 = self.default_action;
            let name = format!("E{}_{}", c.action, a0);
            let n0 = self.components[a0].probs.len();
            let na = self.components[c.action].probs.len();
            let dom: Vec<String> = product_space(&[na, n0])
                .iter()
                .map(|v| format!("{}:{}", v[0], v[1]))
                .collect();
            b.exogenous(&name, dom, &self.pair_joint(c))?;
            slot[c.action] = exo_names.len();
            slot[a0] = exo_names.len();
            part[c.action] = Some((true, n0));
            part[a0] = Some((false, n0));
            exo_names.push(name);
        }
        let default = self.default_action;
        b.mechanism_fn("A", &[], &[], move |_| default)?;

        let y_parent = if let Some(mix) = self.mixture {
            b.exogenous("Q", ["0", "1"], &[1.0 - mix.q, mix.q])?;
            let (tau, target) = (n, mix.action);
            b.mechanism_fn("A_exec", &["A"], &["Q"], move |v| match (v[0], v[1]) {
                (a, _) if a != tau => a,
                (_, 1) => target,
                _ => default,
            })?;
            "A_exec"
        } else {
            "A"
        };
        let exo_refs: Vec<&str> = exo_names.iter().map(String::as_str).collect();
        let comps = self.components.clone();
        b.mechanism_fn("Y", &[y_parent], &exo_refs, move |v| {
            let a = v[0];
            let e = v[1 + slot[a]];
            let idx = match part[a] {
                Some((true, n0)) => e / n0,
                Some((false, n0)) => e % n0,
                None => e,
            };
            comps[a].outcomes[idx]
        })?;
        let outcomes: &[&str] = if self.mixture.is_some() { &["A_exec", "Y"] } else { &["Y"] };
        b.roles("A", &[], outcomes);
        b.build()
    }

    /// Lifts per-action values to a table over [`CfiModel::to_scm`]'s model;
    /// with a mixture the value depends on the executed action.
    pub fn lift_table(&self, scm: &DiscreteScm, values: &ActionUtilities) -> Result<UtilityTable> {
        if values.actions() != self.actions() || values.outcomes() != self.outcome_labels.len() {
            return Err(Error::Table("value table does not match the model".into()));
        }
        let mixed = self.mixture.is_some();
        UtilityTable::from_fn(scm, |a, _, y| {
            if mixed {
                values.values[y[0]][y[1]]
            } else {
                values.values[a][y[0]]
            }
        })
    }
}

/// Model in which `a` ties the default in expected utility but does harm,
/// so that maximizing expected utility is harmful when choosing between them.
#[derive(Debug, Clone)]
pub struct UtilityTieWitness {
    pub model: CfiModel,
    pub expected_utility: [f64; 2],
    pub expected_harm: [f64; 2],
    pub verdict: ObjectiveVerdict,
}

pub fn utility_tie_witness(au: &ActionUtilities, a0: usize, a: usize) -> Result<UtilityTieWitness> {
    if a == a0 {
        return Err(Error::InvalidArgument("the action must differ from the default".into()));
    }
    let model = binary_concentrated_model(au, a0, &[a0, a], &Mixing::EqualUtility)?;
    let scm = model.to_scm()?;
    let util = model.lift_table(&scm, au)?;
    let engine = HarmEngine::new(&scm, &util)?;
    let verdict = engine.harmful_objective_among(&Objective::new(util.clone()), &[], &[a0, a])?;
    Ok(UtilityTieWitness {
        expected_utility: [model.expected_utility(au, a0)?, model.expected_utility(au, a)?],
        expected_harm: [model.expected_harm(au, a0)?, model.expected_harm(au, a)?],
        model,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftTag {
    Base,
    Plus,
    Minus,
}

impl ShiftTag {
    pub fn name(&self) -> &'static str {
        match self {
            ShiftTag::Base => "M0",
            ShiftTag::Plus => "M+",
            ShiftTag::Minus => "M-",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRow {
    pub action: usize,
    pub label: String,
    pub expected_utility: f64,
    pub expected_harm: f64,
    pub expected_objective: f64,
}

/// One environment of a shifted-objective witness with its evidence.
#[derive(Debug, Clone)]
pub struct Environment {
    pub tag: ShiftTag,
    pub model: CfiModel,
    pub rows: Vec<ActionRow>,
    pub verdict: ObjectiveVerdict,
}

impl Environment {
    /// The environment as an SCM with lifted utility and objective tables.
    pub fn materialize(
        &self,
        au: &ActionUtilities,
        j: &ActionUtilities,
    ) -> Result<(DiscreteScm, UtilityTable, Objective)> {
        let scm = self.model.to_scm()?;
        let util = self.model.lift_table(&scm, au)?;
        let obj = Objective::new(self.model.lift_table(&scm, j)?);
        Ok((scm, util, obj))
    }
}

#[derive(Debug, Clone)]
pub struct ShiftedObjectiveWitness {
    /// The shifted environment in which `J` is harmful, if any.
    pub flagged: Option<ShiftTag>,
    /// Candidate actions the agent chooses between: `{a1, a2}` when their
    /// harms tie in the base model, `{tau, a2}` otherwise.
    pub choice: Vec<usize>,
    /// The action whose noise is coupled with the default's.
    pub perturbed: usize,
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub q: Option<f64>,
    pub environments: Vec<Environment>,
}

impl ShiftedObjectiveWitness {
    pub fn environment(&self, tag: ShiftTag) -> &Environment {
        self.environments
            .iter()
            .find(|e| e.tag == tag)
            .expect("all three environments are recorded")
    }

    /// Demonstration table: one row per environment and action.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "environment,phi,action,expected_utility,expected_harm,expected_objective,in_choice_set,maximizer,needlessly_harmful"
        )?;
        for env in &self.environments {
            let phi = env.model.coupling.map_or(0.0, |c| c.phi);
            for r in &env.rows {
                let in_choice = self.choice.contains(&r.action);
                let maximizer = in_choice && env.verdict.maximizers.contains(&r.action);
                let harmful = env.verdict.witness.is_some_and(|(m, _)| m == r.action);
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    env.tag.name(),
                    sig12(phi),
                    r.label,
                    sig12(r.expected_utility),
                    sig12(r.expected_harm),
                    sig12(r.expected_objective),
                    in_choice,
                    maximizer,
                    harmful
                )?;
            }
        }
        Ok(())
    }
}

fn evaluate_environment(
    tag: ShiftTag,
    model: CfiModel,
    au: &ActionUtilities,
    j: &ActionUtilities,
    choice: &[usize],
) -> Result<Environment> {
    let scm = model.to_scm()?;
    let util = model.lift_table(&scm, au)?;
    let obj = Objective::new(model.lift_table(&scm, j)?);
    let engine = HarmEngine::new(&scm, &util)?;
    let verdict = engine.harmful_objective_among(&obj, &[], choice)?;
    let report = engine.report(&[], 0.0)?;
    let rows = report
        .actions
        .iter()
        .map(|s| {
            Ok(ActionRow {
                action: s.action,
                label: scm.action_label(s.action).to_string(),
                expected_utility: s.expected_utility,
                expected_harm: s.expected_harm,
                expected_objective: obj.expected(&scm, s.action, &[])?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Environment {
        tag,
        model,
        rows,
        verdict,
    })
}

/// Builds the base, plus and minus environments in which `a0`, `a1` and
/// `a2` share an expected utility, and reports in which of the shifted ones
/// maximizing the factual objective `j` is harmful.
pub fn shifted_objective_witness(
    au: &ActionUtilities,
    j: &ActionUtilities,
    a0: usize,
    a1: usize,
    a2: usize,
) -> Result<ShiftedObjectiveWitness> {
    if a0 == a1 || a0 == a2 || a1 == a2 {
        return Err(Error::InvalidArgument("a0, a1 and a2 must be distinct".into()));
    }
    if j.actions() != au.actions() || j.outcomes() != au.outcomes() {
        return Err(Error::Table("objective table does not match the utility table".into()));
    }
    let base = binary_concentrated_model(au, a0, &[a0, a1, a2], &Mixing::EqualUtility)?;
    let (mut hi, mut lo) = (a1, a2);
    let (mut h_hi, mut h_lo) = (base.expected_harm(au, a1)?, base.expected_harm(au, a2)?);
    if h_hi <= 0.0 || h_lo <= 0.0 {
        return Err(Error::OutcomeDependence(
            "equal-utility model leaves an action harmless".into(),
        ));
    }
    let tied = (h_hi - h_lo).abs() <= UTILITY_SLACK;
    if !tied && h_hi < h_lo {
        std::mem::swap(&mut hi, &mut lo);
        std::mem::swap(&mut h_hi, &mut h_lo);
    }
    let (base, choice, q) = if tied {
        (base, vec![a1, a2], None)
    } else {
        let q = h_lo / h_hi;
        let m = base.with_mixture(hi, q)?;
        let tau = m.tau().expect("mixture was just added");
        (m, vec![tau, lo], Some(q))
    };
    // Perturb an action whose harm reacts to phi. Under outcome dependence
    // the coefficient is nonzero for any non-constant utility row; it is in
    // fact negative, so the harm-raising shift uses the lower bound.
    let (perturbed, coef) = [hi, lo]
        .into_iter()
        .find_map(|b| {
            base.phi_coefficient(au, b)
                .ok()
                .filter(|c| *c != 0.0)
                .map(|c| (b, c))
        })
        .ok_or_else(|| {
            Error::OutcomeDependence("harm of neither action responds to a coupling".into())
        })?;
    let (lower, upper) = base.phi_bounds(perturbed)?;
    let (phi_plus, phi_minus) = if coef > 0.0 {
        (0.5 * upper, 0.5 * lower)
    } else {
        (0.5 * lower, 0.5 * upper)
    };
    let plus = base.apply_phi_shift(perturbed, phi_plus)?;
    let minus = base.apply_phi_shift(perturbed, phi_minus)?;
    let environments = vec![
        evaluate_environment(ShiftTag::Base, base, au, j, &choice)?,
        evaluate_environment(ShiftTag::Plus, plus, au, j, &choice)?,
        evaluate_environment(ShiftTag::Minus, minus, au, j, &choice)?,
    ];
    let flagged = [ShiftTag::Plus, ShiftTag::Minus]
        .into_iter()
        .find(|&t| environments.iter().any(|e| e.tag == t && e.verdict.is_harmful()));
    Ok(ShiftedObjectiveWitness {
        flagged,
        choice,
        perturbed,
        phi_plus,
        phi_minus,
        q,
        environments,
    })
}
