//! Discrete structural causal models.
//!
//! Every endogenous variable has a finite domain and a tabular mechanism over
//! its endogenous parents and exogenous inputs. Exogenous variables are
//! mutually independent categoricals, so every probabilistic query reduces to
//! a weighted sum over the exogenous joint. Queries enumerate that joint
//! exactly; models whose joint exceeds [`MAX_NOISE_STATES`] are rejected.
//!
//! Values are addressed by their index into the variable's domain. The
//! `*_index` / [`DiscreteScm::assignment`] helpers translate labels.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Upper bound on the number of exogenous joint states a model may have.
pub const MAX_NOISE_STATES: u64 = 1 << 24;

/// Probability vectors must sum to one within this slack.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Noise states per enumeration chunk. Chunks are reduced independently and
/// merged in index order, so results do not depend on the worker count.
const CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub domain: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exogenous {
    pub name: String,
    pub domain: Vec<String>,
    pub probs: Vec<f64>,
}

/// Lookup table from (endogenous parents, exogenous inputs) to a domain index.
///
/// The table is laid out row-major over `parents` followed by `exo`, the last
/// input varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub parents: Vec<usize>,
    pub exo: Vec<usize>,
    pub table: Vec<usize>,
    strides: Vec<usize>,
}

impl Mechanism {
    fn lookup(&self, endo: &[usize], noise: &[usize]) -> usize {
        let mut idx = 0;
        let mut s = self.strides.iter();
        for &p in &self.parents {
            idx += endo[p] * s.next().unwrap();
        }
        for &e in &self.exo {
            idx += noise[e] * s.next().unwrap();
        }
        self.table[idx]
    }
}

/// Action, context and outcome designation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roles {
    pub action: usize,
    pub context: Vec<usize>,
    pub outcomes: Vec<usize>,
}

/// A partial assignment of endogenous variables, sorted by variable index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<(usize, usize)>);

impl Assignment {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds an assignment from `(variable, value)` index pairs. Later pairs
    /// override earlier ones for the same variable.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let map: BTreeMap<usize, usize> = pairs.into_iter().collect();
        Self(map.into_iter().collect())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, var: usize) -> Option<usize> {
        self.0.iter().find(|(v, _)| *v == var).map(|&(_, x)| x)
    }

    pub fn matches(&self, values: &[usize]) -> bool {
        self.0.iter().all(|&(v, x)| values[v] == x)
    }

    /// Union of two assignments; `None` if they disagree on a shared variable.
    pub fn merged(&self, other: &Assignment) -> Option<Assignment> {
        let mut map: BTreeMap<usize, usize> = self.0.iter().copied().collect();
        for &(v, x) in &other.0 {
            if let Some(prev) = map.insert(v, x) {
                if prev != x {
                    return None;
                }
            }
        }
        Some(Self(map.into_iter().collect()))
    }
}

/// `do(...)`: endogenous variables clamped to fixed values. The empty
/// intervention leaves the model (and its default policy) unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Intervention(Assignment);

impl Intervention {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn from_assignment(a: Assignment) -> Self {
        Self(a)
    }

    pub fn single(var: usize, value: usize) -> Self {
        Self(Assignment(vec![(var, value)]))
    }

    pub fn targets(&self) -> &Assignment {
        &self.0
    }

    pub fn is_trivial(&self) -> bool {
        self.0.is_empty()
    }
}

/// Full state of one world: every endogenous and exogenous value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WorldAssignment {
    pub endogenous: Vec<usize>,
    pub exogenous: Vec<usize>,
}

/// Exact distribution over endogenous joint states.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    entries: BTreeMap<Vec<usize>, f64>,
}

impl JointDistribution {
    pub fn entries(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.entries.iter().map(|(k, &p)| (k.as_slice(), p))
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Probability that the partial assignment holds.
    pub fn prob(&self, event: &Assignment) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| event.matches(k))
            .map(|(_, &p)| p)
            .sum()
    }

    /// Marginal over the listed variables, keyed by their joint value.
    pub fn marginal(&self, vars: &[usize]) -> BTreeMap<Vec<usize>, f64> {
        let mut out = BTreeMap::new();
        for (k, &p) in &self.entries {
            let key: Vec<usize> = vars.iter().map(|&v| k[v]).collect();
            *out.entry(key).or_insert(0.0) += p;
        }
        out
    }

    pub fn expectation(&self, f: impl Fn(&[usize]) -> f64) -> f64 {
        self.entries.iter().map(|(k, &p)| p * f(k)).sum()
    }
}

/// Posterior over exogenous joint states, sparse and in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePosterior {
    pub states: Vec<(Vec<usize>, f64)>,
}

impl NoisePosterior {
    pub fn prob(&self, noise: &[usize]) -> f64 {
        self.states
            .iter()
            .find(|(s, _)| s.as_slice() == noise)
            .map_or(0.0, |&(_, p)| p)
    }
}

/// One tagged world of a counterfactual query.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub tag: String,
    pub intervention: Intervention,
    pub evidence: Assignment,
    pub query: Assignment,
}

/// Joint propositions over several worlds that share one noise realization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CounterfactualQuery {
    worlds: Vec<WorldSpec>,
}

impl CounterfactualQuery {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn world(mut self, tag: &str, intervention: Intervention) -> Result<Self> {
        if self.worlds.iter().any(|w| w.tag == tag) {
            return Err(Error::Query(format!("duplicate world tag `{tag}`")));
        }
        self.worlds.push(WorldSpec {
            tag: tag.to_string(),
            intervention,
            evidence: Assignment::empty(),
            query: Assignment::empty(),
        });
        Ok(self)
    }

    pub fn evidence(mut self, tag: &str, a: Assignment) -> Result<Self> {
        let w = self.world_mut(tag)?;
        w.evidence = w
            .evidence
            .merged(&a)
            .ok_or_else(|| Error::Query(format!("contradictory evidence in world `{tag}`")))?;
        Ok(self)
    }

    pub fn query(mut self, tag: &str, a: Assignment) -> Result<Self> {
        let w = self.world_mut(tag)?;
        // A contradictory query is legal and simply has probability zero.
        match w.query.merged(&a) {
            Some(q) => w.query = q,
            None => {
                let mut pairs = w.query.0.clone();
                pairs.extend(a.0);
                w.query = Assignment(pairs);
            }
        }
        Ok(self)
    }

    pub fn worlds(&self) -> &[WorldSpec] {
        &self.worlds
    }

    fn world_mut(&mut self, tag: &str) -> Result<&mut WorldSpec> {
        self.worlds
            .iter_mut()
            .find(|w| w.tag == tag)
            .ok_or_else(|| Error::Query(format!("unknown world tag `{tag}`")))
    }
}

/// Which world carries the factual evidence in [`DiscreteScm::prob_necessity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactualWorld {
    /// The cause is observed under the unintervened model.
    Observed,
    /// The cause was set by intervention (an agent's action).
    Intervened,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScm {
    vars: Vec<Variable>,
    exos: Vec<Exogenous>,
    mechanisms: Vec<Mechanism>,
    order: Vec<usize>,
    roles: Roles,
    noise_radix: Vec<usize>,
    noise_states: usize,
}

impl DiscreteScm {
    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn exogenous(&self) -> &[Exogenous] {
        &self.exos
    }

    pub fn mechanism(&self, var: usize) -> &Mechanism {
        &self.mechanisms[var]
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn noise_state_count(&self) -> usize {
        self.noise_states
    }

    pub fn action(&self) -> usize {
        self.roles.action
    }

    pub fn action_domain_size(&self) -> usize {
        self.vars[self.roles.action].domain.len()
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn exo_index(&self, name: &str) -> Result<usize> {
        self.exos
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn value_index(&self, var: usize, label: &str) -> Result<usize> {
        let v = &self.vars[var];
        v.domain
            .iter()
            .position(|d| d == label)
            .ok_or_else(|| Error::UnknownValue {
                var: v.name.clone(),
                value: label.to_string(),
            })
    }

    pub fn action_index(&self, label: &str) -> Result<usize> {
        self.value_index(self.roles.action, label)
    }

    pub fn action_label(&self, a: usize) -> &str {
        &self.vars[self.roles.action].domain[a]
    }

    /// Builds an assignment from `(name, label)` pairs.
    pub fn assignment(&self, pairs: &[(&str, &str)]) -> Result<Assignment> {
        let mut out = Vec::with_capacity(pairs.len());
        for &(name, label) in pairs {
            let v = self.var_index(name)?;
            out.push((v, self.value_index(v, label)?));
        }
        Ok(Assignment::from_pairs(out))
    }

    pub fn intervention(&self, pairs: &[(&str, &str)]) -> Result<Intervention> {
        self.assignment(pairs).map(Intervention)
    }

    pub fn do_action(&self, a: usize) -> Intervention {
        Intervention::single(self.roles.action, a)
    }

    /// Joint value of the context variables, in role order.
    pub fn context_values(&self, ctx: &Assignment) -> Result<Vec<usize>> {
        self.roles
            .context
            .iter()
            .map(|&v| {
                ctx.get(v).ok_or_else(|| {
                    Error::Query(format!("context is missing `{}`", self.vars[v].name))
                })
            })
            .collect()
    }

    pub fn context_assignment(&self, values: &[usize]) -> Assignment {
        Assignment::from_pairs(self.roles.context.iter().copied().zip(values.iter().copied()))
    }

    pub fn outcome_values(&self, world: &[usize]) -> Vec<usize> {
        self.roles.outcomes.iter().map(|&v| world[v]).collect()
    }

    pub fn labels(&self, vars: &[usize], values: &[usize]) -> Vec<&str> {
        vars.iter()
            .zip(values)
            .map(|(&v, &x)| self.vars[v].domain[x].as_str())
            .collect()
    }

    /// Every joint context value, in row-major order.
    pub fn context_space(&self) -> Vec<Vec<usize>> {
        product_space(&radix_of(&self.vars, &self.roles.context))
    }

    pub fn outcome_space(&self) -> Vec<Vec<usize>> {
        product_space(&radix_of(&self.vars, &self.roles.outcomes))
    }

    /// Whether `descendant` is reachable from `ancestor` along mechanism edges.
    pub fn is_descendant(&self, descendant: usize, ancestor: usize) -> bool {
        descendants(&self.mechanisms, ancestor).contains(&descendant)
    }

    /// Deterministic default action in the given context, if the default
    /// policy puts all its mass on one action there.
    pub fn deterministic_default(&self, ctx: &Assignment) -> Result<Option<usize>> {
        let dist = self.interventional_distribution(&Intervention::none(), ctx)?;
        let m = dist.marginal(&[self.roles.action]);
        let support: Vec<_> = m.iter().filter(|(_, &p)| p > 0.0).collect();
        Ok(match support.as_slice() {
            [(k, _)] => Some(k[0]),
            _ => None,
        })
    }

    fn validate_intervention(&self, iv: &Intervention) -> Result<()> {
        for &(v, x) in iv.0.pairs() {
            let var = self
                .vars
                .get(v)
                .ok_or_else(|| Error::Query(format!("intervention target #{v} does not exist")))?;
            if x >= var.domain.len() {
                return Err(Error::UnknownValue {
                    var: var.name.clone(),
                    value: format!("#{x}"),
                });
            }
        }
        Ok(())
    }

    fn validate_assignment(&self, a: &Assignment, what: &str) -> Result<()> {
        for &(v, x) in a.pairs() {
            let var = self
                .vars
                .get(v)
                .ok_or_else(|| Error::Query(format!("{what} references variable #{v}")))?;
            if x >= var.domain.len() {
                return Err(Error::UnknownValue {
                    var: var.name.clone(),
                    value: format!("#{x}"),
                });
            }
        }
        Ok(())
    }

    /// Evaluates every endogenous variable from a full noise state, with the
    /// intervened variables clamped.
    pub fn evaluate_world(&self, noise: &[usize], iv: &Intervention) -> Result<WorldAssignment> {
        if noise.len() != self.exos.len() {
            return Err(Error::Noise(format!(
                "expected {} exogenous values, got {}",
                self.exos.len(),
                noise.len()
            )));
        }
        for (e, &x) in self.exos.iter().zip(noise) {
            if x >= e.domain.len() {
                return Err(Error::Noise(format!("value #{x} outside domain of `{}`", e.name)));
            }
        }
        self.validate_intervention(iv)?;
        let mut endo = vec![0; self.vars.len()];
        self.eval_into(noise, &self.clamps(iv), &mut endo);
        Ok(WorldAssignment {
            endogenous: endo,
            exogenous: noise.to_vec(),
        })
    }

    pub(crate) fn clamps(&self, iv: &Intervention) -> Vec<Option<usize>> {
        let mut c = vec![None; self.vars.len()];
        for &(v, x) in iv.0.pairs() {
            c[v] = Some(x);
        }
        c
    }

    pub(crate) fn eval_into(&self, noise: &[usize], clamps: &[Option<usize>], out: &mut [usize]) {
        for &v in &self.order {
            out[v] = match clamps[v] {
                Some(x) => x,
                None => self.mechanisms[v].lookup(out, noise),
            };
        }
    }

    pub fn noise_prob(&self, noise: &[usize]) -> f64 {
        self.exos
            .iter()
            .zip(noise)
            .map(|(e, &x)| e.probs[x])
            .product()
    }

    fn decode_noise(&self, mut index: usize) -> Vec<usize> {
        let mut s = vec![0; self.noise_radix.len()];
        for (slot, &r) in s.iter_mut().zip(&self.noise_radix).rev() {
            *slot = index % r;
            index /= r;
        }
        s
    }

    fn advance_noise(&self, s: &mut [usize]) {
        for (slot, &r) in s.iter_mut().zip(&self.noise_radix).rev() {
            *slot += 1;
            if *slot < r {
                return;
            }
            *slot = 0;
        }
    }

    /// Folds `f(acc, noise, P(noise))` over every noise state with positive
    /// probability, in a fixed order that is independent of the thread count.
    pub(crate) fn reduce_noise<A, I, F, M>(&self, init: I, fold: F, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &[usize], f64) + Sync,
        M: Fn(&mut A, A),
    {
        let total = self.noise_states;
        let chunks = total.div_ceil(CHUNK);
        let run = |c: usize| {
            let mut acc = init();
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut state = self.decode_noise(start);
            for _ in start..end {
                let p = self.noise_prob(&state);
                if p > 0.0 {
                    fold(&mut acc, &state, p);
                }
                self.advance_noise(&mut state);
            }
            acc
        };
        let parts: Vec<A> = if chunks <= 1 {
            (0..chunks).map(run).collect()
        } else {
            (0..chunks).into_par_iter().map(run).collect()
        };
        let mut iter = parts.into_iter();
        let mut acc = iter.next().unwrap_or_else(&init);
        for part in iter {
            merge(&mut acc, part);
        }
        acc
    }

    /// Exact distribution of the endogenous variables under `iv`, conditioned
    /// on `condition` (evaluated in the same intervened world).
    pub fn interventional_distribution(
        &self,
        iv: &Intervention,
        condition: &Assignment,
    ) -> Result<JointDistribution> {
        self.validate_intervention(iv)?;
        self.validate_assignment(condition, "condition")?;
        let clamps = self.clamps(iv);
        let n = self.vars.len();
        let (mut entries, mass) = self.reduce_noise(
            || (BTreeMap::<Vec<usize>, f64>::new(), 0.0),
            |(map, mass), noise, p| {
                let mut w = vec![0; n];
                self.eval_into(noise, &clamps, &mut w);
                if condition.matches(&w) {
                    *map.entry(w).or_insert(0.0) += p;
                    *mass += p;
                }
            },
            |(map, mass), (other, m)| {
                for (k, p) in other {
                    *map.entry(k).or_insert(0.0) += p;
                }
                *mass += m;
            },
        );
        if mass <= 0.0 {
            return Err(Error::ZeroProbability(self.describe(condition)));
        }
        for p in entries.values_mut() {
            *p /= mass;
        }
        Ok(JointDistribution { entries })
    }

    /// Probability of the query propositions given the evidence propositions,
    /// all worlds sharing one exogenous realization.
    pub fn counterfactual_joint(&self, query: &CounterfactualQuery) -> Result<f64> {
        if query.worlds.is_empty() {
            return Err(Error::Query("no worlds".into()));
        }
        for w in &query.worlds {
            self.validate_intervention(&w.intervention)?;
            self.validate_assignment(&w.evidence, "evidence")?;
            self.validate_assignment(&w.query, "query")?;
        }
        let clamps: Vec<Vec<Option<usize>>> =
            query.worlds.iter().map(|w| self.clamps(&w.intervention)).collect();
        let n = self.vars.len();
        let (num, den) = self.reduce_noise(
            || (0.0, 0.0),
            |(num, den), noise, p| {
                let mut w = vec![0; n];
                let mut query_ok = true;
                for (spec, c) in query.worlds.iter().zip(&clamps) {
                    self.eval_into(noise, c, &mut w);
                    if !spec.evidence.matches(&w) {
                        return;
                    }
                    query_ok &= spec.query.matches(&w);
                }
                *den += p;
                if query_ok {
                    *num += p;
                }
            },
            |(num, den), (n2, d2)| {
                *num += n2;
                *den += d2;
            },
        );
        let has_evidence = query.worlds.iter().any(|w| !w.evidence.is_empty());
        if has_evidence && den <= 0.0 {
            return Err(Error::ZeroProbability("counterfactual evidence".into()));
        }
        Ok(if has_evidence { num / den } else { num })
    }

    /// `P(e | evidence)` with the evidence evaluated under `iv`.
    pub fn posterior_over_noise(
        &self,
        iv: &Intervention,
        evidence: &Assignment,
    ) -> Result<NoisePosterior> {
        self.validate_intervention(iv)?;
        self.validate_assignment(evidence, "evidence")?;
        let clamps = self.clamps(iv);
        let n = self.vars.len();
        let (mut states, mass) = self.reduce_noise(
            || (Vec::new(), 0.0),
            |(states, mass), noise, p| {
                if !evidence.is_empty() {
                    let mut w = vec![0; n];
                    self.eval_into(noise, &clamps, &mut w);
                    if !evidence.matches(&w) {
                        return;
                    }
                }
                states.push((noise.to_vec(), p));
                *mass += p;
            },
            |(s, m), (s2, m2)| {
                s.extend(s2);
                *m += m2;
            },
        );
        if mass <= 0.0 {
            return Err(Error::ZeroProbability(self.describe(evidence)));
        }
        if !evidence.is_empty() {
            for (_, p) in &mut states {
                *p /= mass;
            }
        }
        Ok(NoisePosterior { states })
    }

    /// `E[value(Y) | do(A=treated), x] - E[value(Y) | do(A=control), x]`.
    pub fn cate(
        &self,
        treated: usize,
        control: usize,
        context: &Assignment,
        value: impl Fn(&[usize]) -> f64,
    ) -> Result<f64> {
        let n = self.action_domain_size();
        if treated >= n || control >= n {
            return Err(Error::InvalidArgument("action outside the action domain".into()));
        }
        let mean = |a: usize| -> Result<f64> {
            let d = self.interventional_distribution(&self.do_action(a), context)?;
            Ok(d.expectation(|w| value(&self.outcome_values(w))))
        };
        Ok(mean(treated)? - mean(control)?)
    }

    /// `P(effect = counter_effect under do(cause = counter_cause) | cause, effect)`.
    pub fn prob_necessity(
        &self,
        cause: (usize, usize),
        effect: (usize, usize),
        counter_cause: usize,
        counter_effect: usize,
        factual: FactualWorld,
    ) -> Result<f64> {
        let (cv, cx) = cause;
        let (ev, ex) = effect;
        let factual_iv = match factual {
            FactualWorld::Observed => Intervention::none(),
            FactualWorld::Intervened => Intervention::single(cv, cx),
        };
        let q = CounterfactualQuery::new()
            .world("factual", factual_iv)?
            .evidence("factual", Assignment::from_pairs([(cv, cx), (ev, ex)]))?
            .world("counterfactual", Intervention::single(cv, counter_cause))?
            .query("counterfactual", Assignment::from_pairs([(ev, counter_effect)]))?;
        self.counterfactual_joint(&q)
    }

    pub(crate) fn describe(&self, a: &Assignment) -> String {
        if a.is_empty() {
            return "empty event".into();
        }
        a.pairs()
            .iter()
            .map(|&(v, x)| format!("{}={}", self.vars[v].name, self.vars[v].domain[x]))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub(crate) fn radix_of(vars: &[Variable], which: &[usize]) -> Vec<usize> {
    which.iter().map(|&v| vars[v].domain.len()).collect()
}

/// Row-major enumeration of a mixed-radix product, last digit fastest.
pub fn product_space(radix: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = radix.iter().product();
    let mut out = Vec::with_capacity(total);
    if total == 0 {
        return out;
    }
    let mut cur = vec![0; radix.len()];
    for _ in 0..total {
        out.push(cur.clone());
        for (slot, &r) in cur.iter_mut().zip(radix).rev() {
            *slot += 1;
            if *slot < r {
                break;
            }
            *slot = 0;
        }
    }
    out
}

fn strides_for(radix: &[usize]) -> Vec<usize> {
    let mut s = vec![1; radix.len()];
    for i in (0..radix.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * radix[i + 1];
    }
    s
}

fn descendants(mechanisms: &[Mechanism], root: usize) -> HashSet<usize> {
    let mut seen = HashSet::new();
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        for (child, m) in mechanisms.iter().enumerate() {
            if m.parents.contains(&v) && seen.insert(child) {
                stack.push(child);
            }
        }
    }
    seen
}

struct PendingMechanism {
    parents: Vec<usize>,
    exo: Vec<usize>,
    table: Vec<usize>,
}

/// Incremental constructor for [`DiscreteScm`]. Variables must be declared
/// before mechanisms refer to them; [`ScmBuilder::build`] checks totality,
/// acyclicity and roles.
#[derive(Default)]
pub struct ScmBuilder {
    vars: Vec<Variable>,
    exos: Vec<Exogenous>,
    mechanisms: BTreeMap<usize, PendingMechanism>,
    roles: Option<(String, Vec<String>, Vec<String>)>,
}

impl ScmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn endogenous<S: Into<String>>(
        &mut self,
        name: &str,
        domain: impl IntoIterator<Item = S>,
    ) -> Result<&mut Self> {
        self.check_fresh(name)?;
        let domain: Vec<String> = domain.into_iter().map(Into::into).collect();
        check_domain(name, &domain)?;
        self.vars.push(Variable {
            name: name.to_string(),
            domain,
        });
        Ok(self)
    }

    pub fn exogenous<S: Into<String>>(
        &mut self,
        name: &str,
        domain: impl IntoIterator<Item = S>,
        probs: &[f64],
    ) -> Result<&mut Self> {
        self.check_fresh(name)?;
        let domain: Vec<String> = domain.into_iter().map(Into::into).collect();
        check_domain(name, &domain)?;
        if domain.len() != probs.len() {
            return Err(Error::InvalidDistribution {
                name: name.to_string(),
                reason: format!("{} values but {} probabilities", domain.len(), probs.len()),
            });
        }
        check_probs(name, probs)?;
        self.exos.push(Exogenous {
            name: name.to_string(),
            domain,
            probs: probs.to_vec(),
        });
        Ok(self)
    }

    /// Exogenous variable with a single value, for deterministic mechanisms
    /// that still name a noise input.
    pub fn degenerate_exogenous(&mut self, name: &str) -> Result<&mut Self> {
        self.exogenous(name, ["*"], &[1.0])
    }

    fn check_fresh(&self, name: &str) -> Result<()> {
        if name.is_empty() {
            return Err(Error::InvalidArgument("empty variable name".into()));
        }
        if self.vars.iter().any(|v| v.name == name) || self.exos.iter().any(|e| e.name == name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    fn endo(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn exo(&self, name: &str) -> Result<usize> {
        self.exos
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Domain sizes of the mechanism inputs (parents, then exogenous).
    pub fn input_radix(&self, parents: &[&str], exo: &[&str]) -> Result<Vec<usize>> {
        let mut r = Vec::new();
        for p in parents {
            r.push(self.vars[self.endo(p)?].domain.len());
        }
        for e in exo {
            r.push(self.exos[self.exo(e)?].domain.len());
        }
        Ok(r)
    }

    /// Domain labels of the mechanism inputs (parents, then exogenous).
    pub fn input_domains(&self, parents: &[&str], exo: &[&str]) -> Result<Vec<Vec<String>>> {
        let mut r = Vec::new();
        for p in parents {
            r.push(self.vars[self.endo(p)?].domain.clone());
        }
        for e in exo {
            r.push(self.exos[self.exo(e)?].domain.clone());
        }
        Ok(r)
    }

    pub fn domain_of(&self, var: &str) -> Result<&[String]> {
        Ok(&self.vars[self.endo(var)?].domain)
    }

    /// Installs a raw table laid out as described on [`Mechanism`].
    pub fn table(
        &mut self,
        var: &str,
        parents: &[&str],
        exo: &[&str],
        table: Vec<usize>,
    ) -> Result<&mut Self> {
        let v = self.endo(var)?;
        if self.mechanisms.contains_key(&v) {
            return Err(Error::Mechanism {
                var: var.to_string(),
                reason: "mechanism already defined".into(),
            });
        }
        let parents_idx = parents
            .iter()
            .map(|p| self.endo(p))
            .collect::<Result<Vec<_>>>()?;
        let exo_idx = exo.iter().map(|e| self.exo(e)).collect::<Result<Vec<_>>>()?;
        let radix = self.input_radix(parents, exo)?;
        let expected: usize = radix.iter().product();
        if table.len() != expected {
            return Err(Error::Mechanism {
                var: var.to_string(),
                reason: format!("table has {} entries, expected {expected}", table.len()),
            });
        }
        let dom = self.vars[v].domain.len();
        if let Some(bad) = table.iter().find(|&&x| x >= dom) {
            return Err(Error::Mechanism {
                var: var.to_string(),
                reason: format!("table value #{bad} outside the domain"),
            });
        }
        self.mechanisms.insert(
            v,
            PendingMechanism {
                parents: parents_idx,
                exo: exo_idx,
                table,
            },
        );
        Ok(self)
    }

    /// Tabulates a mechanism from a function of the input value indices
    /// (parents first, then exogenous inputs).
    pub fn mechanism_fn(
        &mut self,
        var: &str,
        parents: &[&str],
        exo: &[&str],
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<&mut Self> {
        let radix = self.input_radix(parents, exo)?;
        let table = product_space(&radix).iter().map(|inp| f(inp)).collect();
        self.table(var, parents, exo, table)
    }

    /// Like [`ScmBuilder::mechanism_fn`] but over labels, which is how boolean
    /// formulas such as `[e1 = 1] or [e2 = 0]` are easiest to state.
    pub fn mechanism_labels(
        &mut self,
        var: &str,
        parents: &[&str],
        exo: &[&str],
        f: impl Fn(&[&str]) -> String,
    ) -> Result<&mut Self> {
        let domains = self.input_domains(parents, exo)?;
        let radix: Vec<usize> = domains.iter().map(Vec::len).collect();
        let out_dom = self.domain_of(var)?.to_vec();
        let mut table = Vec::new();
        for inp in product_space(&radix) {
            let labels: Vec<&str> = inp
                .iter()
                .zip(&domains)
                .map(|(&i, d)| d[i].as_str())
                .collect();
            let out = f(&labels);
            let idx = out_dom
                .iter()
                .position(|d| *d == out)
                .ok_or_else(|| Error::UnknownValue {
                    var: var.to_string(),
                    value: out.clone(),
                })?;
            table.push(idx);
        }
        self.table(var, parents, exo, table)
    }

    pub fn roles(&mut self, action: &str, context: &[&str], outcomes: &[&str]) -> &mut Self {
        self.roles = Some((
            action.to_string(),
            context.iter().map(|s| s.to_string()).collect(),
            outcomes.iter().map(|s| s.to_string()).collect(),
        ));
        self
    }

    pub fn build(&mut self) -> Result<DiscreteScm> {
        let vars = std::mem::take(&mut self.vars);
        let exos = std::mem::take(&mut self.exos);
        let pending = std::mem::take(&mut self.mechanisms);
        let roles = self.roles.take();
        assemble(vars, exos, pending, roles)
    }
}

fn check_domain(name: &str, domain: &[String]) -> Result<()> {
    if domain.is_empty() {
        return Err(Error::InvalidArgument(format!("`{name}` has an empty domain")));
    }
    let mut seen = HashSet::new();
    for d in domain {
        if !seen.insert(d) {
            return Err(Error::InvalidArgument(format!(
                "`{name}` lists value `{d}` twice"
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_probs(name: &str, probs: &[f64]) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution {
            name: name.to_string(),
            reason: format!("probability {p} is negative or not finite"),
        });
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution {
            name: name.to_string(),
            reason: format!("probabilities sum to {total}"),
        });
    }
    Ok(())
}

fn assemble(
    vars: Vec<Variable>,
    exos: Vec<Exogenous>,
    mut pending: BTreeMap<usize, PendingMechanism>,
    roles: Option<(String, Vec<String>, Vec<String>)>,
) -> Result<DiscreteScm> {
    let mut mechanisms = Vec::with_capacity(vars.len());
    for (i, v) in vars.iter().enumerate() {
        let m = pending.remove(&i).ok_or_else(|| Error::Mechanism {
            var: v.name.clone(),
            reason: "no mechanism defined".into(),
        })?;
        let mut radix = radix_of(&vars, &m.parents);
        radix.extend(m.exo.iter().map(|&e| exos[e].domain.len()));
        mechanisms.push(Mechanism {
            strides: strides_for(&radix),
            parents: m.parents,
            exo: m.exo,
            table: m.table,
        });
    }
    let order = topological_order(&vars, &mechanisms)?;

    let (action, context, outcomes) =
        roles.ok_or_else(|| Error::Roles("no action/context/outcome roles declared".into()))?;
    let find = |n: &str| {
        vars.iter()
            .position(|v| v.name == n)
            .ok_or_else(|| Error::Roles(format!("unknown variable `{n}`")))
    };
    let action = find(&action)?;
    let context = context.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    let outcomes = outcomes.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    if outcomes.is_empty() {
        return Err(Error::Roles("at least one outcome variable is required".into()));
    }
    let desc = descendants(&mechanisms, action);
    for &c in &context {
        if c == action || desc.contains(&c) {
            return Err(Error::Roles(format!(
                "context variable `{}` is a descendant of the action",
                vars[c].name
            )));
        }
    }
    for &y in &outcomes {
        if !desc.contains(&y) {
            return Err(Error::Roles(format!(
                "outcome variable `{}` is not a descendant of the action",
                vars[y].name
            )));
        }
    }
    let mut seen = HashSet::new();
    for &v in context.iter().chain(&outcomes) {
        if !seen.insert(v) {
            return Err(Error::Roles(format!("`{}` has two roles", vars[v].name)));
        }
    }

    let noise_radix: Vec<usize> = exos.iter().map(|e| e.domain.len()).collect();
    let states: u128 = noise_radix.iter().map(|&r| r as u128).product();
    if states > MAX_NOISE_STATES as u128 {
        return Err(Error::Capacity {
            states,
            limit: MAX_NOISE_STATES,
        });
    }
    Ok(DiscreteScm {
        vars,
        exos,
        mechanisms,
        order,
        roles: Roles {
            action,
            context,
            outcomes,
        },
        noise_radix,
        noise_states: states as usize,
    })
}

fn topological_order(vars: &[Variable], mechanisms: &[Mechanism]) -> Result<Vec<usize>> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let n = vars.len();
    let mut mark = vec![0u8; n];
    let mut order = Vec::with_capacity(n);
    let mut path = Vec::new();

    fn visit(
        v: usize,
        mechanisms: &[Mechanism],
        mark: &mut [u8],
        order: &mut Vec<usize>,
        path: &mut Vec<usize>,
    ) -> std::result::Result<(), Vec<usize>> {
        match mark[v] {
            2 => return Ok(()),
            1 => {
                let start = path.iter().position(|&p| p == v).unwrap();
                let mut cycle = path[start..].to_vec();
                cycle.push(v);
                return Err(cycle);
            }
            _ => {}
        }
        mark[v] = 1;
        path.push(v);
        for &p in &mechanisms[v].parents {
            visit(p, mechanisms, mark, order, path)?;
        }
        path.pop();
        mark[v] = 2;
        order.push(v);
        Ok(())
    }

    for v in 0..n {
        if let Err(cycle) = visit(v, mechanisms, &mut mark, &mut order, &mut path) {
            // The path runs child -> parent; report it in causal direction.
            let names: Vec<&str> = cycle.iter().rev().map(|&i| vars[i].name.as_str()).collect();
            return Err(Error::Cycle(names.join(" -> ")));
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::treatment_model;

    fn coin(p1: f64) -> DiscreteScm {
        let mut b = ScmBuilder::new();
        b.endogenous("A", ["0"]).unwrap();
        b.endogenous("Y", ["0", "1"]).unwrap();
        b.exogenous("e", ["0", "1"], &[1.0 - p1, p1]).unwrap();
        b.mechanism_fn("A", &[], &[], |_| 0).unwrap();
        b.mechanism_fn("Y", &["A"], &["e"], |i| i[1]).unwrap();
        b.roles("A", &[], &["Y"]);
        b.build().unwrap()
    }

    #[test]
    fn treatment_world_under_do_t1() {
        let (scm, _) = treatment_model();
        // u_T=*, e1=1, e2=1, e3=0
        let noise = vec![0, 1, 1, 0];
        let iv = scm.intervention(&[("T", "1")]).unwrap();
        let w = scm.evaluate_world(&noise, &iv).unwrap();
        let y = scm.var_index("Y").unwrap();
        assert_eq!(scm.variables()[y].domain[w.endogenous[y]], "1");
    }

    #[test]
    fn full_clamp_returns_the_intervention() {
        let (scm, _) = treatment_model();
        let iv = scm.intervention(&[("T", "2"), ("Y", "0")]).unwrap();
        let w = scm.evaluate_world(&[0, 1, 0, 0], &iv).unwrap();
        assert_eq!(w.endogenous, vec![2, 0]);
    }

    #[test]
    fn evaluate_world_errors() {
        let (scm, _) = treatment_model();
        assert!(matches!(
            scm.evaluate_world(&[0, 1], &Intervention::none()),
            Err(Error::Noise(_))
        ));
        assert!(matches!(
            scm.evaluate_world(&[0, 1, 5, 0], &Intervention::none()),
            Err(Error::Noise(_))
        ));
        assert!(matches!(
            scm.evaluate_world(&[0, 1, 0, 0], &Intervention::single(9, 0)),
            Err(Error::Query(_))
        ));
        assert!(matches!(
            scm.intervention(&[("Z", "1")]),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn point_mass_coin() {
        let scm = coin(1.0);
        let d = scm
            .interventional_distribution(&Intervention::none(), &Assignment::empty())
            .unwrap();
        let y = scm.assignment(&[("Y", "1")]).unwrap();
        assert_eq!(d.prob(&y), 1.0);
    }

    #[test]
    fn treatment_interventional_marginals() {
        let (scm, _) = treatment_model();
        let y1 = scm.assignment(&[("Y", "1")]).unwrap();
        let p = |iv: Intervention| {
            scm.interventional_distribution(&iv, &Assignment::empty())
                .unwrap()
                .prob(&y1)
        };
        assert!((p(Intervention::none()) - 0.5).abs() < 1e-12);
        assert!((p(scm.intervention(&[("T", "2")]).unwrap()) - 0.8).abs() < 1e-12);
        assert!((p(scm.intervention(&[("T", "1")]).unwrap()) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_condition_is_rejected() {
        let (scm, _) = treatment_model();
        let cond = scm.assignment(&[("T", "2")]).unwrap();
        let err = scm.interventional_distribution(&Intervention::none(), &cond);
        assert!(matches!(err, Err(Error::ZeroProbability(_))));
    }

    #[test]
    fn treatment_counterfactual_joints() {
        let (scm, _) = treatment_model();
        let joint = |a: &str, ya: &str, b: &str, yb: &str| {
            let q = CounterfactualQuery::new()
                .world("w1", scm.intervention(&[("T", a)]).unwrap())
                .unwrap()
                .query("w1", scm.assignment(&[("Y", ya)]).unwrap())
                .unwrap()
                .world("w2", scm.intervention(&[("T", b)]).unwrap())
                .unwrap()
                .query("w2", scm.assignment(&[("Y", yb)]).unwrap())
                .unwrap();
            scm.counterfactual_joint(&q).unwrap()
        };
        assert!((joint("0", "1", "2", "0") - 0.1).abs() < 1e-12);
        assert_eq!(joint("0", "1", "1", "0"), 0.0);
        // same intervention, incompatible values
        assert_eq!(joint("2", "1", "2", "0"), 0.0);
    }

    #[test]
    fn query_validation() {
        assert!(CounterfactualQuery::new()
            .world("a", Intervention::none())
            .unwrap()
            .world("a", Intervention::none())
            .is_err());
        assert!(CounterfactualQuery::new()
            .evidence("nope", Assignment::empty())
            .is_err());
        let (scm, _) = treatment_model();
        let q = CounterfactualQuery::new()
            .world("f", Intervention::none())
            .unwrap()
            .evidence("f", scm.assignment(&[("T", "1")]).unwrap())
            .unwrap();
        assert!(matches!(
            scm.counterfactual_joint(&q),
            Err(Error::ZeroProbability(_))
        ));
    }

    #[test]
    fn posterior_after_fatal_t2_is_the_allergic_states() {
        let (scm, _) = treatment_model();
        let post = scm
            .posterior_over_noise(
                &scm.intervention(&[("T", "2")]).unwrap(),
                &scm.assignment(&[("Y", "0")]).unwrap(),
            )
            .unwrap();
        let e3 = scm.exo_index("e3").unwrap();
        assert_eq!(post.states.len(), 4);
        assert!(post.states.iter().all(|(s, _)| scm.exogenous()[e3].domain[s[e3]] == "1"));
        let total: f64 = post.states.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_evidence_returns_prior() {
        let (scm, _) = treatment_model();
        let post = scm
            .posterior_over_noise(&Intervention::none(), &Assignment::empty())
            .unwrap();
        assert_eq!(post.states.len(), 8);
        for (s, p) in &post.states {
            assert_eq!(*p, scm.noise_prob(s));
        }
    }

    #[test]
    fn cate_values() {
        let (scm, _) = treatment_model();
        let value = |y: &[usize]| y[0] as f64;
        let t = |l: &str| scm.action_index(l).unwrap();
        let ctx = Assignment::empty();
        let c10 = scm.cate(t("1"), t("0"), &ctx, value).unwrap();
        let c20 = scm.cate(t("2"), t("0"), &ctx, value).unwrap();
        assert!((c10 - 0.3).abs() < 1e-12);
        assert!((c10 - c20).abs() < 1e-12);
        assert_eq!(scm.cate(t("2"), t("2"), &ctx, value).unwrap(), 0.0);
        assert!(scm.cate(7, 0, &ctx, value).is_err());
    }

    fn two_var(copy: bool) -> DiscreteScm {
        let mut b = ScmBuilder::new();
        b.endogenous("X", ["F", "T"]).unwrap();
        b.endogenous("Y", ["F", "T"]).unwrap();
        b.exogenous("ex", ["0", "1"], &[0.3, 0.7]).unwrap();
        b.exogenous("ey", ["0", "1"], &[0.6, 0.4]).unwrap();
        b.mechanism_fn("X", &[], &["ex"], |i| i[0]).unwrap();
        if copy {
            b.mechanism_fn("Y", &["X"], &["ey"], |i| i[0]).unwrap();
        } else {
            b.mechanism_fn("Y", &["X"], &["ey"], |i| i[1]).unwrap();
        }
        b.roles("X", &[], &["Y"]);
        b.build().unwrap()
    }

    #[test]
    fn prob_necessity_extremes() {
        let pn = |scm: &DiscreteScm| {
            scm.prob_necessity((0, 1), (1, 1), 0, 0, FactualWorld::Observed)
                .unwrap()
        };
        assert_eq!(pn(&two_var(true)), 1.0);
        assert_eq!(pn(&two_var(false)), 0.0);
    }

    #[test]
    fn builder_rejects_bad_models() {
        let mut b = ScmBuilder::new();
        b.endogenous("A", ["0", "1"]).unwrap();
        assert!(b.exogenous("e", ["0", "1"], &[0.5, 0.6]).is_err());
        assert!(b.exogenous("e", ["0", "1"], &[-0.5, 1.5]).is_err());
        assert!(b.endogenous("A", ["x"]).is_err());

        let mut b = ScmBuilder::new();
        b.endogenous("A", ["0", "1"]).unwrap();
        b.endogenous("B", ["0", "1"]).unwrap();
        b.endogenous("C", ["0", "1"]).unwrap();
        b.mechanism_fn("A", &["C"], &[], |i| i[0]).unwrap();
        b.mechanism_fn("B", &["A"], &[], |i| i[0]).unwrap();
        b.mechanism_fn("C", &["B"], &[], |i| i[0]).unwrap();
        b.roles("A", &[], &["B"]);
        match b.build() {
            Err(Error::Cycle(c)) => {
                assert!(c.contains("A") && c.contains("B") && c.contains("C"), "{c}")
            }
            other => panic!("expected a cycle error, got {other:?}"),
        }
    }

    #[test]
    fn roles_are_checked() {
        let mut b = ScmBuilder::new();
        b.endogenous("A", ["0", "1"]).unwrap();
        b.endogenous("Y", ["0", "1"]).unwrap();
        b.mechanism_fn("A", &[], &[], |_| 0).unwrap();
        b.mechanism_fn("Y", &[], &[], |_| 0).unwrap();
        b.roles("A", &[], &["Y"]);
        assert!(matches!(b.build(), Err(Error::Roles(_))));
    }

    #[test]
    fn capacity_limit() {
        let mut b = ScmBuilder::new();
        b.endogenous("A", ["0"]).unwrap();
        b.endogenous("Y", ["0"]).unwrap();
        let names: Vec<String> = (0..25).map(|i| format!("e{i}")).collect();
        for n in &names {
            b.exogenous(n, ["0", "1"], &[0.5, 0.5]).unwrap();
        }
        b.mechanism_fn("A", &[], &[], |_| 0).unwrap();
        b.mechanism_fn("Y", &["A"], &[], |_| 0).unwrap();
        b.roles("A", &[], &["Y"]);
        assert!(matches!(b.build(), Err(Error::Capacity { .. })));
    }

    #[test]
    fn product_space_is_row_major() {
        assert_eq!(
            product_space(&[2, 3]),
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![0, 2],
                vec![1, 0],
                vec![1, 1],
                vec![1, 2]
            ]
        );
        assert_eq!(product_space(&[]), vec![Vec::<usize>::new()]);
    }
}
