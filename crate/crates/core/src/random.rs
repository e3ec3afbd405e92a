//! Random discrete models for property checks.

use rand::Rng;

use crate::adversary::{outcome_dependent, ActionUtilities};
use crate::error::{Error, Result};
use crate::harm::{TableShape, UtilityTable};
use crate::scm::{DiscreteScm, ScmBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomModelConfig {
    pub max_vars: usize,
    pub max_values: usize,
    /// Probability that the default policy depends on noise.
    pub stochastic_default: f64,
}

impl Default for RandomModelConfig {
    fn default() -> Self {
        Self {
            max_vars: 4,
            max_values: 3,
            stochastic_default: 0.5,
        }
    }
}

fn random_probs<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
    // Put the rounding residue on the last entry so the sum is 1 to an ulp.
    let head: f64 = p[..n - 1].iter().sum();
    p[n - 1] = 1.0 - head;
    p
}

/// A random model over 2..=`max_vars` endogenous variables with
/// 2..=`max_values` values each, in variable order: an optional context
/// variable, the action, then later variables with random earlier parents.
/// Each variable has a private exogenous input (the action only when the
/// default is stochastic). Outcomes are the action's first child plus a
/// random subset of its other descendants; utilities are uniform on `[0, 1)`.
pub fn random_model<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &RandomModelConfig,
) -> Result<(DiscreteScm, UtilityTable)> {
    let max_vars = cfg.max_vars.max(2);
    let max_values = cfg.max_values.max(2);
    let n = rng.random_range(2..=max_vars);
    let n_ctx = if n > 2 { rng.random_range(0..=1) } else { 0 };
    let action = n_ctx;
    let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();

    let mut b = ScmBuilder::new();
    for name in &names {
        let k = rng.random_range(2..=max_values);
        b.endogenous(name, (0..k).map(|v| v.to_string()))?;
    }
    for i in 0..n {
        let m = rng.random_range(2..=max_values);
        let probs = random_probs(rng, m);
        b.exogenous(&format!("U{i}"), (0..m).map(|v| v.to_string()), &probs)?;
    }

    let mut descends = vec![false; n];
    for i in 0..n {
        let mut parents: Vec<usize> = (0..i).filter(|_| rng.random_bool(0.5)).collect();
        if i == action + 1 && !parents.contains(&action) {
            parents.push(action);
            parents.sort_unstable();
        }
        descends[i] = parents.iter().any(|&p| p == action || descends[p]);
        let parent_names: Vec<&str> = parents.iter().map(|&p| names[p].as_str()).collect();
        let exo_name = format!("U{i}");
        let exo: Vec<&str> = if i == action && !rng.random_bool(cfg.stochastic_default) {
            Vec::new()
        } else {
            vec![exo_name.as_str()]
        };
        let size = b.domain_of(&names[i])?.len();
        let len: usize = b.input_radix(&parent_names, &exo)?.iter().product();
        let table = (0..len).map(|_| rng.random_range(0..size)).collect();
        b.table(&names[i], &parent_names, &exo, table)?;
    }

    let ctx: Vec<&str> = names[..n_ctx].iter().map(String::as_str).collect();
    let mut outcomes = vec![names[action + 1].as_str()];
    for i in action + 2..n {
        if descends[i] && rng.random_bool(0.5) {
            outcomes.push(&names[i]);
        }
    }
    b.roles(&names[action], &ctx, &outcomes);
    let scm = b.build()?;
    let shape = TableShape::of(&scm);
    let values = (0..shape.len()).map(|_| rng.random::<f64>()).collect();
    Ok((scm, UtilityTable::from_values(shape, values)?))
}

/// Uniform `[0, 1)` utilities over `actions` x `outcomes`, redrawn until the
/// utility is outcome dependent for all actions.
pub fn random_outcome_dependent_utilities<R: Rng + ?Sized>(
    rng: &mut R,
    actions: usize,
    outcomes: usize,
) -> Result<ActionUtilities> {
    if outcomes < 2 {
        return Err(Error::InvalidArgument("need at least two outcomes".into()));
    }
    let all: Vec<usize> = (0..actions).collect();
    loop {
        let values = (0..actions)
            .map(|_| (0..outcomes).map(|_| rng.random::<f64>()).collect())
            .collect();
        let au = ActionUtilities::from_values(values)?;
        if outcome_dependent(&au, &all) {
            return Ok(au);
        }
    }
}

/// Uniform `[0, 1)` values of the same shape, e.g. a factual objective.
pub fn random_action_values<R: Rng + ?Sized>(
    rng: &mut R,
    actions: usize,
    outcomes: usize,
) -> Result<ActionUtilities> {
    ActionUtilities::from_values(
        (0..actions)
            .map(|_| (0..outcomes).map(|_| rng.random::<f64>()).collect())
            .collect(),
    )
}
