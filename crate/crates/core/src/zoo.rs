//! Canonical models with known reference values: the three-treatment trial,
//! the investment assistant and the shooting/fireball preemption MDP.

use crate::error::{Error, Result};
use crate::harm::{HarmEngine, UtilityTable};
use crate::hetanm::{closed_form_expected_harm, HarmInputs, HetAnm};
use crate::scm::{DiscreteScm, ScmBuilder};

/// A computed value next to its reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCheck {
    pub name: String,
    pub computed: f64,
    pub reference: f64,
    pub tolerance: f64,
}

impl ReferenceCheck {
    pub fn new(name: impl Into<String>, computed: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            computed,
            reference,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        (self.computed - self.reference).abs() <= self.tolerance
    }
}

/// Placebo (T=0) and two treatments over three independent patient traits:
/// robust to the disease (e1), resistant to treatment 1 (e2), allergic to
/// treatment 2 (e3). The default policy never treats; `U(a, y) = y`.
pub fn treatment_model() -> (DiscreteScm, UtilityTable) {
    fn build() -> Result<(DiscreteScm, UtilityTable)> {
        let mut b = ScmBuilder::new();
        b.endogenous("T", ["0", "1", "2"])?
            .endogenous("Y", ["0", "1"])?
            .degenerate_exogenous("u_T")?
            .exogenous("e1", ["0", "1"], &[0.5, 0.5])?
            .exogenous("e2", ["0", "1"], &[0.6, 0.4])?
            .exogenous("e3", ["0", "1"], &[0.8, 0.2])?;
        b.mechanism_labels("T", &[], &["u_T"], |_| "0".into())?;
        b.mechanism_labels("Y", &["T"], &["e1", "e2", "e3"], |v| {
            let recovers = match v[0] {
                "0" => v[1] == "1",
                "1" => v[1] == "1" || v[2] == "0",
                _ => v[3] == "0",
            };
            if recovers { "1" } else { "0" }.into()
        })?;
        b.roles("T", &[], &["Y"]);
        let scm = b.build()?;
        let util = UtilityTable::from_fn(&scm, |_, _, y| y[0] as f64)?;
        Ok((scm, util))
    }
    build().expect("treatment model is well formed")
}

pub fn treatment_checks() -> Result<Vec<ReferenceCheck>> {
    let (scm, util) = treatment_model();
    let engine = HarmEngine::new(&scm, &util)?;
    let r = engine.report(&[], 0.0)?;
    let s = |l: &str| -> Result<&crate::harm::ActionStats> { Ok(&r.actions[scm.action_index(l)?]) };
    Ok(vec![
        ReferenceCheck::new("E[Y_0]", s("0")?.expected_utility, 0.5, 1e-12),
        ReferenceCheck::new("E[Y_1]", s("1")?.expected_utility, 0.8, 1e-12),
        ReferenceCheck::new("E[Y_2]", s("2")?.expected_utility, 0.8, 1e-12),
        ReferenceCheck::new("expected_harm(T=1)", s("1")?.expected_harm, 0.0, 1e-12),
        ReferenceCheck::new("expected_harm(T=2)", s("2")?.expected_harm, 0.1, 1e-12),
        ReferenceCheck::new("expected_benefit(T=1)", s("1")?.expected_benefit, 0.3, 1e-12),
        ReferenceCheck::new("expected_benefit(T=2)", s("2")?.expected_benefit, 0.4, 1e-12),
    ])
}

/// Investment assistant: the baseline return is `N(mean, sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssistantSpec {
    pub mean: f64,
    pub sd: f64,
    pub principal: f64,
    pub bonus: f64,
    pub k_max: f64,
}

impl Default for AssistantSpec {
    fn default() -> Self {
        Self {
            mean: 100.0,
            sd: 100.0,
            principal: 80.0,
            bonus: 10.0,
            k_max: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssistantAction {
    /// Action 1: multiply the return by `K`.
    Scale(f64),
    /// Action 2: a sure `+bonus` on the return.
    AddBonus,
    /// Action 3: cancel, returning the principal.
    Cancel,
}

impl AssistantAction {
    pub fn number(&self) -> u8 {
        match self {
            AssistantAction::Scale(_) => 1,
            AssistantAction::AddBonus => 2,
            AssistantAction::Cancel => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Agent {
    ExpectedReturn,
    RiskAverse(f64),
    HarmAverse(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssistantDecision {
    pub action: AssistantAction,
    pub objective: f64,
    pub expected_return: f64,
}

impl AssistantSpec {
    /// The three actions share the market noise; leaving the investment
    /// alone (`K = 1`) is the default.
    pub fn model(&self) -> HetAnm<AssistantAction> {
        let s = *self;
        HetAnm::new(
            move |a: &AssistantAction| match *a {
                AssistantAction::Scale(k) => s.mean * k,
                AssistantAction::AddBonus => s.mean + s.bonus,
                AssistantAction::Cancel => s.principal,
            },
            AssistantAction::Scale(1.0),
        )
        .with_noise(move |a: &AssistantAction| match *a {
            AssistantAction::Scale(k) => s.sd * k,
            AssistantAction::AddBonus => s.sd,
            AssistantAction::Cancel => 0.0,
        })
    }

    pub fn expected_return(&self, a: AssistantAction) -> f64 {
        self.model().mean(&a)
    }

    pub fn variance(&self, a: AssistantAction) -> f64 {
        self.model().variance(&a)
    }

    pub fn expected_harm(&self, a: AssistantAction) -> Result<f64> {
        self.model().expected_harm(&a)
    }

    pub fn decide(&self, agent: Agent) -> Result<AssistantDecision> {
        let model = self.model();
        let candidates: Vec<(AssistantAction, f64)> = match agent {
            Agent::ExpectedReturn => [
                AssistantAction::Scale(self.k_max),
                AssistantAction::AddBonus,
                AssistantAction::Cancel,
            ]
            .into_iter()
            .map(|a| (a, model.mean(&a)))
            .collect(),
            Agent::RiskAverse(lambda) => {
                check_lambda(lambda)?;
                let k = if lambda == 0.0 {
                    self.k_max
                } else {
                    (self.mean / (2.0 * lambda * self.sd * self.sd)).clamp(0.0, self.k_max)
                };
                [
                    AssistantAction::Scale(k),
                    AssistantAction::AddBonus,
                    AssistantAction::Cancel,
                ]
                .into_iter()
                .map(|a| (a, model.mean(&a) - lambda * model.variance(&a)))
                .collect()
            }
            Agent::HarmAverse(lambda) => {
                check_lambda(lambda)?;
                // The HPU of action 1 is piecewise linear in K with a kink at
                // the default K = 1, so the optimum is at 0, 1 or k_max.
                let mut c = Vec::new();
                for a in [
                    AssistantAction::Scale(0.0),
                    AssistantAction::Scale(1.0),
                    AssistantAction::Scale(self.k_max),
                    AssistantAction::AddBonus,
                    AssistantAction::Cancel,
                ] {
                    c.push((a, model.mean(&a) - lambda * model.expected_harm(&a)?));
                }
                c
            }
        };
        let (action, objective) = candidates
            .into_iter()
            .fold(None, |best: Option<(AssistantAction, f64)>, (a, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((a, v)),
            })
            .expect("candidate list is non-empty");
        Ok(AssistantDecision {
            action,
            objective,
            expected_return: model.mean(&action),
        })
    }

    /// Harm of action 1 per unit of `K` above the default (`K > 1`).
    pub fn harm_slope_above_default(&self) -> f64 {
        closed_form_expected_harm(HarmInputs { delta_u: self.mean, s: self.sd })
    }

    /// Harm of action 1 per unit of `K` below the default (`K < 1`).
    pub fn harm_slope_below_default(&self) -> f64 {
        closed_form_expected_harm(HarmInputs { delta_u: -self.mean, s: self.sd })
    }

    /// Risk aversion above which the risk-averse agent's interior optimum of
    /// action 1 falls below cancelling.
    pub fn risk_averse_cancel_threshold(&self) -> f64 {
        self.mean * self.mean / (4.0 * self.principal * self.sd * self.sd)
    }

    /// Risk aversion below which the interior action-1 value beats action 2
    /// (the smaller root of `mean^2 / (4 l sd^2) = mean + bonus - l sd^2`).
    pub fn risk_averse_scale_vs_bonus_threshold(&self) -> f64 {
        let v = self.sd * self.sd;
        let m = self.mean + self.bonus;
        let c = self.mean * self.mean / (4.0 * v);
        (m - (m * m - 4.0 * v * c).sqrt()) / (2.0 * v)
    }

    /// Harm aversion at which the slope of action 1's HPU in `K > 1` changes sign.
    pub fn harm_averse_slope_threshold(&self) -> f64 {
        self.mean / self.harm_slope_above_default()
    }

    /// Harm aversion at which `K = k_max` and action 2 have equal HPU.
    pub fn harm_averse_switch_threshold(&self) -> f64 {
        (self.mean * self.k_max - self.mean - self.bonus)
            / (self.harm_slope_above_default() * (self.k_max - 1.0))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "aversion parameter must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

pub fn assistant_decision(agent: Agent) -> Result<AssistantDecision> {
    AssistantSpec::default().decide(agent)
}

pub fn assistant_checks() -> Result<Vec<ReferenceCheck>> {
    let spec = AssistantSpec::default();
    let a1 = spec.decide(Agent::ExpectedReturn)?;
    let k = match a1.action {
        AssistantAction::Scale(k) => k,
        _ => f64::NAN,
    };
    Ok(vec![
        ReferenceCheck::new("agent 1 K", k, 20.0, 0.0),
        ReferenceCheck::new("harm slope K>1", spec.harm_slope_above_default(), 8.332, 5e-4),
        ReferenceCheck::new(
            "agent 2 action1/action3 switch",
            spec.risk_averse_cancel_threshold(),
            0.003125,
            1e-12,
        ),
        ReferenceCheck::new(
            "agent 2 action1/action2 crossing",
            spec.risk_averse_scale_vs_bonus_threshold(),
            0.0032,
            5e-5,
        ),
        ReferenceCheck::new(
            "agent 3 K slope sign change",
            spec.harm_averse_slope_threshold(),
            12.002,
            1e-3,
        ),
        ReferenceCheck::new(
            "agent 3 action1/action2 switch",
            spec.harm_averse_switch_threshold(),
            11.93,
            0.05,
        ),
    ])
}

/// Alice may shoot Bob at t=1; a fireball arrives at t=2 regardless.
/// Outcomes are Bob's states at t=1 and t=2; utility is the number of time
/// steps Bob is alive, including t=0.
pub fn preemption_model() -> (DiscreteScm, UtilityTable) {
    fn build() -> Result<(DiscreteScm, UtilityTable)> {
        let mut b = ScmBuilder::new();
        for v in ["A", "F", "B0", "B1", "B2"] {
            b.endogenous(v, ["0", "1"])?;
        }
        b.mechanism_fn("A", &[], &[], |_| 0)?;
        b.mechanism_fn("F", &[], &[], |_| 1)?;
        b.mechanism_fn("B0", &[], &[], |_| 1)?;
        b.mechanism_fn("B1", &["B0", "A"], &[], |i| i[0] & (1 - i[1]))?;
        b.mechanism_fn("B2", &["B1", "F"], &[], |i| i[0] & (1 - i[1]))?;
        b.roles("A", &[], &["B1", "B2"]);
        let scm = b.build()?;
        let util = UtilityTable::from_fn(&scm, |_, _, y| 1.0 + (y[0] + y[1]) as f64)?;
        Ok((scm, util))
    }
    build().expect("preemption model is well formed")
}

/// Expected harm of shooting.
pub fn preemption_harm() -> Result<f64> {
    let (scm, util) = preemption_model();
    HarmEngine::new(&scm, &util)?.expected_harm(scm.action_index("1")?, &[])
}

pub fn preemption_checks() -> Result<Vec<ReferenceCheck>> {
    let (scm, util) = preemption_model();
    let engine = HarmEngine::new(&scm, &util)?;
    let r = engine.report(&[], 0.0)?;
    let shoot = &r.actions[scm.action_index("1")?];
    let wait = &r.actions[scm.action_index("0")?];
    Ok(vec![
        ReferenceCheck::new("E[U(T)]", r.default_expected_utility, 2.0, 0.0),
        ReferenceCheck::new("E[U(T)_{A=1}]", shoot.expected_utility, 1.0, 0.0),
        ReferenceCheck::new("expected_harm(A=1)", shoot.expected_harm, 1.0, 0.0),
        ReferenceCheck::new("expected_harm(A=0)", wait.expected_harm, 0.0, 0.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn treatment_reference_values() {
        for c in treatment_checks().unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn treatment_decomposition_is_exact() {
        let (scm, util) = treatment_model();
        let r = HarmEngine::new(&scm, &util).unwrap().report(&[], 0.0).unwrap();
        assert!(r.max_residual() <= 1e-12);
    }

    #[test]
    fn agent_one_maximizes_k() {
        let d = assistant_decision(Agent::ExpectedReturn).unwrap();
        assert_eq!(d.action, AssistantAction::Scale(20.0));
        assert_eq!(d.expected_return, 2000.0);
    }

    #[test]
    fn agent_two_thresholds() {
        let spec = AssistantSpec::default();
        assert_eq!(spec.risk_averse_cancel_threshold(), 0.003125);
        assert_eq!(spec.decide(Agent::RiskAverse(0.0031)).unwrap().action.number(), 1);
        assert_eq!(spec.decide(Agent::RiskAverse(0.0032)).unwrap().action, AssistantAction::Cancel);
        assert!(spec.decide(Agent::RiskAverse(-1.0)).is_err());
    }

    #[test]
    fn agent_two_first_order_condition() {
        let spec = AssistantSpec::default();
        for &lambda in &[0.0003, 0.001, 0.003, 0.01, 0.5] {
            let k = 1.0 / (200.0 * lambda);
            let grad = spec.mean - 2.0 * spec.sd * spec.sd * k * lambda;
            assert!(grad.abs() < 1e-8);
            if k <= spec.k_max {
                match spec.decide(Agent::RiskAverse(lambda)).unwrap().action {
                    AssistantAction::Scale(kk) => assert!((kk - k).abs() < 1e-9),
                    other => assert!(lambda > 0.003125, "{other:?} at {lambda}"),
                }
            }
        }
    }

    #[test]
    fn agent_three_switch() {
        let spec = AssistantSpec::default();
        assert_eq!(spec.decide(Agent::HarmAverse(5.0)).unwrap().action, AssistantAction::Scale(20.0));
        assert_eq!(spec.decide(Agent::HarmAverse(20.0)).unwrap().action, AssistantAction::AddBonus);
        assert!((spec.harm_averse_switch_threshold() - 11.93).abs() < 0.05);
        assert!((spec.harm_averse_slope_threshold() - 12.002).abs() < 1e-3);
    }

    #[test]
    fn below_default_slope_is_the_derived_value() {
        // Independent evaluation of E[max(0, 100 eps + 100)] ... reported as
        // 108.33 per unit of (1 - K).
        let spec = AssistantSpec::default();
        assert!((spec.harm_slope_below_default() - 108.33).abs() < 5e-3);
        let h = spec.expected_harm(AssistantAction::Scale(0.5)).unwrap();
        assert!((h - 0.5 * spec.harm_slope_below_default()).abs() < 1e-9);
    }

    #[test]
    fn assistant_reference_values() {
        for c in assistant_checks().unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn preemption() {
        assert_eq!(preemption_harm().unwrap(), 1.0);
        for c in preemption_checks().unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }
}
