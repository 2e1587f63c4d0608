//! Lagrangian relaxation of a single average-cost constraint and its dual.

use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate_policy_reward, EvalOptions};
use super::rvi::{relative_value_iteration_from, RviOptions};
use super::{FiniteMdp, SolveResult};
use crate::error::{Error, Result};

/// Maximize the average of `g` subject to the average of `l` staying at most `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedMdp {
    pub base: FiniteMdp,
    /// `l[s * A + a]`.
    pub constraint_cost: Vec<f64>,
    pub budget: f64,
}

impl ConstrainedMdp {
    pub fn new(base: FiniteMdp, constraint_cost: Vec<f64>, budget: f64) -> Result<Self> {
        if constraint_cost.len() != base.rewards().len() {
            return Err(Error::invalid("constraint table does not match the MDP"));
        }
        if constraint_cost.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::invalid("constraint costs must be finite and nonnegative"));
        }
        if !budget.is_finite() || budget < 0.0 {
            return Err(Error::invalid(format!("invalid budget {budget}")));
        }
        Ok(ConstrainedMdp { base, constraint_cost, budget })
    }

    /// `(max g - min g) / (smallest positive l)`, or 1 when no action costs anything.
    pub fn default_lambda_max(&self) -> f64 {
        let g = self.base.rewards();
        let range = g.iter().copied().fold(f64::NEG_INFINITY, f64::max) - g.iter().copied().fold(f64::INFINITY, f64::min);
        match self.constraint_cost.iter().copied().filter(|&l| l > 0.0).reduce(f64::min) {
            Some(c) if range > 0.0 => range / c,
            _ => 1.0,
        }
    }
}

/// `g^λ(s, a) = g(s, a) + λ (Γ - l(s, a))` with unchanged dynamics.
pub fn lagrangian_mdp(cmdp: &ConstrainedMdp, lambda: f64) -> Result<FiniteMdp> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("multiplier λ = {lambda} must be nonnegative")));
    }
    let reward = cmdp
        .base
        .rewards()
        .iter()
        .zip(&cmdp.constraint_cost)
        .map(|(g, l)| g + lambda * (cmdp.budget - l))
        .collect();
    cmdp.base.with_rewards(reward)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualOptions {
    /// Upper end of the multiplier bracket; [`ConstrainedMdp::default_lambda_max`] when unset.
    pub lambda_max: Option<f64>,
    /// Golden-section stops once the bracket is narrower than `dual_tol · max(1, λ_max)`.
    pub dual_tol: f64,
    /// Doublings of `λ_max` tried while the dual still descends at the bracket end.
    pub max_expansions: usize,
    pub rvi: RviOptions,
}

impl Default for DualOptions {
    fn default() -> Self {
        DualOptions { lambda_max: None, dual_tol: 1e-10, max_expansions: 8, rvi: RviOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub lambda_star: f64,
    /// `min_λ d(λ)` where `d(λ)` is the optimal gain of the Lagrangian MDP.
    pub dual_value: f64,
    pub gain_at_lambda_star: f64,
    /// Average constraint cost of the Lagrangian-optimal policy at `λ*`.
    pub avg_constraint_cost: f64,
    pub policy: Vec<usize>,
    pub lambda_max: f64,
    /// Set when the minimizer sits at the end of the (possibly expanded) bracket.
    pub bracket_warning: bool,
    pub evaluations: usize,
}

struct DualEval<'a> {
    cmdp: &'a ConstrainedMdp,
    rvi: RviOptions,
    last_bias: Option<Vec<f64>>,
    evaluations: usize,
    best: Option<(f64, f64, SolveResult)>,
}

impl DualEval<'_> {
    fn eval(&mut self, lambda: f64) -> Result<f64> {
        let mdp = lagrangian_mdp(self.cmdp, lambda)?;
        let r = relative_value_iteration_from(&mdp, &self.rvi, self.last_bias.as_deref())?;
        self.evaluations += 1;
        self.last_bias = Some(r.bias.clone());
        let value = r.gain;
        let better = match &self.best {
            None => true,
            Some((l, v, _)) => value < *v || (value == *v && lambda < *l),
        };
        if better {
            self.best = Some((lambda, value, r));
        }
        Ok(value)
    }
}

/// Dual value `d(λ)`: the optimal gain of the Lagrangian MDP.
pub fn dual_function(cmdp: &ConstrainedMdp, lambda: f64, rvi: &RviOptions) -> Result<SolveResult> {
    relative_value_iteration_from(&lagrangian_mdp(cmdp, lambda)?, rvi, None)
}

/// Smallest achievable average constraint cost.
pub fn min_average_cost(cmdp: &ConstrainedMdp, rvi: &RviOptions) -> Result<f64> {
    let mdp = cmdp.base.with_rewards(cmdp.constraint_cost.iter().map(|l| -l).collect())?;
    Ok(-relative_value_iteration_from(&mdp, rvi, None)?.gain)
}

/// Minimizes the convex dual `d(λ)` over `[0, λ_max]` by golden-section search.
pub fn constrained_solve(cmdp: &ConstrainedMdp, opts: &DualOptions) -> Result<DualSolution> {
    let mut lambda_max = opts.lambda_max.unwrap_or_else(|| cmdp.default_lambda_max());
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::invalid(format!("λ_max = {lambda_max} must be positive")));
    }
    let mut ev = DualEval { cmdp, rvi: opts.rvi, last_bias: None, evaluations: 0, best: None };
    let d0 = ev.eval(0.0)?;
    let mut d_end = ev.eval(lambda_max)?;
    let mut descending = d_end < d0 && {
        let probe = ev.eval(lambda_max * (1.0 - 1e-3))?;
        d_end < probe - 1e-12
    };
    let mut expansions = 0;
    while descending && expansions < opts.max_expansions {
        expansions += 1;
        let prev = d_end;
        lambda_max *= 2.0;
        d_end = ev.eval(lambda_max)?;
        descending = d_end < prev - 1e-12;
    }

    let width_tol = opts.dual_tol * lambda_max.max(1.0);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, lambda_max);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = ev.eval(c)?;
    let mut fd = ev.eval(d)?;
    for _ in 0..400 {
        if b - a < width_tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ev.eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ev.eval(d)?;
        }
    }

    let evaluations = ev.evaluations;
    let (lambda_star, dual_value, solve) = ev.best.take().ok_or_else(|| Error::Internal("dual never evaluated".into()))?;
    let at_lambda = lagrangian_mdp(cmdp, lambda_star)?;
    let avg_constraint_cost =
        evaluate_policy_reward(&at_lambda, &solve.policy, &cmdp.constraint_cost, &EvalOptions::default())?.gain;
    Ok(DualSolution {
        lambda_star,
        dual_value,
        gain_at_lambda_star: solve.gain,
        avg_constraint_cost,
        policy: solve.policy,
        lambda_max,
        bracket_warning: lambda_star >= lambda_max * (1.0 - 1e-6) && descending,
        evaluations,
    })
}
