//! Finite average-reward MDPs and their solvers.
//!
//! Transitions live in a compressed sparse row table behind an [`Arc`], so several
//! MDPs that differ only in their reward tables (decoder enumeration, Lagrangian
//! multipliers) share one copy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod constrained;
pub mod evaluate;
pub mod exhaustive;
pub mod rvi;

pub use constrained::{
    constrained_solve, dual_function, lagrangian_mdp, min_average_cost, ConstrainedMdp, DualOptions, DualSolution,
};
pub use evaluate::{evaluate_policy, evaluate_policy_reward, EvalOptions, PolicyEvaluation};
pub use exhaustive::{exhaustive_policy_search, ExhaustiveResult};
pub use rvi::{relative_value_iteration, relative_value_iteration_from, RviOptions};

/// Row-sum tolerance accepted by [`TransitionBuilder::push_row`] before renormalizing.
const BUILD_ROW_TOL: f64 = 1e-9;

/// Sparse `P(s' | s, a)`, rows ordered by `s * A + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    num_states: usize,
    num_actions: usize,
    offsets: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
}

impl Transitions {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> (&[u32], &[f64]) {
        let r = s * self.num_actions + a;
        let (lo, hi) = (self.offsets[r], self.offsets[r + 1]);
        (&self.next[lo..hi], &self.prob[lo..hi])
    }

    pub fn nonzeros(&self) -> usize {
        self.prob.len()
    }
}

/// Accumulates transition rows in `(s, a)` order.
#[derive(Debug)]
pub struct TransitionBuilder {
    num_states: usize,
    num_actions: usize,
    offsets: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
    scratch: Vec<(u32, f64)>,
}

impl TransitionBuilder {
    pub fn new(num_states: usize, num_actions: usize) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::invalid("an MDP needs at least one state and one action"));
        }
        if num_states > u32::MAX as usize {
            return Err(Error::capacity("MDP states", num_states as u128, u32::MAX as u128));
        }
        let mut offsets = Vec::with_capacity(num_states * num_actions + 1);
        offsets.push(0);
        Ok(TransitionBuilder {
            num_states,
            num_actions,
            offsets,
            next: Vec::new(),
            prob: Vec::new(),
            scratch: Vec::new(),
        })
    }

    /// Appends the next row; duplicate targets are merged and zero entries dropped.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
        let row = self.offsets.len() - 1;
        if row >= self.num_states * self.num_actions {
            return Err(Error::Internal("too many transition rows".into()));
        }
        self.scratch.clear();
        for (s, p) in entries {
            if s >= self.num_states || !p.is_finite() || p < 0.0 {
                return Err(Error::Internal(format!("bad transition entry ({s}, {p}) in row {row}")));
            }
            if p > 0.0 {
                self.scratch.push((s as u32, p));
            }
        }
        self.scratch.sort_by_key(|e| e.0);
        let start = self.prob.len();
        for &(s, p) in &self.scratch {
            if self.next.len() > start && *self.next.last().unwrap() == s {
                *self.prob.last_mut().unwrap() += p;
            } else {
                self.next.push(s);
                self.prob.push(p);
            }
        }
        let total: f64 = self.prob[start..].iter().sum();
        if (total - 1.0).abs() > BUILD_ROW_TOL {
            return Err(Error::Internal(format!(
                "transition row {row} (state {}, action {}) sums to {total}",
                row / self.num_actions,
                row % self.num_actions
            )));
        }
        self.prob[start..].iter_mut().for_each(|p| *p /= total);
        self.offsets.push(self.prob.len());
        Ok(())
    }

    pub fn finish(self) -> Result<Transitions> {
        if self.offsets.len() != self.num_states * self.num_actions + 1 {
            return Err(Error::Internal(format!(
                "expected {} transition rows, got {}",
                self.num_states * self.num_actions,
                self.offsets.len() - 1
            )));
        }
        Ok(Transitions {
            num_states: self.num_states,
            num_actions: self.num_actions,
            offsets: self.offsets,
            next: self.next,
            prob: self.prob,
        })
    }
}

/// Finite MDP with a uniform action set; `reward[s * A + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    transitions: Arc<Transitions>,
    reward: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(transitions: Arc<Transitions>, reward: Vec<f64>) -> Result<Self> {
        let expected = transitions.num_states * transitions.num_actions;
        if reward.len() != expected {
            return Err(Error::invalid(format!("reward table has {} entries, expected {expected}", reward.len())));
        }
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::invalid(format!("non-finite reward at row {i}")));
        }
        Ok(FiniteMdp { transitions, reward })
    }

    /// `p[s][a][s']` and `r[s][a]`.
    pub fn from_dense(p: &[Vec<Vec<f64>>], r: &[Vec<f64>]) -> Result<Self> {
        let s_count = p.len();
        let a_count = p.first().map_or(0, Vec::len);
        let mut b = TransitionBuilder::new(s_count, a_count)?;
        for (s, rows) in p.iter().enumerate() {
            if rows.len() != a_count || r.get(s).is_none_or(|x| x.len() != a_count) {
                return Err(Error::invalid(format!("state {s} does not have {a_count} actions")));
            }
            for row in rows {
                if row.len() != s_count {
                    return Err(Error::invalid(format!("transition row of state {s} has wrong width")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > crate::models::SIMPLEX_TOL {
                    return Err(Error::invalid(format!("non-stochastic transition row at state {s}")));
                }
                b.push_row(row.iter().copied().enumerate())?;
            }
        }
        FiniteMdp::new(Arc::new(b.finish()?), r.iter().flatten().copied().collect())
    }

    pub fn num_states(&self) -> usize {
        self.transitions.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.num_actions
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.transitions.num_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> (&[u32], &[f64]) {
        self.transitions.row(s, a)
    }

    pub fn transitions(&self) -> &Arc<Transitions> {
        &self.transitions
    }

    /// Same dynamics, new reward table.
    pub fn with_rewards(&self, reward: Vec<f64>) -> Result<Self> {
        FiniteMdp::new(Arc::clone(&self.transitions), reward)
    }
}

/// Outcome of relative value iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub policy: Vec<usize>,
    pub iterations: usize,
    pub final_span: f64,
    pub gain_lower: f64,
    pub gain_upper: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_merges_and_normalizes() {
        let mut b = TransitionBuilder::new(3, 1).unwrap();
        b.push_row([(1, 0.25), (1, 0.25), (2, 0.5), (0, 0.0)]).unwrap();
        b.push_row([(0, 1.0)]).unwrap();
        b.push_row([(2, 0.5), (0, 0.5)]).unwrap();
        let t = b.finish().unwrap();
        assert_eq!(t.row(0, 0), (&[1u32, 2][..], &[0.5, 0.5][..]));
        assert_eq!(t.row(2, 0).0, &[0, 2]);
        assert_eq!(t.nonzeros(), 5);
    }

    #[test]
    fn builder_rejects_bad_rows() {
        let mut b = TransitionBuilder::new(2, 1).unwrap();
        assert!(b.push_row([(0, 0.5)]).is_err());
        let mut b = TransitionBuilder::new(2, 1).unwrap();
        b.push_row([(0, 1.0)]).unwrap();
        assert!(b.finish().is_err());
    }

    #[test]
    fn dense_construction_checks_stochasticity() {
        let bad = FiniteMdp::from_dense(&[vec![vec![0.9]]], &[vec![1.0]]);
        assert!(bad.is_err());
        let ok = FiniteMdp::from_dense(&[vec![vec![1.0], vec![1.0]]], &[vec![1.0, 2.0]]).unwrap();
        assert_eq!(ok.num_actions(), 2);
        assert_eq!(ok.reward(0, 1), 2.0);
    }
}
