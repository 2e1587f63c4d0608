//! Relative value iteration for average-reward MDPs.
//!
//! Each sweep applies the aperiodicity transform
//! `T h(s) = τ h(s) + max_a [g(s,a) + (1 - τ) Σ P(s'|s,a) h(s')]`,
//! which has the same gain and maximizers as the plain operator but converges on
//! periodic chains too. The reported bias is rescaled back to the plain equation.

use serde::{Deserialize, Serialize};

use super::{FiniteMdp, SolveResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RviOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub ref_state: usize,
    /// Self-loop weight `τ` of the aperiodicity transform, in `[0, 1)`.
    pub damping: f64,
}

impl Default for RviOptions {
    fn default() -> Self {
        RviOptions { tol: 1e-9, max_iter: 1_000_000, ref_state: 0, damping: 0.5 }
    }
}

/// Relative tolerance under which two action values count as tied.
const TIE_TOL: f64 = 1e-12;

pub fn relative_value_iteration(mdp: &FiniteMdp, opts: &RviOptions) -> Result<SolveResult> {
    relative_value_iteration_from(mdp, opts, None)
}

/// As [`relative_value_iteration`], starting from a previous (rescaled) bias.
pub fn relative_value_iteration_from(
    mdp: &FiniteMdp,
    opts: &RviOptions,
    start: Option<&[f64]>,
) -> Result<SolveResult> {
    let n = mdp.num_states();
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("RVI tolerance must be positive"));
    }
    if opts.ref_state >= n {
        return Err(Error::invalid(format!("reference state {} outside 0..{n}", opts.ref_state)));
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::invalid("RVI damping must lie in [0, 1)"));
    }
    let tau = opts.damping;
    let keep = 1.0 - tau;

    let mut h = match start {
        Some(s) if s.len() == n => s.iter().map(|x| x / keep).collect(),
        _ => vec![0.0; n],
    };
    let mut w = vec![0.0; n];
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);

    for iter in 1..=opts.max_iter {
        sweep(mdp, &h, keep, &mut w);
        lo = f64::INFINITY;
        hi = f64::NEG_INFINITY;
        for s in 0..n {
            let next = tau * h[s] + w[s];
            let diff = next - h[s];
            lo = lo.min(diff);
            hi = hi.max(diff);
            w[s] = next;
        }
        let offset = w[opts.ref_state];
        for s in 0..n {
            h[s] = w[s] - offset;
        }
        if hi - lo < opts.tol {
            let policy = greedy(mdp, &h, keep);
            return Ok(SolveResult {
                gain: 0.5 * (lo + hi),
                bias: h.iter().map(|x| x * keep).collect(),
                policy,
                iterations: iter,
                final_span: hi - lo,
                gain_lower: lo,
                gain_upper: hi,
            });
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, span: hi - lo, lower: lo, upper: hi })
}

/// `w[s] = max_a [g(s,a) + keep · Σ P h]`.
fn sweep(mdp: &FiniteMdp, h: &[f64], keep: f64, w: &mut [f64]) {
    let a_count = mdp.num_actions();
    for (s, ws) in w.iter_mut().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for a in 0..a_count {
            let q = q_value(mdp, h, keep, s, a);
            if q > best {
                best = q;
            }
        }
        *ws = best;
    }
}

#[inline]
fn q_value(mdp: &FiniteMdp, h: &[f64], keep: f64, s: usize, a: usize) -> f64 {
    let (next, prob) = mdp.row(s, a);
    let mut acc = 0.0;
    for (&t, &p) in next.iter().zip(prob) {
        acc += p * h[t as usize];
    }
    mdp.reward(s, a) + keep * acc
}

/// Per-state argmax; near-ties go to the smallest action index.
fn greedy(mdp: &FiniteMdp, h: &[f64], keep: f64) -> Vec<usize> {
    (0..mdp.num_states())
        .map(|s| {
            let q: Vec<f64> = (0..mdp.num_actions()).map(|a| q_value(mdp, h, keep, s, a)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = TIE_TOL * (1.0 + best.abs());
            q.iter().position(|&x| x >= best - slack).unwrap_or(0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state_picks_larger_reward() {
        let mdp = FiniteMdp::from_dense(&[vec![vec![1.0], vec![1.0]]], &[vec![1.0, 2.0]]).unwrap();
        let r = relative_value_iteration(&mdp, &RviOptions::default()).unwrap();
        assert!((r.gain - 2.0).abs() < 1e-12);
        assert_eq!(r.policy, vec![1]);
    }

    #[test]
    fn period_two_cycle() {
        let mdp = FiniteMdp::from_dense(
            &[vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            &[vec![0.0], vec![1.0]],
        )
        .unwrap();
        let r = relative_value_iteration(&mdp, &RviOptions::default()).unwrap();
        assert!((r.gain - 0.5).abs() < 1e-9);
        assert!(r.final_span < 1e-9);
    }

    #[test]
    fn ties_go_to_smallest_action() {
        let mdp = FiniteMdp::from_dense(&[vec![vec![1.0], vec![1.0], vec![1.0]]], &[vec![0.0, 3.0, 3.0]]).unwrap();
        assert_eq!(relative_value_iteration(&mdp, &RviOptions::default()).unwrap().policy, vec![1]);
    }

    #[test]
    fn bias_solves_the_optimality_equation() {
        let mdp = FiniteMdp::from_dense(
            &[
                vec![vec![0.2, 0.8, 0.0], vec![0.0, 0.5, 0.5]],
                vec![vec![0.3, 0.3, 0.4], vec![1.0, 0.0, 0.0]],
                vec![vec![0.0, 0.0, 1.0], vec![0.6, 0.2, 0.2]],
            ],
            &[vec![1.0, 0.5], vec![0.0, 2.0], vec![-1.0, 0.3]],
        )
        .unwrap();
        let r = relative_value_iteration(&mdp, &RviOptions { tol: 1e-12, ..RviOptions::default() }).unwrap();
        for s in 0..3 {
            let best = (0..2)
                .map(|a| {
                    let (nx, pr) = mdp.row(s, a);
                    mdp.reward(s, a) + nx.iter().zip(pr).map(|(&t, &p)| p * r.bias[t as usize]).sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((r.gain + r.bias[s] - best).abs() < 1e-9);
        }
    }

    #[test]
    fn shifting_rewards_shifts_gain() {
        let mdp = FiniteMdp::from_dense(
            &[vec![vec![0.5, 0.5], vec![0.1, 0.9]], vec![vec![0.7, 0.3], vec![0.0, 1.0]]],
            &[vec![0.1, 0.4], vec![0.9, -0.2]],
        )
        .unwrap();
        let base = relative_value_iteration(&mdp, &RviOptions::default()).unwrap();
        let shifted = mdp.with_rewards(mdp.rewards().iter().map(|r| r + 3.5).collect()).unwrap();
        let moved = relative_value_iteration(&shifted, &RviOptions::default()).unwrap();
        assert!((moved.gain - base.gain - 3.5).abs() < 1e-9);
    }

    #[test]
    fn multichain_reports_nonconvergence() {
        let mdp = FiniteMdp::from_dense(
            &[vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            &[vec![0.0], vec![1.0]],
        )
        .unwrap();
        let err = relative_value_iteration(&mdp, &RviOptions { max_iter: 50, ..RviOptions::default() }).unwrap_err();
        assert!(err.is_nonconvergence());
    }

    #[test]
    fn rejects_bad_options() {
        let mdp = FiniteMdp::from_dense(&[vec![vec![1.0]]], &[vec![1.0]]).unwrap();
        assert!(relative_value_iteration(&mdp, &RviOptions { tol: 0.0, ..RviOptions::default() }).is_err());
        assert!(relative_value_iteration(&mdp, &RviOptions { ref_state: 3, ..RviOptions::default() }).is_err());
    }
}
