//! Gain of a fixed stationary policy, per recurrent class.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::FiniteMdp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// L1 change below which power iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Classes up to this size are solved directly by LU.
    pub direct_limit: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { tol: 1e-13, max_iter: 1_000_000, direct_limit: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    /// Best class gain.
    pub gain: f64,
    pub class_gains: Vec<f64>,
    /// Recurrent classes, each sorted by state index, ordered by smallest member.
    pub classes: Vec<Vec<usize>>,
    /// Set when recurrent classes disagree on the gain by more than `1e-9`.
    pub decomposed: bool,
}

pub fn evaluate_policy(mdp: &FiniteMdp, policy: &[usize], opts: &EvalOptions) -> Result<PolicyEvaluation> {
    let reward: Vec<f64> = check_policy(mdp, policy)?.map(|s| mdp.reward(s, policy[s])).collect();
    evaluate_with(mdp, policy, &reward, opts)
}

/// Long-run average of an arbitrary per-`(s, a)` quantity (e.g. a constraint cost).
pub fn evaluate_policy_reward(
    mdp: &FiniteMdp,
    policy: &[usize],
    reward: &[f64],
    opts: &EvalOptions,
) -> Result<PolicyEvaluation> {
    if reward.len() != mdp.num_states() * mdp.num_actions() {
        return Err(Error::invalid("reward table does not match the MDP"));
    }
    let a_count = mdp.num_actions();
    let r: Vec<f64> = check_policy(mdp, policy)?.map(|s| reward[s * a_count + policy[s]]).collect();
    evaluate_with(mdp, policy, &r, opts)
}

fn check_policy(mdp: &FiniteMdp, policy: &[usize]) -> Result<std::ops::Range<usize>> {
    if policy.len() != mdp.num_states() {
        return Err(Error::invalid(format!("policy has {} entries, expected {}", policy.len(), mdp.num_states())));
    }
    if let Some(s) = policy.iter().position(|&a| a >= mdp.num_actions()) {
        return Err(Error::invalid(format!("policy action {} at state {s} is out of range", policy[s])));
    }
    Ok(0..mdp.num_states())
}

fn evaluate_with(mdp: &FiniteMdp, policy: &[usize], reward: &[f64], opts: &EvalOptions) -> Result<PolicyEvaluation> {
    let classes = recurrent_classes(mdp, policy);
    let mut class_gains = Vec::with_capacity(classes.len());
    for class in &classes {
        let pi = stationary(mdp, policy, class, opts)?;
        class_gains.push(pi.iter().zip(class).map(|(p, &s)| p * reward[s]).sum());
    }
    let gain = class_gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let low = class_gains.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PolicyEvaluation { gain, class_gains, classes, decomposed: gain - low > 1e-9 })
}

/// Closed strongly connected components of the policy's chain.
pub fn recurrent_classes(mdp: &FiniteMdp, policy: &[usize]) -> Vec<Vec<usize>> {
    let n = mdp.num_states();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for s in 0..n {
        for &t in mdp.row(s, policy[s]).0 {
            graph.add_edge(nodes[s], nodes[t as usize], ());
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut comp = vec![0usize; n];
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            comp[node.index()] = c;
        }
    }
    let mut out: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, scc)| {
            scc.iter().all(|node| {
                let s = node.index();
                mdp.row(s, policy[s]).0.iter().all(|&t| comp[t as usize] == *c)
            })
        })
        .map(|(_, scc)| {
            let mut members: Vec<usize> = scc.iter().map(|n| n.index()).collect();
            members.sort_unstable();
            members
        })
        .collect();
    out.sort_by_key(|c| c[0]);
    out
}

fn stationary(mdp: &FiniteMdp, policy: &[usize], class: &[usize], opts: &EvalOptions) -> Result<Vec<f64>> {
    let k = class.len();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let pos = |s: usize| class.binary_search(&s).expect("closed class");
    if k <= opts.direct_limit {
        // Solve π (P - I) = 0 with the last equation replaced by Σ π = 1.
        let mut a = DMatrix::<f64>::zeros(k, k);
        for (i, &s) in class.iter().enumerate() {
            let (next, prob) = mdp.row(s, policy[s]);
            for (&t, &p) in next.iter().zip(prob) {
                a[(pos(t as usize), i)] += p;
            }
            a[(i, i)] -= 1.0;
        }
        for j in 0..k {
            a[(k - 1, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(k);
        b[k - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Internal("singular stationary system on a recurrent class".into()))?;
        let mut pi: Vec<f64> = pi.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= total);
        return Ok(pi);
    }
    let mut pi = vec![1.0 / k as f64; k];
    let mut next_pi = vec![0.0; k];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        next_pi.iter_mut().zip(&pi).for_each(|(n, p)| *n = 0.5 * p);
        for (i, &s) in class.iter().enumerate() {
            let (next, prob) = mdp.row(s, policy[s]);
            for (&t, &p) in next.iter().zip(prob) {
                next_pi[pos(t as usize)] += 0.5 * pi[i] * p;
            }
        }
        residual = next_pi.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next_pi);
        if residual < opts.tol {
            return Ok(pi);
        }
    }
    Err(Error::PowerIteration { iterations: opts.max_iter, residual })
}
