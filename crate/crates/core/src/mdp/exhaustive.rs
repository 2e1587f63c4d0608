use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate_policy, EvalOptions};
use super::FiniteMdp;
use crate::error::{Error, Result};
use crate::limits::{check, checked_pow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    pub policy: Vec<usize>,
    pub gain: f64,
    pub policies_evaluated: u128,
}

/// Brute force over all `A^S` stationary deterministic policies.
///
/// Each policy is scored by its best recurrent-class gain. The first policy in
/// lexicographic order wins ties.
pub fn exhaustive_policy_search(mdp: &FiniteMdp, limit: u128) -> Result<ExhaustiveResult> {
    let (s_count, a_count) = (mdp.num_states(), mdp.num_actions());
    let total = checked_pow(a_count, s_count);
    check("stationary policies A^S", total, limit)?;
    let opts = EvalOptions::default();
    let mut policy = vec![0usize; s_count];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let gain = evaluate_policy(mdp, &policy, &opts)?.gain;
        if best.as_ref().is_none_or(|(_, g)| gain > g + 1e-12) {
            best = Some((policy.clone(), gain));
        }
        let mut k = s_count;
        loop {
            if k == 0 {
                let (policy, gain) = best.ok_or_else(|| Error::Internal("no policy evaluated".into()))?;
                return Ok(ExhaustiveResult { policy, gain, policies_evaluated: total });
            }
            k -= 1;
            policy[k] += 1;
            if policy[k] < a_count {
                break;
            }
            policy[k] = 0;
        }
    }
}
