//! Compilers from coding scenarios to finite MDPs, plus decoder enumeration.
//!
//! Encoder actions are maps from lookahead tuples to channel inputs. When the
//! encoder knows the current tuple, only the slice of the map at the known prefix
//! `(u_2, ..., u_{d+1})` affects the next step, so the finite-memory builders use
//! slice actions `ũ -> x` (`|X|^{|U|}` of them). The complete-memory builder feeds
//! the whole map into the decoder's belief update and keeps full maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::mdp::RviOptions;

pub mod feedback;
pub mod grid;
pub mod memory;
pub mod nofeedback;
pub mod report;
pub mod vending;

pub use feedback::{
    build_feedback_complete_discretized, build_feedback_finite, solve_feedback_complete, solve_feedback_finite,
    CompleteOptions,
};
pub use grid::{simplex_grid, SimplexGrid};
pub use memory::{memory_last_m, MemorySpec};
pub use nofeedback::{build_nofeedback_finite, solve_nofeedback};
pub use report::{Diagnostics, Parameters, Scenario, ScenarioSolveReport};
pub use vending::{
    build_vending_feedback_finite, build_vending_nofeedback_discretized, solve_vending_feedback,
    solve_vending_nofeedback, VendingMemories, VendingMode,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub limits: Limits,
    pub rvi: RviOptions,
}

/// Digit `pos` (0 = most significant) of `index` written with `len` base-`base` digits.
#[inline]
pub fn digit(index: usize, base: usize, len: usize, pos: usize) -> usize {
    let mut div = 1;
    for _ in pos + 1..len {
        div *= base;
    }
    (index / div) % base
}

/// All `len` digits of `index`, most significant first.
pub fn table_digits(index: usize, base: usize, len: usize) -> Vec<usize> {
    (0..len).map(|p| digit(index, base, len, p)).collect()
}

/// Inverse of [`table_digits`].
pub fn table_index(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

/// Outcome of one enumerated candidate: `None` when it was ruled out (e.g. infeasible).
pub(crate) type CandidateResult<T> = Result<Option<(f64, T)>>;

pub(crate) struct Best<T> {
    pub index: usize,
    pub payload: T,
    pub skipped: u64,
    pub nonconverged: u64,
}

/// Smallest value wins; values within `1e-12` keep the earlier index.
/// Non-converged candidates are skipped and counted; other errors propagate.
pub(crate) fn pick_min<T>(results: Vec<CandidateResult<T>>) -> Result<Best<T>> {
    let mut best: Option<(usize, f64, T)> = None;
    let mut skipped = 0;
    let mut nonconverged = 0;
    let mut last_err = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(Some((value, payload))) => {
                if best.as_ref().is_none_or(|(_, v, _)| value < v - 1e-12) {
                    best = Some((i, value, payload));
                }
            }
            Ok(None) => skipped += 1,
            Err(e) if e.is_nonconvergence() => {
                skipped += 1;
                nonconverged += 1;
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((index, _, payload)) => Ok(Best { index, payload, skipped, nonconverged }),
        None => Err(last_err.unwrap_or_else(|| Error::Internal("no admissible candidate".into()))),
    }
}
