//! Minimum expected per-symbol distortion for real-time joint source-channel coding
//! with encoder lookahead.
//!
//! Each coding scenario is compiled into a finite (or belief-discretized)
//! average-reward MDP and solved by relative value iteration. Action-cost
//! constrained variants go through a Lagrangian dual. Analytic endpoints and a
//! Monte Carlo simulator serve as independent checks.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod bounds;
pub mod coding;
pub mod error;
pub mod experiment;
pub mod limits;
pub mod lookahead;
pub mod mdp;
pub mod models;
pub mod par;
pub mod sim;

pub use error::{Error, Result, ValidationReport};
pub use limits::Limits;
