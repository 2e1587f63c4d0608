use std::fmt;

use thiserror::Error;

/// Every violated invariant found while checking a problem description.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn push(&mut self, issue: impl Into<String>) {
        self.issues.push(issue.into());
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.issues.iter().any(|i| i.contains(needle))
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.issues.join("; "))
    }
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(ValidationReport),

    #[error("capacity exceeded: {what} = {count} is above the limit {limit}")]
    Capacity { what: String, count: u128, limit: u128 },

    #[error("unreachable observation: {0}")]
    UnreachableObservation(String),

    #[error("unreachable transition: {0}")]
    UnreachableTransition(String),

    #[error(
        "relative value iteration did not converge after {iterations} sweeps \
         (span {span:.3e}, gain bracket [{lower}, {upper}])"
    )]
    NonConvergence { iterations: usize, span: f64, lower: f64, upper: f64 },

    #[error("power iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    PowerIteration { iterations: usize, residual: f64 },

    #[error("alternating optimization did not converge: {0}")]
    AlternatingOptimization(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(ValidationReport { issues: vec![msg.into()] })
    }

    pub(crate) fn capacity(what: impl Into<String>, count: u128, limit: u128) -> Self {
        Error::Capacity { what: what.into(), count, limit }
    }

    pub fn is_nonconvergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::PowerIteration { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
