use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable that overrides [`Limits::max_states`].
pub const MAX_STATES_ENV: &str = "RTC_MAX_STATES";

/// Capacity guards applied by every enumeration-based builder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// Largest state count (tuple states, or full MDP states) a builder may create.
    pub max_states: u128,
    /// Largest action count per state.
    pub max_actions: u128,
    /// Largest number of decoder tables (times vending maps) enumerated by a scenario solve.
    pub max_tables: u128,
    /// Largest number of stationary policies enumerated by the exhaustive oracle.
    pub max_policies: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_states: 1_000_000,
            max_actions: 65_536,
            max_tables: 4096,
            max_policies: 1_000_000,
        }
    }
}

impl Limits {
    /// Defaults, with `max_states` taken from `RTC_MAX_STATES` when set.
    pub fn from_env() -> Result<Self> {
        let mut limits = Limits::default();
        if let Ok(raw) = std::env::var(MAX_STATES_ENV) {
            limits.max_states = raw.trim().parse().map_err(|_| {
                Error::Config(format!("{MAX_STATES_ENV}={raw:?} is not a nonnegative integer"))
            })?;
        }
        Ok(limits)
    }

    pub(crate) fn check_states(&self, what: &str, count: u128) -> Result<()> {
        check(what, count, self.max_states)
    }

    pub(crate) fn check_actions(&self, what: &str, count: u128) -> Result<()> {
        check(what, count, self.max_actions)
    }

    pub(crate) fn check_tables(&self, what: &str, count: u128) -> Result<()> {
        check(what, count, self.max_tables)
    }
}

pub(crate) fn check(what: &str, count: u128, limit: u128) -> Result<()> {
    if count > limit {
        Err(Error::capacity(what, count, limit))
    } else {
        Ok(())
    }
}

/// `base^exp` without overflow; saturates at `u128::MAX`.
pub(crate) fn checked_pow(base: usize, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base as u128) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}
