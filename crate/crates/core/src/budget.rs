//! Norm-evaluation budgets for exhaustive searches.

use std::cell::Cell;

use crate::{Error, Result};

/// Default number of norm evaluations a single search call may spend.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_BUDGET`].
pub const BUDGET_ENV: &str = "GREEDY_APPROX_BUDGET";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub per_call: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            per_call: DEFAULT_BUDGET,
        }
    }
}

impl Budget {
    pub fn new(per_call: u64) -> Self {
        Budget { per_call }
    }

    /// Default budget, honouring the environment override when it parses.
    pub fn from_env() -> Self {
        std::env::var(BUDGET_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .map(Budget::new)
            .unwrap_or_default()
    }

    pub fn meter(&self) -> Meter {
        Meter::new(self.per_call)
    }
}

/// Per-call evaluation counter.
#[derive(Debug)]
pub struct Meter {
    used: Cell<u64>,
    limit: u64,
}

impl Meter {
    pub fn new(limit: u64) -> Self {
        Meter {
            used: Cell::new(0),
            limit,
        }
    }

    pub fn unlimited() -> Self {
        Meter::new(u64::MAX)
    }

    /// Fails before any work when a search would need more than the limit.
    pub fn reserve(&self, needed: u64) -> Result<()> {
        let total = self.used.get().saturating_add(needed);
        if total > self.limit {
            return Err(Error::Budget {
                needed: total,
                limit: self.limit,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn charge(&self, n: u64) -> Result<()> {
        let total = self.used.get().saturating_add(n);
        self.used.set(total);
        if total > self.limit {
            return Err(Error::Budget {
                needed: total,
                limit: self.limit,
            });
        }
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meter_trips_at_limit() {
        let m = Meter::new(10);
        m.charge(6).unwrap();
        assert!(m.reserve(4).is_ok());
        assert!(m.reserve(5).unwrap_err().is_budget());
        assert!(m.charge(5).is_err());
        assert_eq!(m.used(), 11);
    }
}
