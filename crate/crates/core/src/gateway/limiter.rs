//! Sliding-window tokens-per-minute limiter.
//!
//! The ledger holds timestamped expenditures, including reservations granted
//! for a future instant. A grant at `t` is allowed only if every half-open
//! window `[s, s + 60 s)` that contains `t` stays within budget once the new
//! tokens are added. Callers whose request fits are never held up by a caller
//! that is waiting on its own reservation.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use thiserror::Error;

use super::clock::Clock;

pub const DEFAULT_TPM: u64 = 10_000;
pub const WINDOW: Duration = Duration::from_secs(60);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RateLimitError {
    #[error("request of {tokens} tokens can never fit a budget of {budget} tokens per window")]
    ExceedsBudget { tokens: u64, budget: u64 },
}

/// The unsynchronized ledger. [`RateLimiter`] wraps it for shared use.
#[derive(Debug, Clone)]
pub struct TokenLedger {
    budget: u64,
    window: Duration,
    /// Sorted by time.
    entries: Vec<(Duration, u64)>,
}

impl TokenLedger {
    pub fn new(budget: u64) -> Self {
        Self::with_window(budget, WINDOW)
    }

    pub fn with_window(budget: u64, window: Duration) -> Self {
        Self {
            budget,
            window,
            entries: Vec::new(),
        }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn entries(&self) -> &[(Duration, u64)] {
        &self.entries
    }

    /// Drops entries that can no longer share a window with any time ≥ `now`.
    pub fn prune(&mut self, now: Duration) {
        let window = self.window;
        self.entries.retain(|&(t, _)| t + window > now);
    }

    fn sum_in(&self, from: Duration, to: Duration, include_from: bool) -> u64 {
        self.entries
            .iter()
            .filter(|&&(t, _)| (if include_from { t >= from } else { t > from }) && t < to)
            .map(|&(_, n)| n)
            .sum()
    }

    /// Whether `tokens` recorded at `t` keeps every window containing `t` in budget.
    pub fn fits_at(&self, t: Duration, tokens: u64) -> bool {
        // Windows containing t start in (t - w, t]. The worst ones start either
        // just after t - w or exactly at an entry inside that range.
        let lower = t.checked_sub(self.window);
        let tail = match lower {
            Some(lo) => self.sum_in(lo, t + Duration::from_nanos(1), false),
            None => self.sum_in(Duration::ZERO, t + Duration::from_nanos(1), true),
        };
        if tail + tokens > self.budget {
            return false;
        }
        self.entries
            .iter()
            .filter(|&&(e, _)| e <= t && lower.is_none_or(|lo| e > lo))
            .all(|&(e, _)| self.sum_in(e, e + self.window, true) + tokens <= self.budget)
    }

    /// Earliest instant at or after `now` where `tokens` fits.
    pub fn earliest_fit(&self, now: Duration, tokens: u64) -> Result<Duration, RateLimitError> {
        if tokens > self.budget {
            return Err(RateLimitError::ExceedsBudget {
                tokens,
                budget: self.budget,
            });
        }
        if self.fits_at(now, tokens) {
            return Ok(now);
        }
        // Feasibility only changes where an entry enters or leaves the span
        // of windows around t.
        let mut candidates: Vec<Duration> = self
            .entries
            .iter()
            .flat_map(|&(e, _)| [Some(e + self.window), Some(e), e.checked_sub(self.window)])
            .flatten()
            .filter(|&c| c > now)
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        Ok(candidates
            .into_iter()
            .find(|&c| self.fits_at(c, tokens))
            .expect("a time past every entry's window always fits"))
    }

    pub fn record(&mut self, at: Duration, tokens: u64) {
        let pos = self.entries.partition_point(|&(t, _)| t <= at);
        self.entries.insert(pos, (at, tokens));
    }
}

/// Shared, internally synchronized limiter.
pub struct RateLimiter {
    ledger: Mutex<TokenLedger>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn new(budget: u64, clock: Arc<dyn Clock>) -> Self {
        Self {
            ledger: Mutex::new(TokenLedger::new(budget)),
            clock,
        }
    }

    pub fn budget(&self) -> u64 {
        self.ledger.lock().expect("ledger lock").budget()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Reserves `tokens` at the earliest fitting instant, then sleeps until it.
    /// Returns the grant time.
    pub fn acquire(&self, tokens: u64) -> Result<Duration, RateLimitError> {
        let grant = {
            let mut ledger = self.ledger.lock().expect("ledger lock");
            let now = self.clock.now();
            ledger.prune(now);
            let at = ledger.earliest_fit(now, tokens)?;
            ledger.record(at, tokens);
            at
        };
        self.clock.sleep_until(grant);
        Ok(grant)
    }
}

impl std::fmt::Debug for RateLimiter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateLimiter")
            .field("ledger", &self.ledger)
            .finish_non_exhaustive()
    }
}

/// Brute-force check over a grant log: every half-open window starting at a
/// grant stays within budget. The heaviest window always starts at a grant.
pub fn max_window_load(grants: &[(Duration, u64)], window: Duration) -> u64 {
    grants
        .iter()
        .map(|&(s, _)| {
            grants
                .iter()
                .filter(|&&(t, _)| t >= s && t < s + window)
                .map(|&(_, n)| n)
                .sum()
        })
        .max()
        .unwrap_or(0)
}
