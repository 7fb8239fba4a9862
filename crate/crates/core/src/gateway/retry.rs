use std::time::Duration;

use rand::Rng;

/// Exponential backoff with full jitter: the wait after attempt `n` is drawn
/// uniformly from `[0, base * factor^(n-1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base: Duration::from_secs(2),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the wait after failed attempt `attempt` (1-based).
    pub fn nominal_delay(&self, attempt: u32) -> Duration {
        let exp = attempt.saturating_sub(1).min(30) as i32;
        self.base.mul_f64(self.factor.powi(exp))
    }

    pub fn jittered_delay<R: Rng + ?Sized>(&self, attempt: u32, rng: &mut R) -> Duration {
        self.nominal_delay(attempt).mul_f64(rng.gen_range(0.0..=1.0))
    }
}
