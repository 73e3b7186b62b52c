//! Empirical Type I / Type II error estimates with Wilson score intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `errors` successes out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // the interval always contains p; clamp away rounding at the edges
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub errors: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ErrorEstimate {
    pub fn from_counts(errors: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, trials, Z_95);
        let estimate = if trials == 0 {
            0.0
        } else {
            errors as f64 / trials as f64
        };
        Self {
            errors,
            trials,
            estimate,
            ci_low,
            ci_high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageEstimate {
    pub message: u64,
    #[serde(flatten)]
    pub error: ErrorEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    /// The message actually sent.
    pub sent: u64,
    /// The message the receiver tested for.
    pub tested: u64,
    #[serde(flatten)]
    pub error: ErrorEstimate,
}

/// How the Type II pairs were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PairSampling {
    Full,
    Sampled { pairs: u64 },
    Explicit { pairs: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub type_one: Vec<MessageEstimate>,
    pub type_two: Vec<PairEstimate>,
    pub trials: u64,
    pub seed: u64,
    pub pair_sampling: PairSampling,
}

impl SimResult {
    /// Worst Type I estimate (by point estimate, ties to the higher upper bound).
    pub fn max_type_one(&self) -> Option<&MessageEstimate> {
        self.type_one.iter().max_by(|a, b| worst(&a.error, &b.error))
    }

    pub fn max_type_two(&self) -> Option<&PairEstimate> {
        self.type_two.iter().max_by(|a, b| worst(&a.error, &b.error))
    }

    /// Largest upper Wilson bound among the Type I estimates.
    pub fn type_one_upper(&self) -> f64 {
        self.type_one.iter().map(|m| m.error.ci_high).fold(0.0, f64::max)
    }

    pub fn type_two_upper(&self) -> f64 {
        self.type_two.iter().map(|m| m.error.ci_high).fold(0.0, f64::max)
    }
}

fn worst(a: &ErrorEstimate, b: &ErrorEstimate) -> std::cmp::Ordering {
    a.estimate
        .total_cmp(&b.estimate)
        .then(a.ci_high.total_cmp(&b.ci_high))
}

/// Sums per-trial error counters over `trials`, in parallel when enabled.
///
/// `record(trial, counters)` increments entries of a `width`-long slice. The
/// merge is a plain element-wise sum, so the result does not depend on how
/// trials are scheduled.
pub(crate) fn tally<F>(trials: u64, width: usize, record: F) -> Vec<u64>
where
    F: Fn(u64, &mut [u64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .fold(
                || vec![0u64; width],
                |mut acc, t| {
                    record(t, &mut acc);
                    acc
                },
            )
            .reduce(
                || vec![0u64; width],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut acc = vec![0u64; width];
        for t in 0..trials {
            record(t, &mut acc);
        }
        acc
    }
}
