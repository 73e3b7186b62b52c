//! Distances between output laws and Poisson entropies.
//!
//! Poisson laws live on all of ℕ0; [`poisson_pmf_truncated`] keeps the prefix
//! `0..=y_max` and records the discarded upper tail so that every distance can
//! carry an explicit truncation slack.

use std::cmp::Ordering;
use std::f64::consts::{E, LN_2, PI};

use crate::{Error, Result};

/// Tail mass used when a caller does not choose one.
pub const DEFAULT_TAIL_MASS: f64 = 1e-12;

const NORMALIZATION_TOL: f64 = 1e-9;

/// A law on a finite set of counts plus the mass left outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    support: Vec<u64>,
    mass: Vec<f64>,
    tail_bound: f64,
}

impl FiniteDistribution {
    pub fn new(support: Vec<u64>, mass: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(Error::invalid("support and mass lengths differ"));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("support must be strictly increasing"));
        }
        if mass.iter().any(|m| !(*m >= 0.0 && m.is_finite())) || !(tail_bound >= 0.0) {
            return Err(Error::invalid("masses and tail bound must be finite and >= 0"));
        }
        let total = mass.iter().sum::<f64>() + tail_bound;
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("total mass {total} is not 1")));
        }
        Ok(Self {
            support,
            mass,
            tail_bound,
        })
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Mass at `value`, zero when outside the support.
    pub fn pmf(&self, value: u64) -> f64 {
        self.support
            .binary_search(&value)
            .map_or(0.0, |idx| self.mass[idx])
    }

    /// Largest value in the support (`y_max` for truncated Poisson laws).
    pub fn max_value(&self) -> Option<u64> {
        self.support.last().copied()
    }
}

/// Walks the union of two supports, yielding `(q1(a), q2(a))`.
fn merged(q1: &FiniteDistribution, q2: &FiniteDistribution) -> Vec<(f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(q1.support.len().max(q2.support.len()));
    while i < q1.support.len() || j < q2.support.len() {
        let ord = match (q1.support.get(i), q2.support.get(j)) {
            (Some(a), Some(b)) => a.cmp(b),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                out.push((q1.mass[i], 0.0));
                i += 1;
            }
            Ordering::Greater => {
                out.push((0.0, q2.mass[j]));
                j += 1;
            }
            Ordering::Equal => {
                out.push((q1.mass[i], q2.mass[j]));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Truncated Poisson(`mean`) on `0..=y_max`, `y_max` the smallest count whose
/// upper tail `P(Y > y_max)` is at most `tail_mass`.
pub fn poisson_pmf_truncated(mean: f64, tail_mass: f64) -> Result<FiniteDistribution> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::invalid(format!("Poisson mean must be finite and >= 0, got {mean}")));
    }
    if !(tail_mass > 0.0 && tail_mass < 1.0) {
        return Err(Error::invalid(format!("tail mass must lie in (0, 1), got {tail_mass}")));
    }
    if mean == 0.0 {
        return Ok(FiniteDistribution {
            support: vec![0],
            mass: vec![1.0],
            tail_bound: 0.0,
        });
    }

    // Evaluate the pmf from the mode outwards so that nothing underflows at
    // the peak, then continue upwards far past where the tail is negligible.
    let mode = mean.floor() as u64;
    let log_mean = mean.ln();
    let peak = (-mean + mode as f64 * log_mean - libm::lgamma(mode as f64 + 1.0)).exp();
    let mut pmf = vec![0.0; mode as usize + 1];
    pmf[mode as usize] = peak;
    for k in (1..=mode as usize).rev() {
        pmf[k - 1] = pmf[k] * k as f64 / mean;
    }
    let negligible = tail_mass * 1e-6;
    let mut k = mode as usize;
    loop {
        let next = pmf[k] * mean / (k + 1) as f64;
        k += 1;
        pmf.push(next);
        let ratio = mean / (k + 1) as f64;
        // geometric bound on everything past k
        if ratio < 1.0 && next * ratio / (1.0 - ratio) < negligible * 1e-3 && next < negligible {
            break;
        }
    }

    // suffix[j] = P(Y >= j) restricted to the evaluated range
    let mut suffix = vec![0.0; pmf.len() + 1];
    for j in (0..pmf.len()).rev() {
        suffix[j] = suffix[j + 1] + pmf[j];
    }
    let residual = {
        let last = pmf.len() - 1;
        let ratio = mean / (last + 1) as f64;
        pmf[last] * ratio / (1.0 - ratio)
    };
    let y_max = (0..pmf.len())
        .find(|&y| suffix[y + 1] + residual <= tail_mass)
        .unwrap_or(pmf.len() - 1);
    let tail_bound = suffix[y_max + 1] + residual;
    pmf.truncate(y_max + 1);

    Ok(FiniteDistribution {
        support: (0..=y_max as u64).collect(),
        mass: pmf,
        tail_bound,
    })
}

pub fn l1_distance(q1: &FiniteDistribution, q2: &FiniteDistribution) -> f64 {
    merged(q1, q2).iter().map(|(a, b)| (a - b).abs()).sum()
}

/// Total variation distance, exactly half the L1 distance.
pub fn tv_distance(q1: &FiniteDistribution, q2: &FiniteDistribution) -> f64 {
    0.5 * l1_distance(q1, q2)
}

/// Bhattacharyya coefficient `F = Σ √(q1 q2)`.
pub fn bhattacharyya(q1: &FiniteDistribution, q2: &FiniteDistribution) -> f64 {
    merged(q1, q2)
        .iter()
        .map(|(a, b)| (a * b).sqrt())
        .sum::<f64>()
        .min(1.0)
}

/// Squared Bhattacharyya coefficient of two Poisson laws,
/// `exp(-(√μ1 - √μ2)²)`. Both means must be >= 0.
pub fn poisson_bhattacharyya_sq(mean1: f64, mean2: f64) -> f64 {
    debug_assert!(mean1 >= 0.0 && mean2 >= 0.0);
    (-(mean1.sqrt() - mean2.sqrt()).powi(2)).exp()
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Half the minimum √-domain distance a DI code with budgets `(λ1, λ2)` must
/// keep: `(2r)² = -ln(1 - δ²)` with `δ = 1 - λ1 - λ2`.
pub fn min_distance_radius(lambda1: f64, lambda2: f64) -> Result<f64> {
    let budget = lambda1 + lambda2;
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) || !(budget < 1.0) {
        return Err(Error::InvalidBudget { lambda1, lambda2 });
    }
    if budget == 0.0 {
        return Err(Error::DivergentRadius);
    }
    let delta = (1.0 - budget).clamp(0.0, 1.0 - 1e-15);
    Ok((-(-delta * delta).ln_1p()).sqrt() / 2.0)
}

/// Shannon entropy of Poisson(`mean`) in bits, summed over the truncated pmf.
pub fn poisson_entropy_exact(mean: f64, tail_mass: f64) -> Result<f64> {
    let q = poisson_pmf_truncated(mean, tail_mass)?;
    Ok(q.mass
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum())
}

/// `½ log2(2πeμ) - 1/(12 μ ln 2)`, the large-mean expansion in bits.
pub fn poisson_entropy_approx(mean: f64) -> Result<f64> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::invalid(format!("entropy approximation needs mean > 0, got {mean}")));
    }
    Ok(0.5 * (2.0 * PI * E * mean).log2() - 1.0 / (12.0 * mean * LN_2))
}
