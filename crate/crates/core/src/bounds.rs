//! Capacity bounds and the finite-n converse bookkeeping.
//!
//! All logarithms are base 2; the radius formula works in nats internally.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, PowerConstraints};
use crate::di_code::{memory_scaling, packing_log_count_bound, power_ball_radius, PackingGeometry};
use crate::measures::{min_distance_radius, poisson_entropy_exact, DEFAULT_TAIL_MASS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kappa: f64,
    pub di_lower: f64,
    pub di_upper: f64,
    pub dif_lower_exact: f64,
    pub dif_lower_asymptotic: f64,
}

fn check_kappa(kappa: f64) -> Result<()> {
    if (0.0..1.0).contains(&kappa) {
        Ok(())
    } else {
        Err(Error::invalid(format!("kappa must lie in [0, 1), got {kappa}")))
    }
}

/// `((1-κ)/4, (1+κ)/2)`, the DI capacity bracket in `log N / (n log n)` units.
pub fn di_capacity_bounds(kappa: f64) -> Result<(f64, f64)> {
    check_kappa(kappa)?;
    Ok(((1.0 - kappa) / 4.0, (1.0 + kappa) / 2.0))
}

/// Average letter entropy of the pilot block, `(1/(K+1)) Σ_k H(Pois(p_k Ê T_s + λ0))`,
/// next to its large-intensity form `½ log2(2πe Ê T_s)`.
pub fn dif_capacity_lower(params: &ChannelParams, peak: f64) -> Result<(f64, f64)> {
    if !(peak >= 0.0 && peak.is_finite()) {
        return Err(Error::invalid(format!("peak rate must be finite and >= 0, got {peak}")));
    }
    let energy = peak * params.slot_duration();
    if energy == 0.0 {
        return Err(Error::AsymptoticUndefined);
    }
    Ok((pilot_entropy_sum(params, peak)? / params.hit_probs().len() as f64, 0.5 * (2.0 * PI * E * energy).log2()))
}

/// `Σ_k H(Pois(p_k Ê T_s + λ0))` in bits.
pub(crate) fn pilot_entropy_sum(params: &ChannelParams, peak: f64) -> Result<f64> {
    params
        .hit_probs()
        .iter()
        .map(|p| poisson_entropy_exact(p * peak * params.slot_duration() + params.dark_current(), DEFAULT_TAIL_MASS))
        .sum()
}

pub fn bound_report(kappa: f64, params: &ChannelParams, peak: f64) -> Result<BoundReport> {
    let (di_lower, di_upper) = di_capacity_bounds(kappa)?;
    let (dif_lower_exact, dif_lower_asymptotic) = dif_capacity_lower(params, peak)?;
    Ok(BoundReport {
        kappa,
        di_lower,
        di_upper,
        dif_lower_exact,
        dif_lower_asymptotic,
    })
}

/// The finite-n converse `log2 N ≤ n log2(2l/r)` with `K = ⌊n^κ⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverseValue {
    pub n: usize,
    pub memory: usize,
    pub log_count_bits: f64,
    /// `log_count_bits / (n log2 n)`, comparable with `(1+κ)/2`.
    pub normalized: f64,
    pub target: f64,
    /// `log_count_bits - target · n log2 n`: the `O(n)` term, kept explicit.
    pub slack_bits: f64,
    pub geometry: PackingGeometry,
}

pub fn converse_log_count(
    n: usize,
    kappa: f64,
    params: &ChannelParams,
    constraints: &PowerConstraints,
    lambda1: f64,
    lambda2: f64,
) -> Result<ConverseValue> {
    let memory = memory_scaling(n, kappa)?;
    let ball = power_ball_radius(n, params, constraints, memory)?;
    let r = min_distance_radius(lambda1, lambda2)?;
    let geometry = PackingGeometry::new(&ball, r, Some(kappa))?;
    let log_count_bits = packing_log_count_bound(&geometry)?;
    let scale = n as f64 * (n as f64).log2();
    let target = (1.0 + kappa) / 2.0;
    Ok(ConverseValue {
        n,
        memory,
        log_count_bits,
        normalized: log_count_bits / scale,
        target,
        slack_bits: log_count_bits - target * scale,
        geometry,
    })
}

/// [`converse_log_count`] over a grid of block lengths.
pub fn converse_trend(
    ns: &[usize],
    kappa: f64,
    params: &ChannelParams,
    constraints: &PowerConstraints,
    lambda1: f64,
    lambda2: f64,
) -> Result<Vec<ConverseValue>> {
    ns.iter()
        .map(|&n| converse_log_count(n, kappa, params, constraints, lambda1, lambda2))
        .collect()
}
