//! The discrete-time Poisson channel with K-slot inter-symbol interference.
//!
//! A release-rate sequence `x` of length `n` is convolved with the hit
//! probabilities `p_0..p_K`, scaled by the slot duration and offset by the dark
//! current; every one of the `n + K` receptions is an independent Poisson count
//! with that mean.

use serde::{Deserialize, Serialize};

use crate::rng::{sample_poisson, StreamKey};
use crate::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelParams", into = "RawChannelParams")]
pub struct ChannelParams {
    hit_probs: Vec<f64>,
    slot_duration: f64,
    dark_current: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawChannelParams {
    pub hit_probs: Vec<f64>,
    pub slot_duration: f64,
    pub dark_current: f64,
}

impl TryFrom<RawChannelParams> for ChannelParams {
    type Error = Error;

    fn try_from(raw: RawChannelParams) -> Result<Self> {
        ChannelParams::new(raw.hit_probs, raw.slot_duration, raw.dark_current)
    }
}

impl From<ChannelParams> for RawChannelParams {
    fn from(p: ChannelParams) -> Self {
        RawChannelParams {
            hit_probs: p.hit_probs,
            slot_duration: p.slot_duration,
            dark_current: p.dark_current,
        }
    }
}

impl ChannelParams {
    /// Builds a channel from `p_0..p_K`; the memory length is `p.len() - 1`.
    pub fn new(hit_probs: Vec<f64>, slot_duration: f64, dark_current: f64) -> Result<Self> {
        Self::violations(&hit_probs, slot_duration, dark_current)
            .map_or(Ok(()), |v| Err(Error::invalid(v.join("; "))))?;
        Ok(Self {
            hit_probs,
            slot_duration,
            dark_current,
        })
    }

    /// Every violated channel invariant, or `None`.
    pub(crate) fn violations(p: &[f64], slot: f64, dark: f64) -> Option<Vec<String>> {
        let mut v = Vec::new();
        if p.is_empty() {
            v.push("hit_probs must hold K+1 >= 1 entries".to_owned());
        }
        if let Some(bad) = p.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            v.push(format!("hit probability {bad} outside [0, 1]"));
        }
        let total: f64 = p.iter().sum();
        if !p.is_empty() && (total - 1.0).abs() > PROB_SUM_TOL {
            v.push(format!("hit probabilities sum to {total}, expected 1"));
        }
        if !(slot > 0.0 && slot.is_finite()) {
            v.push(format!("slot_duration must be > 0, got {slot}"));
        }
        if !(dark >= 0.0 && dark.is_finite()) {
            v.push(format!("dark_current must be >= 0, got {dark}"));
        }
        (!v.is_empty()).then_some(v)
    }

    /// Memoryless channel `p = [1]`.
    pub fn memoryless(slot_duration: f64, dark_current: f64) -> Result<Self> {
        Self::new(vec![1.0], slot_duration, dark_current)
    }

    /// Memory length K.
    pub fn memory(&self) -> usize {
        self.hit_probs.len() - 1
    }

    pub fn hit_probs(&self) -> &[f64] {
        &self.hit_probs
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn dark_current(&self) -> f64 {
        self.dark_current
    }
}

/// Release rates `x_1..x_n`; slots past `n` are implicitly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Codeword(Vec<f64>);

impl Codeword {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("codeword must have length n >= 1"));
        }
        if let Some(bad) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("release rate {bad} is not a finite value >= 0")));
        }
        Ok(Self(x))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Codeword {
    type Error = Error;

    fn try_from(x: Vec<f64>) -> Result<Self> {
        Codeword::new(x)
    }
}

impl From<Codeword> for Vec<f64> {
    fn from(c: Codeword) -> Self {
        c.0
    }
}

/// Peak (Ê) and average (Ē) release-rate limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPower", into = "RawPower")]
pub struct PowerConstraints {
    peak: f64,
    avg: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPower {
    pub peak: f64,
    pub avg: f64,
}

impl TryFrom<RawPower> for PowerConstraints {
    type Error = Error;

    fn try_from(raw: RawPower) -> Result<Self> {
        PowerConstraints::new(raw.peak, raw.avg)
    }
}

impl From<PowerConstraints> for RawPower {
    fn from(c: PowerConstraints) -> Self {
        RawPower {
            peak: c.peak,
            avg: c.avg,
        }
    }
}

impl PowerConstraints {
    pub fn new(peak: f64, avg: f64) -> Result<Self> {
        if !(peak > 0.0 && peak.is_finite() && avg > 0.0 && avg.is_finite()) {
            return Err(Error::invalid(format!(
                "power constraints need peak > 0 and avg > 0, got peak={peak}, avg={avg}"
            )));
        }
        Ok(Self { peak, avg })
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn avg(&self) -> f64 {
        self.avg
    }

    /// `E = min(Ē, Ê)`, the binding per-slot energy.
    pub fn binding(&self) -> f64 {
        self.peak.min(self.avg)
    }
}

/// Poisson means `μ_1..μ_{n+K}` of the receptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySequence(Vec<f64>);

impl IntensitySequence {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Absorbed-molecule counts `y_1..y_{n+K}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSequence(Vec<u64>);

impl OutputSequence {
    pub fn new(y: Vec<u64>) -> Self {
        Self(y)
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.0
    }
}

/// `μ_t = λ0 + T_s Σ_k p_k x_{t-k}` over `x.len() + K` slots, with `x` zero
/// outside its own range.
pub(crate) fn convolve_intensity(x: &[f64], params: &ChannelParams) -> Vec<f64> {
    let p = params.hit_probs();
    let len = x.len() + params.memory();
    (0..len)
        .map(|t| {
            let lo = t.saturating_sub(x.len() - 1);
            let hi = t.min(params.memory());
            let isi: f64 = (lo..=hi).map(|k| p[k] * x[t - k]).sum();
            params.dark_current() + params.slot_duration() * isi
        })
        .collect()
}

pub fn effective_intensity(x: &Codeword, params: &ChannelParams) -> IntensitySequence {
    IntensitySequence(convolve_intensity(x.as_slice(), params))
}

/// `ln y!` via log-gamma.
#[inline]
pub fn ln_factorial(y: u64) -> f64 {
    if y < 2 {
        0.0
    } else {
        libm::lgamma(y as f64 + 1.0)
    }
}

/// Per-slot Poisson log-pmf with `0 ln 0 = 0`; `-inf` when `μ = 0 < y`.
#[inline]
pub fn poisson_log_pmf(y: u64, mean: f64) -> f64 {
    if y == 0 {
        -mean
    } else if mean <= 0.0 {
        f64::NEG_INFINITY
    } else {
        -mean + y as f64 * mean.ln() - ln_factorial(y)
    }
}

/// Log-likelihood of receptions under known intensities.
pub fn log_likelihood_intensity(y: &[u64], mu: &[f64]) -> Result<f64> {
    if y.len() != mu.len() {
        return Err(Error::invalid(format!(
            "reception length {} does not match intensity length {}",
            y.len(),
            mu.len()
        )));
    }
    Ok(y.iter().zip(mu).map(|(&y, &m)| poisson_log_pmf(y, m)).sum())
}

/// Natural-log likelihood `ln W(y | x)` of the full `n + K` reception window.
pub fn log_likelihood(y: &OutputSequence, x: &Codeword, params: &ChannelParams) -> Result<f64> {
    let mu = convolve_intensity(x.as_slice(), params);
    log_likelihood_intensity(y.as_slice(), &mu)
}

/// Draws receptions for known intensities; slot `t` uses its own stream.
pub fn sample_counts(mu: &[f64], key: StreamKey) -> Vec<u64> {
    sample_counts_from(mu, key, 0)
}

/// Like [`sample_counts`], but slot streams are numbered from `first_slot`.
pub(crate) fn sample_counts_from(mu: &[f64], key: StreamKey, first_slot: usize) -> Vec<u64> {
    mu.iter()
        .enumerate()
        .map(|(t, &m)| {
            let mut rng = key.slot_rng((first_slot + t) as u64);
            sample_poisson(m, &mut rng)
        })
        .collect()
}

pub fn sample_output(x: &Codeword, params: &ChannelParams, seed: u64) -> OutputSequence {
    sample_output_keyed(x, params, StreamKey::new(seed))
}

pub fn sample_output_keyed(x: &Codeword, params: &ChannelParams, key: StreamKey) -> OutputSequence {
    let mu = convolve_intensity(x.as_slice(), params);
    OutputSequence(sample_counts(&mu, key))
}

/// Peak and average release-rate constraints.
pub fn validate_power(x: &Codeword, c: &PowerConstraints) -> bool {
    let n = x.len() as f64;
    x.as_slice().iter().all(|&v| v <= c.peak()) && x.as_slice().iter().sum::<f64>() <= n * c.avg()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2(dark: f64) -> ChannelParams {
        ChannelParams::new(vec![0.6, 0.3, 0.1], 1.0, dark).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ChannelParams::new(vec![0.6, 0.3], 1.0, 0.0).is_err());
        assert!(ChannelParams::new(vec![1.2, -0.2], 1.0, 0.0).is_err());
        assert!(ChannelParams::new(vec![1.0], 0.0, 0.0).is_err());
        assert!(ChannelParams::new(vec![1.0], 1.0, -0.1).is_err());
        assert!(ChannelParams::new(vec![], 1.0, 0.0).is_err());
        let err = ChannelParams::new(vec![0.5], -1.0, -1.0).unwrap_err().to_string();
        assert!(err.contains("sum") && err.contains("slot_duration") && err.contains("dark_current"));
    }

    #[test]
    fn fig2_impulse_response() {
        let x = Codeword::new(vec![10.0, 0.0, 0.0]).unwrap();
        let mu = effective_intensity(&x, &fig2(0.0));
        let expect = [6.0, 3.0, 1.0, 0.0, 0.0];
        assert_eq!(mu.len(), 5);
        for (a, b) in mu.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_dark_current() {
        let x = Codeword::zeros(7).unwrap();
        let mu = effective_intensity(&x, &fig2(0.25));
        assert_eq!(mu.len(), 9);
        assert!(mu.as_slice().iter().all(|&m| m == 0.25));
    }

    #[test]
    fn memoryless_is_identity() {
        let params = ChannelParams::memoryless(1.0, 0.0).unwrap();
        let x = Codeword::new(vec![3.5; 6]).unwrap();
        assert_eq!(effective_intensity(&x, &params).as_slice(), &[3.5; 6]);
        assert!(Codeword::new(vec![]).is_err());
        assert!(Codeword::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn dark_slots_give_minus_lambda() {
        let params = ChannelParams::new(vec![0.5, 0.5], 1.0, 0.1).unwrap();
        let x = Codeword::zeros(9).unwrap();
        let y = OutputSequence::new(vec![0; 10]);
        assert!((log_likelihood(&y, &x, &params).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_slot_likelihood() {
        // -0.7 + 2 ln 0.7 - ln 2, evaluated with mpmath at 30 digits
        let expected = -2.106_497_068_437_41;
        let got = log_likelihood_intensity(&[2], &[0.7]).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn impossible_outcome_and_length_mismatch() {
        let params = ChannelParams::memoryless(1.0, 0.0).unwrap();
        let x = Codeword::zeros(2).unwrap();
        let y = OutputSequence::new(vec![0, 1]);
        assert_eq!(log_likelihood(&y, &x, &params).unwrap(), f64::NEG_INFINITY);
        let short = OutputSequence::new(vec![0]);
        assert!(matches!(log_likelihood(&short, &x, &params), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn likelihood_normalizes_over_truncated_support() {
        // two-slot window; per-slot support truncated where the tail is < 1e-12
        let params = ChannelParams::new(vec![0.7, 0.3], 1.0, 0.2).unwrap();
        let x = Codeword::new(vec![1.5]).unwrap();
        let cap = 20u64;
        let mut total = 0.0;
        for a in 0..=cap {
            for b in 0..=cap {
                let y = OutputSequence::new(vec![a, b]);
                total += log_likelihood(&y, &x, &params).unwrap().exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "total = {total}");
    }

    #[test]
    fn power_validation() {
        let c = PowerConstraints::new(2.0, 1.0).unwrap();
        assert!(validate_power(&Codeword::new(vec![2.0, 2.0, 0.0, 0.0]).unwrap(), &c));
        assert!(!validate_power(&Codeword::new(vec![2.0, 2.0, 1.0, 0.0]).unwrap(), &c));
        assert!(!validate_power(&Codeword::new(vec![2.0 + 1e-9, 0.0, 0.0, 0.0]).unwrap(), &c));
        let loose = PowerConstraints::new(2.0, 3.0).unwrap();
        assert!(validate_power(&Codeword::new(vec![2.0; 5]).unwrap(), &loose));
        assert!(PowerConstraints::new(0.0, 1.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_degenerate_at_zero() {
        let params = fig2(0.0);
        let x = Codeword::zeros(5).unwrap();
        assert!(sample_output(&x, &params, 11).as_slice().iter().all(|&y| y == 0));
        let x = Codeword::new(vec![4.0, 1.0, 7.0]).unwrap();
        assert_eq!(sample_output(&x, &params, 5), sample_output(&x, &params, 5));
        assert_ne!(
            sample_output_keyed(&x, &fig2(1.0), StreamKey::with_trial(5, 1)),
            sample_output_keyed(&x, &fig2(1.0), StreamKey::with_trial(5, 2))
        );
    }

    #[test]
    fn sample_mean_matches_intensity() {
        let draws = 100_000u64;
        let mu = [5.0];
        let sum: u64 = (0..draws)
            .map(|t| sample_counts(&mu, StreamKey::with_trial(42, t))[0])
            .sum();
        let mean = sum as f64 / draws as f64;
        assert!((mean - 5.0).abs() <= 3.0 * (5.0 / draws as f64).sqrt(), "mean = {mean}");
    }
}
