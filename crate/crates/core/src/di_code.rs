//! Deterministic identification codes over the DTPC-ISI.
//!
//! Codewords are compared in the reparametrized domain `s_t = √μ_t`, where the
//! Bhattacharyya separation required by the error budget becomes a Euclidean
//! minimum distance `2r`. Codebooks are built by greedy rejection packing and
//! decoded with a per-slot mean-absolute-deviation threshold test.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    convolve_intensity, sample_counts, validate_power, ChannelParams, Codeword, OutputSequence,
    PowerConstraints,
};
use crate::measures::{euclidean_distance, min_distance_radius};
use crate::rng::{derive_seed, labelled_rng, StreamKey};
use crate::sim::{tally, wilson_interval, ErrorEstimate, MessageEstimate, PairEstimate, PairSampling, SimResult, Z_95};
use crate::{Error, Result};

/// Spacing of the threshold search grid.
pub const THRESHOLD_GRID_STEP: f64 = 1e-3;
/// Largest threshold the calibration search will consider.
pub const THRESHOLD_GRID_MAX: f64 = 1e6;
/// Above this many messages, Type II pairs are subsampled.
pub const FULL_PAIR_LIMIT: usize = 64;

const CALIBRATION_STREAM: u64 = 0xca11;
const ESTIMATION_STREAM: u64 = 0xe571;
const PAIR_STREAM: u64 = 0x9a1e;
const CONSTRUCTION_STREAM: u64 = 0xc0de;

/// `K = ⌊n^κ⌋`, snapping to the nearest integer when within 1e-9 of it.
pub fn memory_scaling(n: usize, kappa: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::invalid(format!("memory scaling needs n >= 2, got {n}")));
    }
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::invalid(format!("kappa must lie in [0, 1), got {kappa}")));
    }
    let v = (kappa * (n as f64).ln()).exp();
    let nearest = v.round();
    let v = if (v - nearest).abs() < 1e-9 { nearest } else { v };
    Ok(v.floor() as usize)
}

/// A codeword in the √-intensity domain, `s_t = √(x*_t + λ0)` for `t ≤ n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReparamCodeword(Vec<f64>);

impl ReparamCodeword {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|s| s * s).sum()
    }

    pub fn distance(&self, other: &ReparamCodeword) -> f64 {
        euclidean_distance(&self.0, &other.0)
    }
}

fn reparam_from_intensity(mu: &[f64], n: usize) -> ReparamCodeword {
    ReparamCodeword(mu[..n].iter().map(|m| m.sqrt()).collect())
}

pub fn reparameterize(x: &Codeword, params: &ChannelParams) -> ReparamCodeword {
    reparam_from_intensity(&convolve_intensity(x.as_slice(), params), x.len())
}

/// The radii of the balls that the reparametrized codewords must lie in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBall {
    pub n: usize,
    pub memory: usize,
    /// `l̄ = √(nλ0 + nĒKT_s)`
    pub radius_avg: f64,
    /// `l̂ = √(nλ0 + nÊKT_s)`
    pub radius_peak: f64,
    /// `l = min(l̄, l̂)`
    pub radius: f64,
    /// `E = min(Ē, Ê)`
    pub energy: f64,
}

pub fn power_ball_radius(
    n: usize,
    params: &ChannelParams,
    c: &PowerConstraints,
    memory: usize,
) -> Result<PowerBall> {
    if memory < 1 {
        return Err(Error::invalid("power ball radius needs memory K >= 1"));
    }
    let n_f = n as f64;
    let scale = n_f * memory as f64 * params.slot_duration();
    let base = n_f * params.dark_current();
    let radius_avg = (base + scale * c.avg()).sqrt();
    let radius_peak = (base + scale * c.peak()).sqrt();
    Ok(PowerBall {
        n,
        memory,
        radius_avg,
        radius_peak,
        radius: radius_avg.min(radius_peak),
        energy: c.binding(),
    })
}

/// Packing of radius-`r` spheres into the power ball of radius `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackingGeometry {
    pub n: usize,
    pub l: f64,
    pub r: f64,
    /// Memory scaling exponent, when `K` was derived from one.
    pub kappa: Option<f64>,
    pub energy: f64,
}

impl PackingGeometry {
    pub fn new(ball: &PowerBall, r: f64, kappa: Option<f64>) -> Result<Self> {
        let g = Self {
            n: ball.n,
            l: ball.radius,
            r,
            kappa,
            energy: ball.energy,
        };
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r <= self.l) {
            return Err(Error::InvalidGeometry { l: self.l, r: self.r });
        }
        Ok(())
    }
}

/// `n·log2(2l/r)` bits: the volume-ratio bound `N ≤ (l+r)^n / r^n ≤ (2l)^n / r^n`.
pub fn packing_log_count_bound(g: &PackingGeometry) -> Result<f64> {
    g.check()?;
    Ok(g.n as f64 * (2.0 * g.l / g.r).log2())
}

/// Superexponential DI rate `log N / (n log n)`, with `log2_messages = log2 N`.
pub fn di_rate(log2_messages: f64, n: usize) -> f64 {
    let n_f = n as f64;
    log2_messages / (n_f * n_f.log2())
}

/// Knobs of the greedy packing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructionStrategy {
    /// Per-slot candidate levels as fractions of the peak rate.
    pub alphabet: Vec<f64>,
    /// Stop after `stall_factor · N` consecutive rejections.
    pub stall_factor: usize,
    pub max_codewords: usize,
    pub max_candidates: usize,
    /// Minimum √-domain distance as a multiple of `2r`; at least 1.
    pub separation: f64,
}

impl Default for ConstructionStrategy {
    fn default() -> Self {
        Self {
            alphabet: vec![0.0, 0.5, 1.0],
            stall_factor: 200,
            max_codewords: 64,
            max_candidates: 1_000_000,
            separation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }
}

/// A DI code: codewords, their separation radius, and the threshold decoder.
///
/// Decoding region `i` is `{y : T_i(y) ≤ θ}` with `T_i` the per-slot mean
/// absolute deviation of `y` from codeword `i`'s intensities over slots `1..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DICodebook {
    codewords: Vec<Codeword>,
    params: ChannelParams,
    constraints: PowerConstraints,
    radius: f64,
    #[serde(with = "finite_or_none")]
    threshold: f64,
    lambda1: f64,
    lambda2: f64,
    #[serde(skip)]
    intensities: Vec<Vec<f64>>,
    #[serde(skip)]
    reparam: Vec<ReparamCodeword>,
}

impl DICodebook {
    /// Validates power, pairwise `2r` separation and `N ≥ 1`. The threshold
    /// starts at `+∞` (accept everything) until calibrated.
    pub fn new(
        codewords: Vec<Codeword>,
        params: ChannelParams,
        constraints: PowerConstraints,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self> {
        let radius = min_distance_radius(lambda1, lambda2)?;
        if codewords.is_empty() {
            return Err(Error::invalid("a codebook needs at least one codeword"));
        }
        let n = codewords[0].len();
        if codewords.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("codewords must share one block length"));
        }
        if let Some(i) = codewords.iter().position(|c| !validate_power(c, &constraints)) {
            return Err(Error::invalid(format!("codeword {i} violates the power constraints")));
        }
        let mut book = Self {
            codewords,
            params,
            constraints,
            radius,
            threshold: f64::INFINITY,
            lambda1,
            lambda2,
            intensities: Vec::new(),
            reparam: Vec::new(),
        };
        book.rebuild_cache();
        let (d, i, j) = book.min_pairwise_distance().unwrap_or((f64::INFINITY, 0, 0));
        if d < 2.0 * radius {
            return Err(Error::invalid(format!(
                "codewords {i} and {j} are {d} apart in the sqrt domain, need >= {}",
                2.0 * radius
            )));
        }
        Ok(book)
    }

    fn rebuild_cache(&mut self) {
        let n = self.n();
        self.intensities = self
            .codewords
            .iter()
            .map(|c| convolve_intensity(c.as_slice(), &self.params))
            .collect();
        self.reparam = self
            .intensities
            .iter()
            .map(|mu| reparam_from_intensity(mu, n))
            .collect();
    }

    /// Restores the derived caches after deserialization.
    pub fn revalidate(mut self) -> Result<Self> {
        let threshold = self.threshold;
        self.rebuild_cache();
        let mut book = Self::new(self.codewords, self.params, self.constraints, self.lambda1, self.lambda2)?;
        book.set_threshold(threshold)?;
        Ok(book)
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Block length.
    pub fn n(&self) -> usize {
        self.codewords[0].len()
    }

    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn constraints(&self) -> &PowerConstraints {
        &self.constraints
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        if !(threshold > 0.0) {
            return Err(Error::invalid(format!("threshold must be > 0, got {threshold}")));
        }
        self.threshold = threshold;
        Ok(())
    }

    /// Intensities `μ_{i,1..n+K}` of codeword `i`.
    pub fn intensity(&self, i: usize) -> &[f64] {
        &self.intensities[i]
    }

    pub fn reparam(&self, i: usize) -> &ReparamCodeword {
        &self.reparam[i]
    }

    /// Smallest pairwise √-domain distance and the pair attaining it.
    pub fn min_pairwise_distance(&self) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = self.reparam[i].distance(&self.reparam[j]);
                if best.is_none_or(|(b, _, _)| d < b) {
                    best = Some((d, i, j));
                }
            }
        }
        best
    }

    /// Power-ball geometry for this codebook's channel memory (`K ≥ 1`).
    pub fn geometry(&self, kappa: Option<f64>) -> Result<PackingGeometry> {
        let ball = power_ball_radius(self.n(), &self.params, &self.constraints, self.params.memory())?;
        PackingGeometry::new(&ball, self.radius, kappa)
    }
}

/// `+∞` thresholds serialize as `null`.
mod finite_or_none {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        v.is_finite().then_some(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Greedy packing over an explicit candidate stream, in order.
pub fn construct_from_candidates<I>(
    candidates: I,
    params: &ChannelParams,
    constraints: &PowerConstraints,
    lambda1: f64,
    lambda2: f64,
    strategy: &ConstructionStrategy,
) -> Result<DICodebook>
where
    I: IntoIterator<Item = Codeword>,
{
    let radius = min_distance_radius(lambda1, lambda2)?;
    if !(strategy.separation >= 1.0 && strategy.separation.is_finite()) {
        return Err(Error::invalid(format!(
            "separation factor must be finite and >= 1, got {}",
            strategy.separation
        )));
    }
    let min_dist = 2.0 * radius * strategy.separation;
    let mut accepted: Vec<Codeword> = Vec::new();
    let mut accepted_s: Vec<ReparamCodeword> = Vec::new();
    let mut stalled = 0usize;

    for (drawn, cand) in candidates.into_iter().enumerate() {
        if accepted.len() >= strategy.max_codewords || drawn >= strategy.max_candidates {
            break;
        }
        if !accepted.is_empty() && stalled >= strategy.stall_factor * accepted.len() {
            break;
        }
        if !validate_power(&cand, constraints) || accepted.first().is_some_and(|c| c.len() != cand.len()) {
            stalled += 1;
            continue;
        }
        let s = reparameterize(&cand, params);
        if accepted_s.iter().all(|a| a.distance(&s) >= min_dist) {
            accepted.push(cand);
            accepted_s.push(s);
            stalled = 0;
        } else {
            stalled += 1;
        }
    }

    if accepted.is_empty() {
        return Err(Error::ConstructionFailed("no candidate codeword was accepted".into()));
    }
    DICodebook::new(accepted, params.clone(), *constraints, lambda1, lambda2)
}

/// One random admissible candidate: per-slot levels from the alphabet, scaled
/// down uniformly when the average constraint binds.
fn draw_candidate<R: Rng>(
    n: usize,
    constraints: &PowerConstraints,
    alphabet: &[f64],
    rng: &mut R,
) -> Result<Codeword> {
    let peak = constraints.peak();
    let mut x: Vec<f64> = (0..n)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())] * peak)
        .collect();
    let budget = n as f64 * constraints.avg();
    let total: f64 = x.iter().sum();
    if total > budget {
        let mut scale = budget / total;
        while x.iter().map(|v| v * scale).sum::<f64>() > budget {
            scale *= 1.0 - 1e-12;
        }
        x.iter_mut().for_each(|v| *v *= scale);
    }
    Codeword::new(x)
}

pub fn construct_codebook(
    n: usize,
    params: &ChannelParams,
    constraints: &PowerConstraints,
    lambda1: f64,
    lambda2: f64,
    strategy: &ConstructionStrategy,
    seed: u64,
) -> Result<DICodebook> {
    if n == 0 {
        return Err(Error::invalid("block length n must be >= 1"));
    }
    if strategy.alphabet.is_empty() || strategy.alphabet.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::invalid("candidate alphabet must be non-empty fractions in [0, 1]"));
    }
    if strategy.max_codewords == 0 {
        return Err(Error::ConstructionFailed("max_codewords is zero".into()));
    }
    let mut rng = labelled_rng(seed, &[CONSTRUCTION_STREAM]);
    let mut failure = None;
    let candidates = std::iter::from_fn(|| match draw_candidate(n, constraints, &strategy.alphabet, &mut rng) {
        Ok(c) => Some(c),
        Err(e) => {
            failure = Some(e);
            None
        }
    });
    let book = construct_from_candidates(candidates, params, constraints, lambda1, lambda2, strategy);
    match failure {
        Some(e) => Err(e),
        None => book,
    }
}

/// `T(y) = (1/n) Σ_{t ≤ n} |y_t - μ_t|`.
pub fn identification_statistic(y: &[u64], mu: &[f64], n: usize) -> f64 {
    y[..n]
        .iter()
        .zip(&mu[..n])
        .map(|(&y, &m)| (y as f64 - m).abs())
        .sum::<f64>()
        / n as f64
}

pub fn decode_identify(y: &OutputSequence, i: usize, book: &DICodebook) -> Result<Decision> {
    if i >= book.len() {
        return Err(Error::invalid(format!("message index {i} out of range 0..{}", book.len())));
    }
    let window = book.n() + book.params().memory();
    if y.len() != window {
        return Err(Error::invalid(format!("reception length {} != n + K = {window}", y.len())));
    }
    let t = identification_statistic(y.as_slice(), book.intensity(i), book.n());
    Ok(if t <= book.threshold() {
        Decision::Accept
    } else {
        Decision::Reject
    })
}

/// Which Type I figure the calibrated threshold must keep within `λ1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationRule {
    /// Empirical rejection rate.
    PointEstimate,
    /// Upper end of the 95% Wilson interval of the rejection rate.
    WilsonUpper,
}

/// Largest rejection count out of `trials` the rule tolerates under `lambda1`.
fn allowed_rejections(rule: CalibrationRule, lambda1: f64, trials: u64) -> Option<u64> {
    let ok = |c: u64| match rule {
        CalibrationRule::PointEstimate => c as f64 <= lambda1 * trials as f64,
        CalibrationRule::WilsonUpper => wilson_interval(c, trials, Z_95).1 <= lambda1,
    };
    if !ok(0) {
        return None;
    }
    // both predicates are monotone in c
    let (mut lo, mut hi) = (0u64, trials);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Some(lo)
}

/// Smallest grid threshold keeping every message's empirical Type I error
/// within `λ1` (by point estimate). Updates the codebook.
pub fn calibrate_threshold(book: &mut DICodebook, trials: u64, seed: u64) -> Result<f64> {
    calibrate_threshold_with(book, trials, seed, CalibrationRule::PointEstimate)
}

pub fn calibrate_threshold_with(
    book: &mut DICodebook,
    trials: u64,
    seed: u64,
    rule: CalibrationRule,
) -> Result<f64> {
    let budget = book.lambda1();
    calibrate_threshold_to(book, budget, trials, seed, rule)
}

/// Calibrates against a Type I `budget` other than the codebook's `λ1`,
/// e.g. a stricter one leaving headroom for a later evaluation run.
pub fn calibrate_threshold_to(
    book: &mut DICodebook,
    budget: f64,
    trials: u64,
    seed: u64,
    rule: CalibrationRule,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&budget) {
        return Err(Error::invalid(format!("Type I budget must lie in [0, 1], got {budget}")));
    }
    if trials < 1000 {
        return Err(Error::invalid(format!("calibration needs >= 1000 trials, got {trials}")));
    }
    let allowed = allowed_rejections(rule, budget, trials).ok_or_else(|| {
        Error::CalibrationFailed(format!("no rejection count out of {trials} trials meets budget {budget}"))
    })?;

    let n = book.n();
    let mut needed: f64 = 0.0;
    for i in 0..book.len() {
        if allowed >= trials {
            break;
        }
        let stream = derive_seed(seed, &[CALIBRATION_STREAM, i as u64]);
        let mu = book.intensity(i);
        let mut stats: Vec<f64> = (0..trials)
            .map(|t| {
                let y = sample_counts(mu, StreamKey::with_trial(stream, t));
                identification_statistic(&y, mu, n)
            })
            .collect();
        stats.sort_by(f64::total_cmp);
        // at most `allowed` samples may exceed the threshold
        needed = needed.max(stats[(trials - allowed - 1) as usize]);
    }

    let mut k = (needed / THRESHOLD_GRID_STEP).ceil().max(1.0);
    if k * THRESHOLD_GRID_STEP < needed {
        k += 1.0;
    }
    let theta = k * THRESHOLD_GRID_STEP;
    if theta > THRESHOLD_GRID_MAX {
        return Err(Error::CalibrationFailed(format!(
            "required threshold {needed} exceeds the search grid"
        )));
    }
    book.set_threshold(theta)?;
    Ok(theta)
}

/// Tested messages for each sender, and how they were chosen.
fn type_two_plan(count: usize, seed: u64) -> (Vec<Vec<usize>>, PairSampling) {
    if count <= FULL_PAIR_LIMIT {
        let plan = (0..count)
            .map(|i| (0..count).filter(|&j| j != i).collect())
            .collect();
        return (plan, PairSampling::Full);
    }
    let target = FULL_PAIR_LIMIT * count;
    let mut rng = labelled_rng(seed, &[PAIR_STREAM]);
    let mut pairs = BTreeSet::new();
    while pairs.len() < target {
        let i = rng.random_range(0..count);
        let j = rng.random_range(0..count - 1);
        pairs.insert((i, if j >= i { j + 1 } else { j }));
    }
    let mut plan = vec![Vec::new(); count];
    for (i, j) in pairs {
        plan[i].push(j);
    }
    (plan, PairSampling::Sampled { pairs: target as u64 })
}

/// Monte Carlo core shared with tests: intensities, block length, threshold.
pub(crate) fn simulate_errors(
    intensities: &[Vec<f64>],
    n: usize,
    threshold: f64,
    trials: u64,
    seed: u64,
) -> SimResult {
    let (plan, pair_sampling) = type_two_plan(intensities.len(), seed);
    let mut type_one = Vec::with_capacity(intensities.len());
    let mut type_two = Vec::new();

    for (i, tested) in plan.iter().enumerate() {
        let stream = derive_seed(seed, &[ESTIMATION_STREAM, i as u64]);
        let mu = &intensities[i];
        // slot 0: Type I rejections, then one acceptance counter per tested message
        let counts = tally(trials, 1 + tested.len(), |t, acc| {
            let y = sample_counts(mu, StreamKey::with_trial(stream, t));
            if identification_statistic(&y, mu, n) > threshold {
                acc[0] += 1;
            }
            for (slot, &j) in tested.iter().enumerate() {
                if identification_statistic(&y, &intensities[j], n) <= threshold {
                    acc[1 + slot] += 1;
                }
            }
        });
        type_one.push(MessageEstimate {
            message: i as u64,
            error: ErrorEstimate::from_counts(counts[0], trials),
        });
        type_two.extend(tested.iter().enumerate().map(|(slot, &j)| PairEstimate {
            sent: i as u64,
            tested: j as u64,
            error: ErrorEstimate::from_counts(counts[1 + slot], trials),
        }));
    }

    SimResult {
        type_one,
        type_two,
        trials,
        seed,
        pair_sampling,
    }
}

/// Empirical Type I (per message) and Type II (per ordered pair) errors of the
/// codebook's current threshold. Pairs are subsampled above 64 messages.
pub fn estimate_errors(book: &DICodebook, trials: u64, seed: u64) -> Result<SimResult> {
    if book.is_empty() {
        return Err(Error::invalid("cannot estimate errors of an empty codebook"));
    }
    if trials == 0 {
        return Err(Error::invalid("estimate_errors needs trials >= 1"));
    }
    Ok(simulate_errors(&book.intensities, book.n(), book.threshold(), trials, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::effective_intensity;

    fn fig2(dark: f64) -> ChannelParams {
        ChannelParams::new(vec![0.6, 0.3, 0.1], 1.0, dark).unwrap()
    }

    #[test]
    fn memory_scaling_values() {
        assert_eq!(memory_scaling(100, 0.0).unwrap(), 1);
        assert_eq!(memory_scaling(7, 0.0).unwrap(), 1);
        assert_eq!(memory_scaling(100, 0.5).unwrap(), 10);
        assert_eq!(memory_scaling(1024, 0.3).unwrap(), 8);
        assert_eq!(memory_scaling(32, 0.25).unwrap(), 2);
        // 1000^(1/3) evaluates to 9.999999999999998 in floating point
        assert_eq!(memory_scaling(1000, 1.0 / 3.0).unwrap(), 10);
        assert!(memory_scaling(1, 0.5).is_err());
        assert!(memory_scaling(10, 1.0).is_err());
        assert!(memory_scaling(10, -0.1).is_err());
    }

    #[test]
    fn reparameterization() {
        let x = Codeword::zeros(4).unwrap();
        let s = reparameterize(&x, &fig2(0.09));
        assert!(s.as_slice().iter().all(|v| (v - 0.3).abs() < 1e-15));
        let params = ChannelParams::memoryless(1.0, 0.0).unwrap();
        let s = reparameterize(&Codeword::new(vec![4.0, 9.0]).unwrap(), &params);
        assert_eq!(s.as_slice(), &[2.0, 3.0]);
        let s = reparameterize(&Codeword::new(vec![10.0, 0.0, 0.0]).unwrap(), &fig2(0.1));
        let expect = [6.1f64.sqrt(), 3.1f64.sqrt(), 1.1f64.sqrt()];
        for (a, b) in s.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn power_ball() {
        let params = ChannelParams::new(vec![0.25; 4], 1.0, 0.1).unwrap();
        let c = PowerConstraints::new(2.0, 1.0).unwrap();
        let ball = power_ball_radius(100, &params, &c, 3).unwrap();
        assert!((ball.radius - 310f64.sqrt()).abs() < 1e-12);
        assert_eq!(ball.energy, 1.0);
        // Ē >= Ê: the peak radius binds
        let c = PowerConstraints::new(1.0, 5.0).unwrap();
        let ball = power_ball_radius(100, &params, &c, 3).unwrap();
        assert_eq!(ball.radius, ball.radius_peak);
        assert!((ball.radius - 310f64.sqrt()).abs() < 1e-12);
        assert!(power_ball_radius(100, &params, &c, 0).is_err());
    }

    #[test]
    fn packing_bound() {
        let g = |l: f64, r: f64| PackingGeometry {
            n: 100,
            l,
            r,
            kappa: None,
            energy: 1.0,
        };
        assert!((packing_log_count_bound(&g(3.0, 3.0)).unwrap() - 100.0).abs() < 1e-12);
        let v = packing_log_count_bound(&g(17.607, 0.2527)).unwrap();
        assert!((v - 712.3).abs() < 0.05, "{v}");
        let diff = packing_log_count_bound(&g(20.0, 0.5)).unwrap() - packing_log_count_bound(&g(10.0, 0.5)).unwrap();
        assert!((diff - 100.0).abs() < 1e-9);
        assert!(matches!(packing_log_count_bound(&g(1.0, 2.0)), Err(Error::InvalidGeometry { .. })));
        assert!(packing_log_count_bound(&g(0.0, 0.0)).is_err());
    }

    #[test]
    fn rates() {
        assert_eq!(di_rate(0.0, 100), 0.0);
        let n = 64usize;
        let full = n as f64 * (n as f64).log2();
        assert!((di_rate(full, n) - 1.0).abs() < 1e-12);
        assert!((di_rate(712.3, 100) - 1.072).abs() < 1e-3);
    }

    #[test]
    fn one_dimensional_separation() {
        let params = ChannelParams::memoryless(1.0, 0.1).unwrap();
        let c = PowerConstraints::new(100.0, 100.0).unwrap();
        let r = min_distance_radius(0.1, 0.1).unwrap();
        // √(x + 0.1) - √0.1 = 2r + 0.01
        let target = (0.1f64.sqrt() + 2.0 * r + 0.01).powi(2) - 0.1;
        let cands = vec![Codeword::new(vec![0.0]).unwrap(), Codeword::new(vec![target]).unwrap()];
        let book = construct_from_candidates(cands, &params, &c, 0.1, 0.1, &ConstructionStrategy::default()).unwrap();
        assert_eq!(book.len(), 2);
        // too close: second candidate rejected
        let cands = vec![Codeword::new(vec![0.0]).unwrap(), Codeword::new(vec![0.1]).unwrap()];
        let book = construct_from_candidates(cands, &params, &c, 0.1, 0.1, &ConstructionStrategy::default()).unwrap();
        assert_eq!(book.len(), 1);
        assert!(matches!(
            construct_from_candidates(Vec::new(), &params, &c, 0.1, 0.1, &ConstructionStrategy::default()),
            Err(Error::ConstructionFailed(_))
        ));
    }

    #[test]
    fn construction_is_deterministic_and_valid() {
        let params = fig2(0.1);
        let c = PowerConstraints::new(10.0, 5.0).unwrap();
        let strategy = ConstructionStrategy {
            max_codewords: 24,
            ..Default::default()
        };
        let a = construct_codebook(12, &params, &c, 0.1, 0.1, &strategy, 9).unwrap();
        let b = construct_codebook(12, &params, &c, 0.1, 0.1, &strategy, 9).unwrap();
        assert_eq!(a.codewords(), b.codewords());
        assert_eq!(a.len(), 24);
        assert!(a.codewords().iter().all(|x| validate_power(x, &c)));
        let (d, _, _) = a.min_pairwise_distance().unwrap();
        assert!(d >= 2.0 * a.radius());
        let g = a.geometry(None).unwrap();
        assert!((a.len() as f64).log2() <= packing_log_count_bound(&g).unwrap());
        for i in 0..a.len() {
            assert!(a.reparam(i).norm_sq() <= g.l * g.l);
        }
    }

    #[test]
    fn stall_rule_stops_small_spaces() {
        // n = 1 with a two-letter alphabet has at most two separated points
        let params = ChannelParams::memoryless(1.0, 0.1).unwrap();
        let c = PowerConstraints::new(10.0, 10.0).unwrap();
        let strategy = ConstructionStrategy {
            alphabet: vec![0.0, 1.0],
            ..Default::default()
        };
        let book = construct_codebook(1, &params, &c, 0.1, 0.1, &strategy, 1).unwrap();
        assert_eq!(book.len(), 2);
    }

    #[test]
    fn codebook_rejects_invalid_sets() {
        let params = fig2(0.1);
        let c = PowerConstraints::new(10.0, 5.0).unwrap();
        let x = Codeword::new(vec![10.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(DICodebook::new(vec![x.clone(), x.clone()], params.clone(), c, 0.1, 0.1).is_err());
        assert!(DICodebook::new(vec![], params.clone(), c, 0.1, 0.1).is_err());
        let hot = Codeword::new(vec![10.0; 4]).unwrap();
        assert!(DICodebook::new(vec![hot], params, c, 0.1, 0.1).is_err());
    }

    fn small_book() -> DICodebook {
        let params = fig2(0.1);
        let c = PowerConstraints::new(10.0, 10.0).unwrap();
        let x0 = Codeword::new(vec![10.0, 0.0, 10.0, 0.0, 10.0, 0.0]).unwrap();
        let x1 = Codeword::new(vec![0.0, 10.0, 0.0, 10.0, 0.0, 10.0]).unwrap();
        DICodebook::new(vec![x0, x1], params, c, 0.1, 0.1).unwrap()
    }

    #[test]
    fn decoder_edge_cases() {
        let mut book = small_book();
        book.set_threshold(0.5).unwrap();
        let mu = book.intensity(0).to_vec();
        let y = OutputSequence::new(mu.iter().map(|m| m.round() as u64).collect());
        assert_eq!(decode_identify(&y, 0, &book).unwrap(), Decision::Accept);
        assert_eq!(decode_identify(&y, 1, &book).unwrap(), Decision::Reject);
        assert!(decode_identify(&y, 2, &book).is_err());
        assert!(decode_identify(&OutputSequence::new(vec![0; 3]), 0, &book).is_err());
        book.set_threshold(f64::INFINITY).unwrap();
        assert!(decode_identify(&y, 1, &book).unwrap().is_accept());
        assert!(book.set_threshold(0.0).is_err());
    }

    #[test]
    fn infinite_threshold_errors() {
        let book = small_book();
        let res = estimate_errors(&book, 200, 3).unwrap();
        assert!(res.type_one.iter().all(|m| m.error.estimate == 0.0));
        assert!(res.type_two.iter().all(|m| m.error.estimate == 1.0));
        assert_eq!(res.pair_sampling, PairSampling::Full);
        assert!(estimate_errors(&book, 0, 3).is_err());
    }

    #[test]
    fn identical_codewords_mirror_type_one() {
        let params = fig2(0.1);
        let mu = effective_intensity(&Codeword::new(vec![4.0, 0.0, 8.0, 2.0]).unwrap(), &params).into_vec();
        let res = simulate_errors(&[mu.clone(), mu], 4, 1.2, 20_000, 5);
        let p1 = res.type_one[0].error.estimate;
        let p2 = res.type_two[0].error.estimate;
        // the same reception stream drives both counters, so this is exact
        assert!((p2 - (1.0 - p1)).abs() < 1e-12, "{p1} {p2}");
    }

    #[test]
    fn pair_subsampling_above_limit() {
        let (plan, mode) = type_two_plan(70, 1);
        assert_eq!(mode, PairSampling::Sampled { pairs: 70 * 64 });
        let total: usize = plan.iter().map(Vec::len).sum();
        assert_eq!(total, 70 * 64);
        assert!(plan.iter().enumerate().all(|(i, v)| !v.contains(&i)));
    }

    #[test]
    fn calibration_quantile_and_monotonicity() {
        let params = fig2(0.1);
        let c = PowerConstraints::new(10.0, 10.0).unwrap();
        let x = Codeword::new(vec![10.0, 0.0, 5.0, 10.0, 0.0, 5.0, 0.0, 10.0]).unwrap();
        let mut book = DICodebook::new(vec![x], params, c, 0.1, 0.1).unwrap();
        let theta = calibrate_threshold(&mut book, 20_000, 77).unwrap();
        assert_eq!(book.threshold(), theta);

        // independent empirical 90th percentile from a different stream
        let mu = book.intensity(0).to_vec();
        let mut stats: Vec<f64> = (0..20_000)
            .map(|t| {
                let y = sample_counts(&mu, StreamKey::with_trial(123_456, t));
                identification_statistic(&y, &mu, 8)
            })
            .collect();
        stats.sort_by(f64::total_cmp);
        let q90 = stats[17_999];
        assert!((theta - q90).abs() <= 0.1 * q90, "theta {theta} vs q90 {q90}");

        let mut loose = book.clone();
        let mut looser = book.clone();
        loose.lambda1 = 0.2;
        looser.lambda1 = 1.0;
        let t2 = calibrate_threshold(&mut loose, 20_000, 77).unwrap();
        let t3 = calibrate_threshold(&mut looser, 20_000, 77).unwrap();
        assert!(t2 <= theta && t3 <= t2);
        assert_eq!(t3, THRESHOLD_GRID_STEP);

        let mut strict = book.clone();
        strict.lambda1 = 0.0;
        assert!(matches!(
            calibrate_threshold_with(&mut strict, 1000, 1, CalibrationRule::WilsonUpper),
            Err(Error::CalibrationFailed(_))
        ));
        assert!(calibrate_threshold(&mut book, 999, 1).is_err());
    }

    #[test]
    fn allowed_rejection_counts() {
        assert_eq!(allowed_rejections(CalibrationRule::PointEstimate, 0.1, 1000), Some(100));
        assert_eq!(allowed_rejections(CalibrationRule::PointEstimate, 1.0, 1000), Some(1000));
        let w = allowed_rejections(CalibrationRule::WilsonUpper, 0.1, 10_000).unwrap();
        assert!(wilson_interval(w, 10_000, Z_95).1 <= 0.1);
        assert!(wilson_interval(w + 1, 10_000, Z_95).1 > 0.1);
        assert_eq!(allowed_rejections(CalibrationRule::WilsonUpper, 0.0, 10_000), None);
    }

    #[test]
    fn far_separated_pair_meets_budget() {
        let mut book = small_book();
        calibrate_threshold(&mut book, 10_000, 1).unwrap();
        let res = estimate_errors(&book, 10_000, 2).unwrap();
        assert!(res.max_type_one().unwrap().error.estimate <= 0.1 + 0.01);
        assert!(res.max_type_two().unwrap().error.estimate <= 0.1);
    }

    #[test]
    fn serde_round_trip_restores_cache() {
        let mut book = small_book();
        for theta in [1.5, f64::INFINITY] {
            book.set_threshold(theta).unwrap();
            let text = serde_json::to_string(&book).unwrap();
            let back: DICodebook = serde_json::from_str(&text).unwrap();
            assert_eq!(back.revalidate().unwrap(), book);
        }
    }
}
