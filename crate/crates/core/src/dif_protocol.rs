//! Deterministic identification with noiseless feedback.
//!
//! A DIF codeword is a feedback encoder running three phases:
//!
//! 1. **Pilot.** `n` slots of the `(K+1)`-periodic input `(Ê, 0, …, 0)`. The
//!    receptions are fed back, so both ends hold the same random blocks.
//! 2. **Filter + hash.** Atypical block sequences are declared errors; typical
//!    ones are hashed together with the message into `l ∈ [M]`.
//! 3. **Inner code.** `l` is sent over `⌈√n⌉` further slots with a short
//!    on–off transmission code and decoded by exact maximum likelihood.
//!
//! The receiver testing `i′` accepts iff the blocks are typical and the
//! decoded `l̂` equals the hash of `i′` on the same blocks.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::pilot_entropy_sum;
use crate::channel::{convolve_intensity, poisson_log_pmf, sample_counts_from, ChannelParams, OutputSequence};
use crate::di_code::Decision;
use crate::measures::{poisson_entropy_exact, poisson_pmf_truncated, FiniteDistribution, DEFAULT_TAIL_MASS};
use crate::rng::{derive_seed, labelled_rng, StreamKey};
use crate::sim::{tally, ErrorEstimate, MessageEstimate, PairEstimate, PairSampling, SimResult};
use crate::{Error, Result};

/// Truncation of the letter laws inside the typicality test.
pub const DEFAULT_TYPICALITY_TAIL: f64 = 0.05;

const HASH_DOMAIN: &[u8] = b"dtpc-ident/hash/v1";
const INNER_STREAM: u64 = 0x1c0d;
const HASH_STREAM: u64 = 0x4a54;
const INNER_ERROR_STREAM: u64 = 0x1e77;
const DIF_STREAM: u64 = 0xd1f0;

/// The periodic pilot `(Ê, 0, …, 0)` over the first `n` slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotSpec {
    pub n: usize,
    pub memory: usize,
    pub amplitude: f64,
    /// `⌈n / (K+1)⌉`, counting a truncated final block.
    pub block_count: usize,
}

impl PilotSpec {
    pub fn period(&self) -> usize {
        self.memory + 1
    }

    pub fn input(&self) -> Vec<f64> {
        (0..self.n)
            .map(|t| if t % self.period() == 0 { self.amplitude } else { 0.0 })
            .collect()
    }

    /// Noiseless block receptions `(p_k Ê T_s + λ0)_k`.
    pub fn expected_block_receptions(&self, params: &ChannelParams) -> Vec<f64> {
        params
            .hit_probs()
            .iter()
            .map(|p| p * self.amplitude * params.slot_duration() + params.dark_current())
            .collect()
    }

    /// Number of complete blocks, the ones that enter the typicality test.
    pub fn full_blocks(&self) -> usize {
        self.n / self.period()
    }
}

/// `Ê = 0` is allowed and yields the all-zero pilot.
pub fn build_pilot(n: usize, params: &ChannelParams, peak: f64) -> Result<PilotSpec> {
    if n == 0 {
        return Err(Error::invalid("pilot length n must be >= 1"));
    }
    if !(peak >= 0.0 && peak.is_finite()) {
        return Err(Error::invalid(format!("pilot amplitude must be finite and >= 0, got {peak}")));
    }
    let period = params.memory() + 1;
    Ok(PilotSpec {
        n,
        memory: params.memory(),
        amplitude: peak,
        block_count: n.div_ceil(period),
    })
}

/// Consecutive `(K+1)`-slot reception blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Blocks {
    width: usize,
    values: Vec<u64>,
}

impl Blocks {
    pub fn new(width: usize, values: Vec<u64>) -> Result<Self> {
        if width == 0 || !values.len().is_multiple_of(width) {
            return Err(Error::invalid(format!(
                "{} values do not split into blocks of width {width}",
                values.len()
            )));
        }
        Ok(Self { width, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn count(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u64]> {
        self.values.chunks_exact(self.width)
    }

    /// The blocks laid end to end.
    pub fn concatenate(&self) -> &[u64] {
        &self.values
    }

    fn feed(&self, hasher: &mut Sha256) {
        hasher.update((self.width as u64).to_le_bytes());
        hasher.update((self.count() as u64).to_le_bytes());
        for v in &self.values {
            hasher.update(v.to_le_bytes());
        }
    }
}

/// Splits phase-1 receptions into full blocks, dropping a partial tail.
pub fn blockize(y: &[u64], memory: usize) -> Blocks {
    let width = memory + 1;
    let full = y.len() / width * width;
    Blocks {
        width,
        values: y[..full].to_vec(),
    }
}

/// Robust letter typicality of the pilot blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalSetSpec {
    pub epsilon: f64,
    /// Poisson means `p_k Ê T_s + λ0` per block position.
    pub letter_laws: Vec<f64>,
    pub tail_mass: f64,
    pub block_count: usize,
    #[serde(skip)]
    laws: Vec<FiniteDistribution>,
}

impl TypicalSetSpec {
    pub fn new(
        params: &ChannelParams,
        peak: f64,
        epsilon: f64,
        tail_mass: f64,
        block_count: usize,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!("typicality slack must be > 0, got {epsilon}")));
        }
        let letter_laws: Vec<f64> = params
            .hit_probs()
            .iter()
            .map(|p| p * peak * params.slot_duration() + params.dark_current())
            .collect();
        let laws = letter_laws
            .iter()
            .map(|&m| poisson_pmf_truncated(m, tail_mass))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            epsilon,
            letter_laws,
            tail_mass,
            block_count,
            laws,
        })
    }

    /// Rebuilds the truncated laws after deserialization.
    pub fn revalidate(self) -> Result<Self> {
        let laws = self
            .letter_laws
            .iter()
            .map(|&m| poisson_pmf_truncated(m, self.tail_mass))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { laws, ..self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Typicality {
    Member,
    NotMember,
}

/// Per position `k` and support value `v`: `|freq_k(v) − pmf_k(v)| ≤ ε·pmf_k(v) + ε/|support_k|`.
pub fn typical_test(blocks: &Blocks, spec: &TypicalSetSpec) -> Result<Typicality> {
    if blocks.width() != spec.letter_laws.len() {
        return Err(Error::invalid(format!(
            "block width {} does not match {} letter laws",
            blocks.width(),
            spec.letter_laws.len()
        )));
    }
    if spec.epsilon.is_infinite() {
        return Ok(Typicality::Member);
    }
    let count = blocks.count();
    if count == 0 {
        return Ok(Typicality::NotMember);
    }
    for (k, law) in spec.laws.iter().enumerate() {
        let size = law.support().len();
        let mut hist = vec![0u64; size];
        for block in blocks.iter() {
            if let Some(slot) = hist.get_mut(block[k] as usize) {
                *slot += 1;
            }
        }
        let slack = spec.epsilon / size as f64;
        let typical = hist.iter().zip(law.mass()).all(|(&c, &pmf)| {
            let freq = c as f64 / count as f64;
            (freq - pmf).abs() <= spec.epsilon * pmf + slack
        });
        if !typical {
            return Ok(Typicality::NotMember);
        }
    }
    Ok(Typicality::Member)
}

/// Exponent `⌈n/(K+1)⌉ Σ_k H(letter_k)` of the typical-set size, in bits.
pub fn typical_log_size(n: usize, memory: usize, spec: &TypicalSetSpec) -> Result<f64> {
    let per_block: f64 = spec
        .letter_laws
        .iter()
        .map(|&m| poisson_entropy_exact(m, DEFAULT_TAIL_MASS))
        .sum::<Result<f64>>()?;
    Ok(n.div_ceil(memory + 1) as f64 * per_block)
}

/// Keyed hash family `F_i: blocks → [M]` for messages `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFamily {
    pub master_seed: u64,
    pub messages: u64,
    pub range: u64,
}

impl HashFamily {
    pub fn new(master_seed: u64, messages: u64, range: u64) -> Result<Self> {
        if range == 0 || range > messages {
            return Err(Error::invalid(format!(
                "hash range must satisfy 1 <= M <= N, got M={range}, N={messages}"
            )));
        }
        Ok(Self {
            master_seed,
            messages,
            range,
        })
    }
}

/// `l = 1 + (SHA-256(seed, i, blocks) mod M)`.
pub fn hash_message(i: u64, blocks: &Blocks, family: &HashFamily) -> Result<u64> {
    if i == 0 || i > family.messages {
        return Err(Error::invalid(format!("message {i} outside 1..={}", family.messages)));
    }
    if family.range == 1 {
        return Ok(1);
    }
    let mut hasher = Sha256::new();
    hasher.update(HASH_DOMAIN);
    hasher.update(family.master_seed.to_le_bytes());
    hasher.update(i.to_le_bytes());
    blocks.feed(&mut hasher);
    let digest = hasher.finalize();
    let word = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    Ok(1 + word % family.range)
}

/// Smallest power of two `≥ ⌈2/λ2⌉`: collisions then use at most half of `λ2`.
pub fn default_hash_range(lambda2: f64) -> Result<u64> {
    if !(lambda2 > 0.0 && lambda2 < 1.0) {
        return Err(Error::invalid(format!("lambda2 must lie in (0, 1), got {lambda2}")));
    }
    Ok(((2.0 / lambda2).ceil() as u64).next_power_of_two())
}

/// The short `(⌈√n⌉, M)` on–off transmission code for the hash value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerCode {
    length: usize,
    peak: f64,
    codewords: Vec<Vec<bool>>,
}

impl InnerCode {
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn range(&self) -> u64 {
        self.codewords.len() as u64
    }

    /// Release rates of codeword `l ∈ 1..=M`.
    pub fn codeword(&self, l: u64) -> Vec<f64> {
        self.codewords[(l - 1) as usize]
            .iter()
            .map(|&on| if on { self.peak } else { 0.0 })
            .collect()
    }

    /// Largest number of `Ê` slots in any codeword.
    pub fn max_weight(&self) -> usize {
        self.codewords
            .iter()
            .map(|c| c.iter().filter(|&&b| b).count())
            .max()
            .unwrap_or(0)
    }

    /// Maximum-likelihood decision over the `length + K` reception window.
    ///
    /// `prefix` holds the inputs sent before the code starts (only its last
    /// `K` entries matter); their ISI is part of every hypothesis. Ties go to
    /// the smallest index.
    pub fn decode(&self, window: &[u64], prefix: &[f64], params: &ChannelParams) -> Result<u64> {
        let k_mem = params.memory();
        if window.len() != self.length + k_mem {
            return Err(Error::invalid(format!(
                "inner window has {} slots, expected {}",
                window.len(),
                self.length + k_mem
            )));
        }
        if self.codewords.len() == 1 {
            return Ok(1);
        }
        let p = params.hit_probs();
        let ts = params.slot_duration();
        let tail = &prefix[prefix.len().saturating_sub(k_mem)..];
        let base: Vec<f64> = (0..window.len())
            .map(|t| {
                let isi: f64 = (t + 1..=k_mem)
                    .filter_map(|k| tail.len().checked_sub(k - t).map(|idx| p[k] * tail[idx]))
                    .sum();
                params.dark_current() + ts * isi
            })
            .collect();

        let mut best = (f64::NEG_INFINITY, 1u64);
        for (idx, cw) in self.codewords.iter().enumerate() {
            let score: f64 = window
                .iter()
                .enumerate()
                .map(|(t, &y)| {
                    let own: f64 = (t.saturating_sub(self.length - 1)..=t.min(k_mem))
                        .filter(|&k| cw[t - k])
                        .map(|k| p[k])
                        .sum();
                    poisson_log_pmf(y, base[t] + ts * self.peak * own)
                })
                .sum();
            if score > best.0 {
                best = (score, idx as u64 + 1);
            }
        }
        Ok(best.1)
    }
}

/// `M` distinct pseudorandom on–off codewords of length `⌈√n⌉` (each slot on
/// with probability ½).
pub fn build_inner_code(n: usize, range: u64, params: &ChannelParams, peak: f64, seed: u64) -> Result<InnerCode> {
    let _ = params;
    if range == 0 {
        return Err(Error::invalid("inner code needs M >= 1"));
    }
    if !(peak >= 0.0 && peak.is_finite()) {
        return Err(Error::invalid(format!("peak must be finite and >= 0, got {peak}")));
    }
    let length = (n as f64).sqrt().ceil() as usize;
    if length == 0 {
        return Err(Error::invalid("inner code length must be >= 1"));
    }
    if length < 64 && range > 1u64 << length {
        return Err(Error::RangeTooLarge { range, length });
    }
    let mut rng = labelled_rng(seed, &[INNER_STREAM]);
    let codewords = if length < 64 && range > (1u64 << length) / 2 {
        // dense: shuffle the whole space
        let mut all: Vec<u64> = (0..1u64 << length).collect();
        all.shuffle(&mut rng);
        all.truncate(range as usize);
        all.into_iter()
            .map(|bits| (0..length).map(|j| bits >> j & 1 == 1).collect())
            .collect()
    } else {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(range as usize);
        while out.len() < range as usize {
            let cw: Vec<bool> = (0..length).map(|_| rng.random::<bool>()).collect();
            if seen.insert(cw.clone()) {
                out.push(cw);
            }
        }
        out
    };
    Ok(InnerCode {
        length,
        peak,
        codewords,
    })
}

/// Empirical ML decoding error of the inner code, cycling through all `M`
/// codewords, with `prefix` inputs sent before it.
pub fn estimate_inner_error(
    code: &InnerCode,
    params: &ChannelParams,
    prefix: &[f64],
    trials: u64,
    seed: u64,
) -> Result<ErrorEstimate> {
    if trials == 0 {
        return Err(Error::invalid("inner-code error estimate needs trials >= 1"));
    }
    let k_mem = params.memory();
    let tail: Vec<f64> = prefix[prefix.len().saturating_sub(k_mem)..].to_vec();
    let stream = derive_seed(seed, &[INNER_ERROR_STREAM]);
    let failures = std::sync::atomic::AtomicBool::new(false);
    let counts = tally(trials, 1, |t, acc| {
        let l = 1 + t % code.range();
        let mut x = tail.clone();
        x.extend(code.codeword(l));
        let mu = convolve_intensity(&x, params);
        let window = sample_counts_from(&mu[tail.len()..], StreamKey::with_trial(stream, t), 0);
        match code.decode(&window, &tail, params) {
            Ok(hat) if hat == l => {}
            Ok(_) => acc[0] += 1,
            Err(_) => failures.store(true, std::sync::atomic::Ordering::Relaxed),
        }
    });
    if failures.into_inner() {
        return Err(Error::invalid("inner decoding failed on a malformed window"));
    }
    Ok(ErrorEstimate::from_counts(counts[0], trials))
}

/// Parameters of a DIF code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifSettings {
    /// Pilot length `n`; the whole code uses `m = n + ⌈√n⌉` input slots.
    pub n: usize,
    pub peak: f64,
    pub avg: f64,
    pub epsilon: f64,
    pub typicality_tail: f64,
    /// Number of message identities `N`.
    pub messages: u64,
    /// Hash range `M`; defaults to [`default_hash_range`] of `lambda2`.
    pub range: Option<u64>,
    pub lambda2: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifCode {
    pub pilot: PilotSpec,
    pub typ: TypicalSetSpec,
    pub hashes: HashFamily,
    pub inner: InnerCode,
    pub params: ChannelParams,
}

impl DifCode {
    /// Pilot length `n`.
    pub fn n(&self) -> usize {
        self.pilot.n
    }

    /// Total input length `m = n + ⌈√n⌉`.
    pub fn m(&self) -> usize {
        self.pilot.n + self.inner.length()
    }

    /// Reception window `m + K`.
    pub fn window(&self) -> usize {
        self.m() + self.params.memory()
    }

    /// Full input for hash value `l`.
    pub fn input_for(&self, l: u64) -> Vec<f64> {
        let mut x = self.pilot.input();
        x.extend(self.inner.codeword(l));
        x
    }
}

pub fn build_dif_code(params: &ChannelParams, settings: &DifSettings) -> Result<DifCode> {
    let pilot = build_pilot(settings.n, params, settings.peak)?;
    let typ = TypicalSetSpec::new(
        params,
        settings.peak,
        settings.epsilon,
        settings.typicality_tail,
        pilot.full_blocks(),
    )?;
    let range = match settings.range {
        Some(m) => m,
        None => default_hash_range(settings.lambda2)?,
    };
    let hashes = HashFamily::new(derive_seed(settings.seed, &[HASH_STREAM]), settings.messages, range)?;
    let inner = build_inner_code(settings.n, range, params, settings.peak, settings.seed)?;

    if !(settings.avg > 0.0) {
        return Err(Error::invalid(format!("average rate must be > 0, got {}", settings.avg)));
    }
    let pilot_energy: f64 = pilot.input().iter().sum();
    let worst = pilot_energy + inner.max_weight() as f64 * settings.peak;
    let m = (settings.n + inner.length()) as f64;
    if worst > m * settings.avg {
        return Err(Error::invalid(format!(
            "average power violated: worst-case total release {worst} > m * avg = {}",
            m * settings.avg
        )));
    }
    Ok(DifCode {
        pilot,
        typ,
        hashes,
        inner,
        params: params.clone(),
    })
}

/// What the encoder saw and did in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub message: u64,
    pub seed: u64,
    pub trial: u64,
    pub blocks: Blocks,
    pub typicality: Typicality,
    pub hash: u64,
}

pub fn dif_encode(i: u64, code: &DifCode, seed: u64) -> Result<(OutputSequence, Transcript)> {
    dif_encode_keyed(i, code, StreamKey::new(seed))
}

/// Runs the feedback encoder for message `i` through the channel.
///
/// Phase-1 receptions are sampled first and fed back; the hash they produce
/// selects the phase-2 codeword. Slot streams are numbered globally, and ISI
/// from the pilot into phase 2 follows from convolving the concatenated input.
pub fn dif_encode_keyed(i: u64, code: &DifCode, key: StreamKey) -> Result<(OutputSequence, Transcript)> {
    let n = code.n();
    let pilot = code.pilot.input();
    let pilot_mu = convolve_intensity(&pilot, &code.params);
    let mut y = sample_counts_from(&pilot_mu[..n], key, 0);

    let blocks = blockize(&y, code.params.memory());
    let typicality = typical_test(&blocks, &code.typ)?;
    let hash = hash_message(i, &blocks, &code.hashes)?;

    let mu = convolve_intensity(&code.input_for(hash), &code.params);
    y.extend(sample_counts_from(&mu[n..], key, n));

    let transcript = Transcript {
        message: i,
        seed: key.seed,
        trial: key.trial,
        blocks,
        typicality,
        hash,
    };
    Ok((OutputSequence::new(y), transcript))
}

/// Receiver-side view of a reception, independent of the tested message.
struct Observation {
    blocks: Blocks,
    typical: bool,
    decoded: u64,
}

fn observe(y: &[u64], code: &DifCode) -> Result<Observation> {
    if y.len() != code.window() {
        return Err(Error::invalid(format!(
            "reception length {} != m + K = {}",
            y.len(),
            code.window()
        )));
    }
    let n = code.n();
    let blocks = blockize(&y[..n], code.params.memory());
    let typical = typical_test(&blocks, &code.typ)? == Typicality::Member;
    let decoded = if typical {
        code.inner.decode(&y[n..], &code.pilot.input(), &code.params)?
    } else {
        0
    };
    Ok(Observation {
        blocks,
        typical,
        decoded,
    })
}

impl Observation {
    fn accepts(&self, tested: u64, code: &DifCode) -> Result<bool> {
        Ok(self.typical && self.decoded == hash_message(tested, &self.blocks, &code.hashes)?)
    }
}

pub fn dif_identify(tested: u64, y: &OutputSequence, code: &DifCode) -> Result<Decision> {
    let obs = observe(y.as_slice(), code)?;
    Ok(if obs.accepts(tested, code)? {
        Decision::Accept
    } else {
        Decision::Reject
    })
}

/// Empirical Type I error of every sender in `pairs` and Type II error of
/// every `(sent, tested)` pair.
pub fn estimate_dif_errors(code: &DifCode, pairs: &[(u64, u64)], trials: u64, seed: u64) -> Result<SimResult> {
    if trials == 0 {
        return Err(Error::invalid("estimate_dif_errors needs trials >= 1"));
    }
    if let Some((i, _)) = pairs.iter().find(|(i, j)| i == j) {
        return Err(Error::invalid(format!("Type II pair ({i}, {i}) must name two different messages")));
    }
    for &(i, j) in pairs {
        for msg in [i, j] {
            if msg == 0 || msg > code.hashes.messages {
                return Err(Error::invalid(format!("message {msg} outside 1..={}", code.hashes.messages)));
            }
        }
    }
    let senders: BTreeSet<u64> = pairs.iter().map(|&(i, _)| i).collect();

    let mut type_one = Vec::new();
    let mut type_two = Vec::new();
    for &sent in &senders {
        let tested: Vec<u64> = pairs.iter().filter(|(i, _)| *i == sent).map(|&(_, j)| j).collect();
        let stream = derive_seed(seed, &[DIF_STREAM, sent]);
        let failed = std::sync::Mutex::new(None);
        let counts = tally(trials, 1 + tested.len(), |t, acc| {
            let mut run = || -> Result<()> {
                let (y, _) = dif_encode_keyed(sent, code, StreamKey::with_trial(stream, t))?;
                let obs = observe(y.as_slice(), code)?;
                if !obs.accepts(sent, code)? {
                    acc[0] += 1;
                }
                for (slot, &j) in tested.iter().enumerate() {
                    if obs.accepts(j, code)? {
                        acc[1 + slot] += 1;
                    }
                }
                Ok(())
            };
            if let Err(e) = run() {
                *failed.lock().expect("poisoned") = Some(e);
            }
        });
        if let Some(e) = failed.into_inner().expect("poisoned") {
            return Err(e);
        }
        type_one.push(MessageEstimate {
            message: sent,
            error: ErrorEstimate::from_counts(counts[0], trials),
        });
        type_two.extend(tested.iter().enumerate().map(|(slot, &j)| PairEstimate {
            sent,
            tested: j,
            error: ErrorEstimate::from_counts(counts[1 + slot], trials),
        }));
    }

    Ok(SimResult {
        type_one,
        type_two,
        trials,
        seed,
        pair_sampling: PairSampling::Explicit { pairs: pairs.len() as u64 },
    })
}

/// Union-bound feasibility `(N − 1) · 2^{−2^{L}(λ2 log2 M − 1)} < 1`, with
/// `N = 2^{log2_messages}` and `L = log_size_bits`, evaluated in log space.
pub fn collision_bound_check(log2_messages: f64, range: u64, lambda2: f64, log_size_bits: f64) -> Result<bool> {
    if range == 0 || !(1.0 / range as f64) .lt(&lambda2) {
        return Err(Error::PreconditionViolated(format!(
            "need 1/M < lambda2, got M={range}, lambda2={lambda2}"
        )));
    }
    if !(log2_messages >= 0.0) {
        return Err(Error::invalid(format!("log2 N must be >= 0, got {log2_messages}")));
    }
    if log2_messages == 0.0 {
        return Ok(true);
    }
    let margin = lambda2 * (range as f64).log2() - 1.0;
    if margin <= 0.0 {
        return Ok(false);
    }
    let exponent = log_size_bits.exp2() * margin;
    // N - 1 < N, so N itself fitting settles it
    if log2_messages <= exponent {
        return Ok(true);
    }
    let log2_pred = log2_messages + (-(-log2_messages).exp2()).ln_1p() / std::f64::consts::LN_2;
    Ok(log2_pred < exponent)
}

/// `log2 log2 N` of the largest admissible code: `(n/(K+1)) Σ_k H(Pois(p_k Ê T_s + λ0))`.
pub fn max_messages_log_log(n: usize, params: &ChannelParams, peak: f64) -> Result<f64> {
    Ok(n as f64 / (params.memory() + 1) as f64 * pilot_entropy_sum(params, peak)?)
}

/// Doubly exponential rate `log log N / n`.
pub fn dif_rate(log_log_bits: f64, n: usize) -> f64 {
    log_log_bits / n as f64
}
