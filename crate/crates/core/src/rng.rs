//! Counter-derived random streams and the Poisson sampler.
//!
//! Every random draw in the crate comes from a stream keyed by
//! `(master_seed, trial, slot)` (or another small tuple of counters), so a
//! result never depends on the order in which trials or slots are evaluated.

use rand::Rng;
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The stream generator handed out by [`StreamKey::slot_rng`] and friends.
pub type StreamRng = Xoshiro256PlusPlus;

/// Below this mean the sampler uses sequential inversion, above it PTRS.
pub const INVERSION_CUTOFF: f64 = 10.0;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a tuple of counters into a master seed with the SplitMix64 finalizer.
///
/// Each word is absorbed after a golden-ratio increment so that `(a, b)` and
/// `(b, a)` land on unrelated seeds.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut h = mix64(master.wrapping_add(GOLDEN_GAMMA));
    for (pos, &w) in words.iter().enumerate() {
        let salt = GOLDEN_GAMMA.wrapping_mul(pos as u64 + 2);
        h = mix64(h ^ mix64(w.wrapping_add(salt)));
    }
    h
}

/// Identifies one Monte Carlo trial under a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub trial: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed, trial: 0 }
    }

    pub fn with_trial(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    /// Generator for a single channel slot of this trial.
    pub fn slot_rng(&self, slot: u64) -> StreamRng {
        StreamRng::seed_from_u64(derive_seed(self.seed, &[self.trial, slot]))
    }
}

/// Generator for an arbitrary labelled sub-stream of `seed`.
pub fn labelled_rng(seed: u64, words: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, words))
}

/// Draws one Poisson(`mean`) variate.
///
/// Inversion by sequential search for `mean < 10`, Hörmann's transformed
/// rejection with squeeze (PTRS) otherwise. `mean` must be finite and >= 0.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    debug_assert!(mean.is_finite() && mean >= 0.0);
    if mean <= 0.0 {
        0
    } else if mean < INVERSION_CUTOFF {
        poisson_inversion(mean, rng)
    } else {
        poisson_ptrs(mean, rng)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // the cap only triggers when rounding leaves cdf a hair below u
    while u > cdf && k < 1000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    let log_mean = mean.ln();
    let b = 0.931 + 2.53 * mean.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);

    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * log_mean - libm::lgamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}
