//! Deterministic, addressable random streams.
//!
//! Everything stochastic in this crate draws from ChaCha8 streams whose keys
//! are derived from `(seed, purpose, index)` triples. Because ChaCha is
//! counter-based, any single draw can also be regenerated in isolation by
//! seeking to its word position — so a sampler that fills a million values
//! sequentially and an oracle that later re-reads value 731,204 agree bit for
//! bit.
//!
//! Key concepts:
//! - **Purpose tags** keep unrelated consumers (exogenous noise, candy
//!   counts, response flips, subsample indices…) on disjoint streams even
//!   when they share a seed.
//! - **Slots**: each `(stream, sample)` pair owns a fixed-width window of the
//!   stream, so per-sample draws never overlap across samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exogenous leak noise for one SCM node.
pub const PURPOSE_EXOGENOUS: u64 = 0x01;
/// Gate noise for one SCM node (only consulted when the node is gated).
pub const PURPOSE_GATE: u64 = 0x02;
/// Surface realizations (candy counts, flower colors) for one node.
pub const PURPOSE_SURFACE: u64 = 0x03;
/// Response corruption in noisy scripted reasoners.
pub const PURPOSE_FLIP: u64 = 0x04;
/// Subsampling round → replicate selection during evaluation.
pub const PURPOSE_SUBSAMPLE: u64 = 0x05;
/// Structure/threshold/name choices during task generation.
pub const PURPOSE_GENERATE: u64 = 0x06;
/// Gaussian noise for linear models.
pub const PURPOSE_LINEAR: u64 = 0x07;
/// Retry backoff jitter for the remote client.
pub const PURPOSE_JITTER: u64 = 0x08;

/// Number of 32-bit words reserved per `(stream, sample)` slot.
///
/// One `f64` consumes two words; two slots-worth of headroom keeps room for
/// paired draws (e.g. leak + tiebreak) without a layout change.
const WORDS_PER_SLOT: u128 = 4;

/// Mix a sequence of tags into a 32-byte ChaCha key.
///
/// SplitMix64 over the running state; each tag perturbs the state before the
/// key words are squeezed out. Cheap, stable across platforms, and collisions
/// between distinct short tag lists are not a practical concern.
fn derive_key(tags: &[u64]) -> [u8; 32] {
    fn splitmix(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mut state = 0x5CA1_AB1E_0DDB_A11Du64;
    for &t in tags {
        state ^= t;
        let _ = splitmix(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    key
}

/// A fresh stream for `(seed, purpose, index)`, positioned at word 0.
pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(&[seed, purpose, index]))
}

/// One uniform in `[0, 1)` from the slot owned by `(stream, sample)`.
///
/// `offset` selects among the [`WORDS_PER_SLOT`]`/2` uniforms available in
/// the slot. Draw 0 of a slot agrees with the value a sequential reader of
/// the same stream would produce via [`fill_uniforms`].
pub fn uniform_at(seed: u64, purpose: u64, index: u64, sample: u64, offset: u8) -> f64 {
    debug_assert!((offset as u128) < WORDS_PER_SLOT / 2);
    let mut rng = stream(seed, purpose, index);
    rng.set_word_pos(sample as u128 * WORDS_PER_SLOT + 2 * offset as u128);
    rng.random::<f64>()
}

/// Fill `out[i]` with draw `offset` of sample `i`'s slot, sequentially.
///
/// Equivalent to calling [`uniform_at`] for `sample = 0..out.len()` but
/// walks the stream in order, which is considerably faster for bulk
/// sampling.
pub fn fill_uniforms(seed: u64, purpose: u64, index: u64, offset: u8, out: &mut [f64]) {
    let mut rng = stream(seed, purpose, index);
    for (i, slot) in out.iter_mut().enumerate() {
        rng.set_word_pos(i as u128 * WORDS_PER_SLOT + 2 * offset as u128);
        *slot = rng.random::<f64>();
    }
}
