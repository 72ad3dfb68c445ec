//! Deterministic randomness.
//!
//! Every random stream in the library is a ChaCha20 generator. Streams are
//! keyed by a 64-bit seed that is derived from the experiment's master seed,
//! a purpose label and a round index, so that adding a new consumer never
//! perturbs the draws of an existing one.
//!
//! Permutations use Fisher–Yates driven by [`bounded`], an unbiased
//! rejection sampler over raw `u64` outputs. Both the generator and the
//! sampler are fixed here so that every party holding the same seed derives
//! the same permutation on any platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type Stream = ChaCha20Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed from `(master, label, index)`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = FNV_OFFSET;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(splitmix64(master ^ h).wrapping_add(index))
}

/// A ChaCha20 stream keyed by `seed`.
pub fn stream(seed: u64) -> Stream {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Uniform integer in `0..bound` without modulo bias.
pub fn bounded<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    assert!(bound > 0, "bounded() needs a positive bound");
    // Largest multiple of `bound` representable; reject draws at or above it.
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Fisher–Yates permutation of `0..len` seeded by `seed`.
///
/// Element `i` of the result is the source index placed at position `i`.
pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    let mut rng = stream(seed);
    for i in (1..len).rev() {
        let j = bounded(&mut rng, i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    idx
}

/// `count` distinct indices from `0..len`, in draw order (partial Fisher–Yates).
pub fn sample_indices(len: usize, count: usize, seed: u64) -> Vec<usize> {
    assert!(count <= len);
    let mut rng = stream(seed);
    sample_indices_with(&mut rng, len, count)
}

pub fn sample_indices_with<R: RngCore + ?Sized>(rng: &mut R, len: usize, count: usize) -> Vec<usize> {
    assert!(count <= len);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..count {
        let j = i + bounded(rng, (len - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx
}
