//! Deterministic randomness, organized as named streams.
//!
//! Every stochastic choice in the crate draws from a stream addressed by
//! `(seed, tag, indices...)`. Streams are independent by construction, so
//! adding a new consumer never perturbs existing draws, and per-item streams
//! (keyed by sample id or index) make results invariant to input order.
//!
//! The key derivation is a fixed FNV-1a fold with a SplitMix64 finalizer and
//! the generator is ChaCha8. Both are pinned here rather than delegated to
//! `StdRng` so that artifacts remain byte-stable across dependency upgrades.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    let mut h = state;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer: avalanches the FNV fold so that nearby keys
/// (consecutive indices, one-letter tags) land far apart.
fn finalize(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit key for the stream `(seed, tag, indices)`.
pub fn hash64(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a(h, tag.as_bytes());
    for &ix in indices {
        h = fnv1a(h, &ix.to_le_bytes());
    }
    finalize(h)
}

/// Generator for the stream `(seed, tag, indices)`.
pub fn stream(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash64(seed, tag, indices))
}

/// Generator for a per-item stream keyed by a string id.
pub fn stream_for_id(seed: u64, tag: &str, id: &str) -> ChaCha8Rng {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a(h, tag.as_bytes());
    h = fnv1a(h, id.as_bytes());
    ChaCha8Rng::seed_from_u64(finalize(h))
}

/// In-place Fisher-Yates shuffle. Hand-rolled so the permutation produced by
/// a given stream never changes underneath stored artifacts.
pub fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    if items.len() < 2 {
        return;
    }
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Standard normal draw via Box-Muller. One value per call; the paired second
/// value is discarded to keep the draw count independent of call sites.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Rejection on u1 == 0 keeps ln() finite; probability ~2^-53 per draw.
    let mut u1: f64 = rng.gen();
    while u1 <= f64::MIN_POSITIVE {
        u1 = rng.gen();
    }
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Draws an index in `0..weights.len()` with probability proportional to its
/// weight. Weights must be non-negative with a positive sum.
pub fn weighted_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "weighted_index needs a positive total");
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
