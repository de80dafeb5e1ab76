//! Deterministic seed derivation.
//!
//! Every stochastic stage takes a single `u64` master seed and derives
//! per-purpose child seeds from it, so runs replay exactly regardless of
//! thread scheduling or map iteration order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer. Decorrelates nearby seeds (0, 1, 2, ...) so child
/// streams do not overlap even when callers pick small consecutive seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed, a stage label, and an index.
/// The label keeps streams for different purposes apart even when the
/// indices coincide.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut acc = mix(master);
    for byte in label.as_bytes() {
        acc = mix(acc ^ u64::from(*byte));
    }
    mix(acc ^ index)
}

/// Seeded RNG used everywhere randomness is needed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
