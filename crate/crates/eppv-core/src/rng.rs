//! Seed derivation and RNG construction.
//!
//! Every randomized unit of work (a simulation replicate, a latent draw, a
//! bootstrap resample) gets its own seed derived from a parent seed and a
//! stream index, so results do not depend on execution order or thread
//! count. Derivation uses ChaCha8 as a PRF: the parent seed keys the cipher
//! and the stream index selects the nonce, so distinct `(seed, index)` pairs
//! yield independent child seeds.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministically derive a child seed from `(seed, index)`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// The RNG used throughout the crate, constructed from a derived seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
