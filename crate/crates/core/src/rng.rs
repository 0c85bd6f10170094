//! Seeded random streams.
//!
//! All randomness in the crate flows through ChaCha8, a counter-based stream
//! generator, so every experiment is reproducible from a 64-bit seed. Multi
//! trial runs derive per-trial streams as `seed + trial`, which keeps
//! parallel trials independent of scheduling order.

use rand_chacha::ChaCha8Rng;

pub use rand::Rng;
pub use rand::SeedableRng;

/// The RNG used everywhere in this crate.
pub type Stream = ChaCha8Rng;

/// Stream for a single-shot computation.
pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

/// Stream for trial `trial` of a multi-trial run with base seed `seed`.
pub fn trial_stream(seed: u64, trial: u64) -> Stream {
    Stream::seed_from_u64(seed.wrapping_add(trial))
}

/// Standard normal draw.
pub fn gaussian(rng: &mut Stream) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Vector of standard normal draws.
pub fn gaussian_vec(rng: &mut Stream, len: usize) -> Vec<f64> {
    (0..len).map(|_| gaussian(rng)).collect()
}
