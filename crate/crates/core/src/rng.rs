//! Random streams.
//!
//! Every run owns one xoshiro256++ generator (Blackman & Vigna). A 64-bit
//! seed is expanded into the 256-bit state with SplitMix64
//! (increment `0x9E3779B97F4A7C15`, multipliers `0xBF58476D1CE4E5B9` and
//! `0x94D049BB133111EB`), which is what `SeedableRng::seed_from_u64` does
//! for this generator. Batch run `k` uses seed `seed_base + k`.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SwarmRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SwarmRng {
    SwarmRng::seed_from_u64(seed)
}

/// Uniform draw on `(0, 1]`, safe to pass to `ln`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Inverse-CDF transform of an exponential distribution with the given mean.
pub fn exponential_from_uniform(mean: f64, u: f64) -> f64 {
    -mean * u.ln()
}

pub fn exponential<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    exponential_from_uniform(mean, open_unit(rng))
}
