//! Seeded randomness. Every stochastic step draws from a `ChaCha8Rng` whose seed is
//! derived from the run seed plus a stream key, so results do not depend on call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recorded in run manifests so replays can pick the same generator.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9) seeded by splitmix64 key derivation, v1";

pub type StoneRng = ChaCha8Rng;

/// Stream tags keep independent consumers of the same run seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    InitialPool = 1,
    McDropout = 2,
    Random = 3,
    Badge = 4,
    Synth = 5,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a run seed with a stream tag, round and item key into a child seed.
pub fn derive_seed(run_seed: u64, stream: Stream, round: u64, key: u64) -> u64 {
    let mut h = splitmix64(run_seed);
    for part in [stream as u64, round, key] {
        h = splitmix64(h ^ part);
    }
    h
}

pub fn rng_from_seed(seed: u64) -> StoneRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(run_seed: u64, stream: Stream, round: u64, key: u64) -> StoneRng {
    rng_from_seed(derive_seed(run_seed, stream, round, key))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let a = derive_seed(7, Stream::McDropout, 1, 42);
        assert_eq!(a, derive_seed(7, Stream::McDropout, 1, 42));
        assert_ne!(a, derive_seed(7, Stream::McDropout, 2, 42));
        assert_ne!(a, derive_seed(7, Stream::Random, 1, 42));
        let x: u64 = derived_rng(7, Stream::Badge, 0, 0).random();
        let y: u64 = derived_rng(7, Stream::Badge, 0, 0).random();
        assert_eq!(x, y);
    }
}
