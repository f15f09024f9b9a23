use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Concrete generator behind every sample stream.
pub type StreamRng = ChaCha8Rng;

/// Words reserved for each block of a stream; far more than any block draws.
const BLOCK_WORDS: u128 = 1 << 40;

/// Identifies a reproducible sample stream.
///
/// The generator is counter-based (ChaCha8): `seed` fixes the key,
/// `stream_index` selects the ChaCha stream, and [`RngSeed::block_rng`]
/// jumps to a fixed word offset inside that stream, so work can be split into
/// blocks that are generated independently of which worker runs them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngSeed {
    pub const fn new(seed: u64, stream_index: u64) -> Self {
        RngSeed { seed, stream_index }
    }

    pub fn rng(&self) -> StreamRng {
        self.block_rng(0)
    }

    pub fn block_rng(&self, block: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng.set_word_pos(u128::from(block) * BLOCK_WORDS);
        rng
    }

    /// A different stream under the same key.
    pub fn with_stream(&self, stream_index: u64) -> Self {
        RngSeed {
            seed: self.seed,
            stream_index,
        }
    }
}

/// `count` i.i.d. `N(0, variance)` samples from the stream named by `seed`.
pub fn gaussian_samples<T: Scalar>(seed: RngSeed, count: usize, variance: T) -> Vec<T> {
    assert!(variance > T::zero(), "variance must be positive");
    let sigma = variance.sqrt();
    let mut rng = seed.rng();
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(z) * sigma
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_deterministic() {
        assert!(gaussian_samples::<f64>(RngSeed::new(1, 0), 0, 1.0).is_empty());
        let a = gaussian_samples(RngSeed::new(7, 3), 1000, 2.0);
        let b = gaussian_samples(RngSeed::new(7, 3), 1000, 2.0);
        assert_eq!(a, b);
        let c = gaussian_samples(RngSeed::new(7, 4), 1000, 2.0);
        assert_ne!(a, c);
    }

    #[test]
    fn moments_of_a_million_samples() {
        let n = 1_000_000;
        let xs = gaussian_samples(RngSeed::new(2024, 0), n, 1.0f64);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        // Standard errors: 1/sqrt(n) for the mean, sqrt(2/n) for the variance.
        assert!(mean.abs() <= 5.0 / (n as f64).sqrt());
        assert!((0.994..=1.006).contains(&var), "variance {var}");

        let xs = gaussian_samples(RngSeed::new(5, 1), n, 0.25f64);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var - 0.25).abs() <= 5.0 * 0.25 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn blocks_are_disjoint_and_reproducible() {
        let s = RngSeed::new(11, 0);
        let a: f64 = StandardNormal.sample(&mut s.block_rng(5));
        let b: f64 = StandardNormal.sample(&mut s.block_rng(5));
        let c: f64 = StandardNormal.sample(&mut s.block_rng(6));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
