//! Seedable, splittable random streams.
//!
//! A stream is a ChaCha8 generator keyed by `seed` and positioned on a 64-bit
//! ChaCha stream id. The master stream of a seed has id 0; `substream(i)`
//! keeps the key and moves to the id `mix(parent_id, i)`, so sub-streams are
//! non-overlapping, reproducible and independent of the order in which they
//! are consumed.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::at(seed, 0)
    }

    fn at(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// The `index`-th child stream. Depends only on this stream's seed and id,
    /// never on how many draws have been taken from it.
    pub fn substream(&self, index: u64) -> Self {
        let id = splitmix64(self.stream ^ splitmix64(index.wrapping_add(1)));
        Self::at(self.seed, id)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Exponential with the given rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_open().ln() / rate
    }

    /// Index drawn proportionally to nonnegative `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.uniform() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = i;
            if target < acc {
                return i;
            }
        }
        last
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let mut a = RandomStream::new(42);
        let mut b = RandomStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RandomStream::new(43);
        assert_ne!(RandomStream::new(42).next_u64(), c.next_u64());
    }

    #[test]
    fn substreams_ignore_parent_position() {
        let fresh = RandomStream::new(7);
        let mut used = RandomStream::new(7);
        for _ in 0..17 {
            used.next_u64();
        }
        assert_eq!(fresh.substream(3).next_u64(), used.substream(3).next_u64());
        assert_ne!(fresh.substream(3).next_u64(), fresh.substream(4).next_u64());
        assert_ne!(fresh.substream(0).next_u64(), RandomStream::new(7).next_u64());
    }

    #[test]
    fn open_uniform_never_hits_bounds() {
        let mut r = RandomStream::new(1);
        for _ in 0..10_000 {
            let u = r.uniform_open();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut r = RandomStream::new(5);
        for _ in 0..1000 {
            assert_ne!(r.categorical(&[0.0, 1.0, 0.0, 2.0]) % 2, 0);
        }
    }
}
