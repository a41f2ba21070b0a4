//! Counter-derived random number streams.
//!
//! Every consumer of randomness owns an [`RngStream`] derived from the master
//! seed and a [`StreamId`] = (phase, iteration, index). Streams with distinct
//! ids are statistically independent, and a given (seed, id) pair always
//! yields the same sequence, so parallel phases reproduce bit-identically no
//! matter how work is scheduled. Parallelism splits ids, never shares a
//! stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Algorithm phase owning a family of streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Phase {
    Init = 1,
    Mutate = 2,
    Resample = 3,
    Volume = 4,
    Posterior = 5,
    Tune = 6,
    Projection = 7,
    Validate = 8,
}

/// Identifier of one logical random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub phase: Phase,
    pub iteration: u64,
    pub index: u64,
}

impl StreamId {
    pub fn new(phase: Phase, iteration: u64, index: u64) -> Self {
        Self { phase, iteration, index }
    }
}

/// splitmix64 finalizer; a bijection on u64 with good avalanche.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seeded, single-owner random stream.
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    /// Derive the stream for `(master_seed, id)`.
    pub fn new(master_seed: u64, id: StreamId) -> Self {
        let mut state = mix(master_seed);
        state = mix(state ^ mix(id.phase as u64));
        state = mix(state ^ mix(id.iteration));
        state = mix(state ^ mix(id.index));
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = mix(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self { inner: ChaCha8Rng::from_seed(seed) }
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(self)
    }

    /// Standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Uniform index in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        rand::Rng::random_range(self, 0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}
