//! Seeded, stream-splittable random number generation.
//!
//! Every random artifact is produced from a `(seed, stream)` pair. The
//! generator is ChaCha8 in counter mode, so independent streams need no
//! coordination and any run can be replayed bit for bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifies the exact position of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngTag {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone)]
pub struct StreamRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        StreamRng { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn tag(&self) -> RngTag {
        RngTag { seed: self.seed, stream: self.stream, word_pos: self.inner.get_word_pos() }
    }

    /// A fresh generator on a derived stream. Streams are addressed as
    /// `(stream << 20) | child` so nested fan-out stays disjoint.
    pub fn child(&self, child: u64) -> StreamRng {
        StreamRng::new(self.seed, (self.stream << 20) | (child & 0xF_FFFF))
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
