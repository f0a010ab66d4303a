//! Counter-based random streams.
//!
//! Every stream is a ChaCha12 keystream selected by `(seed, stream_id)` and
//! positioned at a block offset, so a draw depends only on its coordinates and
//! never on which thread produced it.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

/// Words reserved per block: 2^36 32-bit words before two blocks overlap.
const BLOCK_WORDS: u128 = 1 << 36;

#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::at_block(seed, stream_id, 0)
    }

    /// Stream positioned at `block`, e.g. one block per transition of a path.
    pub fn at_block(seed: u64, stream_id: u64, block: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        rng.set_word_pos(block as u128 * BLOCK_WORDS);
        Self { rng }
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for o in out {
            *o = self.normal();
        }
    }

    pub fn normal_vec(&mut self, n: usize) -> alloc::vec::Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// SplitMix64 finalizer, used to derive sub-seeds from a master seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
