//! Counter-based random streams.
//!
//! Every consumer derives its generator from `(seed, stream)`; ChaCha is a
//! counter-mode generator, so the `n`-th variate of a stream is a pure
//! function of `(seed, stream, n)` and never depends on scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::special_fn::normal_quantile;

const TWO_POW_M52: f64 = 1.0 / (1u64 << 52) as f64;

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * TWO_POW_M52
}

/// Standard normal variates by inversion, one 64-bit word per variate.
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            rng: stream_rng(seed, stream),
        }
    }

    /// Positions the stream so the next variate is the `index`-th one.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(2 * index as u128);
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        normal_quantile(open_unit(self.rng.next_u64()))
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.next_normal();
        }
    }
}
