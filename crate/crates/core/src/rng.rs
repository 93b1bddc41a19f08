//! Reproducible randomness.
//!
//! Every random draw in the crate comes from an [`RngStream`], a `(seed, stream_id)` pair
//! that materializes a ChaCha8 generator on demand. Sub-streams are derived
//! deterministically from `(purpose, index)` so that the randomness consumed in round `t`
//! never depends on how much randomness earlier rounds, or other replicas, consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Tags used when deriving sub-streams, so that e.g. the adversary of round `t` and the
/// choice sampler of round `t` never share a stream.
pub mod purpose {
    pub const ADVERSARY: u64 = 0x01;
    pub const CHOICE: u64 = 0x02;
    pub const DISTRIBUTION: u64 = 0x03;
    pub const NOISE: u64 = 0x04;
    pub const MONTE_CARLO_CHUNK: u64 = 0x05;
    pub const CORPUS: u64 = 0x06;
    pub const EDGE_TIMES: u64 = 0x07;
}

/// A named, reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Derives the child stream for `(purpose, index)`. The mapping is a pure function of
    /// the parent and the arguments.
    pub fn substream(&self, purpose: u64, index: u64) -> Self {
        let mut h = splitmix64(self.stream_id ^ 0x9e37_79b9_7f4a_7c15);
        h = splitmix64(h ^ purpose);
        h = splitmix64(h ^ index);
        Self {
            seed: self.seed,
            stream_id: h,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draw(stream: RngStream, k: usize) -> Vec<u64> {
        let mut rng = stream.rng();
        (0..k).map(|_| rng.random()).collect()
    }

    #[test]
    fn same_stream_same_sequence() {
        let s = RngStream::with_stream(42, 7);
        assert_eq!(draw(s, 16), draw(s, 16));
    }

    #[test]
    fn distinct_streams_differ() {
        let a = RngStream::with_stream(42, 7);
        let b = RngStream::with_stream(42, 8);
        assert_ne!(draw(a, 4), draw(b, 4));
        assert_ne!(a.substream(purpose::CHOICE, 3), a.substream(purpose::NOISE, 3));
        assert_ne!(a.substream(purpose::CHOICE, 3), a.substream(purpose::CHOICE, 4));
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 200_000;
        let mut a = RngStream::new(1).substream(purpose::NOISE, 0).rng();
        let mut b = RngStream::new(1).substream(purpose::NOISE, 1).rng();
        let (mut sab, mut sa, mut sb, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x: f64 = a.random();
            let y: f64 = b.random();
            sab += x * y;
            sa += x;
            sb += y;
            saa += x * x;
            sbb += y * y;
        }
        let nf = n as f64;
        let cov = sab / nf - (sa / nf) * (sb / nf);
        let corr = cov / ((saa / nf - (sa / nf).powi(2)) * (sbb / nf - (sb / nf).powi(2))).sqrt();
        // 5 standard errors of a sample correlation under independence.
        assert!(corr.abs() < 5.0 / nf.sqrt(), "corr = {corr}");
    }
}
