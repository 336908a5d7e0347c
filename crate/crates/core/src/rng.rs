//! Counter-keyed random streams.
//!
//! A stream is identified by a master seed, a purpose tag and up to three
//! integer coordinates (level, block, replicate, time index, ...). The
//! first four words fill the ChaCha key and the last selects the ChaCha
//! stream, so distinct keys never share a keystream and any stream can be
//! regenerated in isolation, in any order, on any thread.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator every simulation routine draws from.
pub type Stream = ChaCha8Rng;

/// Purpose tags. Streams with different tags are independent.
pub mod tag {
    pub const STATIONARY_START: u64 = 0x5354_4152_5400_0001;
    pub const PATH: u64 = 0x5041_5448_0000_0002;
    pub const DELTA: u64 = 0x4445_4c54_4100_0003;
    pub const SPLIT: u64 = 0x5350_4c49_5400_0004;
    pub const CONDITIONAL: u64 = 0x434f_4e44_0000_0005;
    pub const DIAGNOSTIC: u64 = 0x4449_4147_0000_0006;
    pub const TAIL: u64 = 0x5441_494c_0000_0007;
    pub const SHUFFLE: u64 = 0x5348_5546_0000_0008;
}

/// Coordinates of one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master: u64,
    pub tag: u64,
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

impl StreamKey {
    pub const fn new(master: u64, tag: u64) -> Self {
        Self { master, tag, a: 0, b: 0, c: 0 }
    }

    pub const fn with(self, a: u64, b: u64, c: u64) -> Self {
        Self { a, b, c, ..self }
    }

    /// Same key, different replicate coordinate.
    pub const fn replicate(self, c: u64) -> Self {
        Self { c, ..self }
    }

    pub fn stream(&self) -> Stream {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master.to_le_bytes());
        seed[8..16].copy_from_slice(&self.tag.to_le_bytes());
        seed[16..24].copy_from_slice(&self.a.to_le_bytes());
        seed[24..32].copy_from_slice(&self.b.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.c);
        rng
    }

    /// First word of the stream, for deriving a seed from these coordinates.
    pub fn derive_seed(&self) -> u64 {
        self.stream().next_u64()
    }
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;
const TWO_POW_M52: f64 = 1.0 / (1u64 << 52) as f64;

/// Uniform on `[0, 1)` from the top 53 bits of a word.
#[inline]
pub fn unit_closed_open(bits: u64) -> f64 {
    (bits >> 11) as f64 * TWO_POW_M53
}

/// Uniform on the open interval `(0, 1)`; safe to feed into `Φ⁻¹`.
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * TWO_POW_M52
}

#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    unit_closed_open(rng.next_u64())
}

#[inline]
pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    unit_open(rng.next_u64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_reproducible_and_distinct() {
        let k = StreamKey::new(7, tag::PATH).with(1, 2, 3);
        assert_eq!(k.stream().next_u64(), k.stream().next_u64());
        assert_ne!(k.stream().next_u64(), k.replicate(4).stream().next_u64());
        assert_ne!(
            k.stream().next_u64(),
            StreamKey::new(7, tag::DELTA).with(1, 2, 3).stream().next_u64()
        );
    }

    #[test]
    fn unit_open_never_hits_endpoints() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
        assert_eq!(unit_closed_open(0), 0.0);
    }
}
