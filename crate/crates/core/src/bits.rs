//! Random bit sources and seed splitting.
//!
//! Every randomized component in the crate consumes single fair bits from a
//! [`BitSource`]. The seeded implementation buffers one 64-bit word from a
//! ChaCha8 stream and hands its bits out least-significant first, so a given
//! seed always produces the same bit sequence regardless of how callers
//! interleave their draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub trait BitSource {
    fn next_bit(&mut self) -> bool;

    /// Uniform index in `{1, 2}` from one bit.
    fn next_index(&mut self) -> u8 {
        if self.next_bit() {
            2
        } else {
            1
        }
    }
}

/// Bits drawn from a seeded ChaCha8 generator.
#[derive(Debug, Clone)]
pub struct SeededBits {
    rng: ChaCha8Rng,
    word: u64,
    left: u32,
    consumed: u64,
}

impl SeededBits {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            word: 0,
            left: 0,
            consumed: 0,
        }
    }

    /// Number of bits handed out so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }
}

impl BitSource for SeededBits {
    fn next_bit(&mut self) -> bool {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.word & 1 == 1;
        self.word >>= 1;
        self.left -= 1;
        self.consumed += 1;
        bit
    }
}

/// Replays a fixed bit string. Used to drive branch enumeration and to pin
/// transcripts in tests. Panics if asked for more bits than scripted.
#[derive(Debug, Clone)]
pub struct ScriptedBits<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl<'a> ScriptedBits<'a> {
    pub fn new(bits: &'a [bool]) -> Self {
        Self { bits, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl BitSource for ScriptedBits<'_> {
    fn next_bit(&mut self) -> bool {
        let b = *self
            .bits
            .get(self.pos)
            .expect("scripted bit source exhausted");
        self.pos += 1;
        b
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: `splitmix64(seed ^ splitmix64(trial))`.
///
/// Trials can run in any order or in parallel and still see the same bits.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_bits_are_reproducible() {
        let mut a = SeededBits::new(7);
        let mut b = SeededBits::new(7);
        let xs: Vec<bool> = (0..200).map(|_| a.next_bit()).collect();
        let ys: Vec<bool> = (0..200).map(|_| b.next_bit()).collect();
        assert_eq!(xs, ys);
        assert_eq!(a.consumed(), 200);
    }

    #[test]
    fn seeded_bits_are_roughly_fair() {
        let mut s = SeededBits::new(1);
        let ones = (0..100_000).filter(|_| s.next_bit()).count();
        // 4 standard errors of a fair coin at n = 1e5 is ~632.
        assert!((ones as i64 - 50_000).abs() < 632, "ones = {ones}");
    }

    #[test]
    fn trial_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|t| trial_seed(42, t)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    #[should_panic(expected = "exhausted")]
    fn scripted_bits_run_out() {
        let bits = [true];
        let mut s = ScriptedBits::new(&bits);
        assert!(s.next_bit());
        s.next_bit();
    }
}
