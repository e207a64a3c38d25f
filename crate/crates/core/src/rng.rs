//! The one pseudorandom generator used by every seeded routine.
//!
//! Generator: xoshiro256++ whose four state words are the first four outputs
//! of SplitMix64 started at the 64-bit seed. Random-walk signs take the top
//! bit of successive `next_u64` outputs, drawn in row-major order
//! (round by round, expert by expert); a set bit means `+sigma`. Any
//! language with a xoshiro256++ and SplitMix64 implementation reproduces the
//! loss matrices bit for bit.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Fair coin from the top bit of the next output.
#[inline]
pub fn coin(rng: &mut Rng) -> bool {
    rng.next_u64() >> 63 == 1
}

/// Derives an independent stream seed, for example per repeat or per purpose.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut r = seeded(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    r.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference implementation of the documented algorithm.
    fn splitmix64(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn reference_stream(seed: u64, n: usize) -> Vec<u64> {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for w in s.iter_mut() {
            *w = splitmix64(&mut sm);
        }
        (0..n)
            .map(|_| {
                let out = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
                let t = s[1] << 17;
                s[2] ^= s[0];
                s[3] ^= s[1];
                s[1] ^= s[2];
                s[0] ^= s[3];
                s[2] ^= t;
                s[3] = s[3].rotate_left(45);
                out
            })
            .collect()
    }

    #[test]
    fn matches_documented_algorithm() {
        for seed in [0u64, 1, 42, u64::MAX] {
            let mut r = seeded(seed);
            let got: Vec<u64> = (0..16).map(|_| r.next_u64()).collect();
            assert_eq!(got, reference_stream(seed, 16), "seed {seed}");
        }
    }
}
