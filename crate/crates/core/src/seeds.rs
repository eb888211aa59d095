//! Deterministic random streams.
//!
//! Every replica draws from its own ChaCha stream keyed by `(seed, stream)`.
//! Streams with distinct keys never share state, so results do not depend on
//! which worker ran which replica.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Bits reserved for the replica index inside a stream key.
pub const INDEX_BITS: u32 = 48;

pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream key for replica `index` of arm `arm`. Injective for
/// `arm < 2^16` and `index < 2^48`.
pub fn stream_key(arm: u16, index: u64) -> u64 {
    assert!(index < (1 << INDEX_BITS), "replica index {index} too large");
    ((arm as u64) << INDEX_BITS) | index
}

/// Child seed for replica `index` derived from a caller-owned generator:
/// one `u64` is drawn from the parent, replicas use `(base, index)` streams.
pub fn fork(parent: &mut impl RngCore) -> u64 {
    parent.next_u64()
}

/// Splitmix64 finaliser, used to derive per-sweep-point master seeds.
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn keys_are_distinct() {
        let mut seen = HashSet::new();
        for arm in 0..4u16 {
            for index in 0..1000u64 {
                assert!(seen.insert(stream_key(arm, index)));
            }
        }
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: Vec<u64> = (0..4).map({
            let mut r = stream_rng(9, 1);
            move |_| r.next_u64()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = stream_rng(9, 2);
            move |_| r.next_u64()
        }).collect();
        let c: Vec<u64> = (0..4).map({
            let mut r = stream_rng(9, 1);
            move |_| r.next_u64()
        }).collect();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
