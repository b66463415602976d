//! Counter-based random streams.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream selected by
//! a `(master_seed, domain, index)` triple. The key is derived from the master
//! seed and a domain tag, the 64-bit ChaCha stream id is the index. Two draws
//! with the same triple are bit-identical no matter which thread asks or in
//! what order, which is what makes ensembles schedule-independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream families. Changing a value changes every result drawn
/// from that family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    SourceFrame = 0x5352_4346,
    IntensityTrace = 0x5452_4143,
    Thinning = 0x5448_494e,
    Jitter = 0x4a49_5454,
    HbtBlock = 0x4842_4c4b,
    Selftest = 0x5445_5354,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Returns the generator for `(master_seed, domain, index)`.
pub fn stream(master_seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut state = master_seed ^ (domain as u64).rotate_left(32);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, used when a component takes a plain `u64` seed but
/// needs several independent sub-streams.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut state = seed ^ salt.wrapping_mul(0xd1b5_4a32_d192_ed03);
    splitmix64(&mut state)
}

/// Uniform draw on the open interval (0, 1) from 52 random bits.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn same_triple_same_stream() {
        let mut a = stream(7, Domain::SourceFrame, 3);
        let mut b = stream(7, Domain::SourceFrame, 3);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ_by_index_domain_and_seed() {
        let first = |s, d, i| stream(s, d, i).next_u64();
        let base = first(7, Domain::SourceFrame, 3);
        assert_ne!(base, first(7, Domain::SourceFrame, 4));
        assert_ne!(base, first(7, Domain::Jitter, 3));
        assert_ne!(base, first(8, Domain::SourceFrame, 3));
    }

    #[test]
    fn open_unit_is_open() {
        assert!(open_unit(0) > 0.0);
        assert!(open_unit(u64::MAX) < 1.0);
    }
}
