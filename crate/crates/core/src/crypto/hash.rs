use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

/// 32-byte SHA-256 output. Ordering is the big-endian numeric order, which
/// is what every difficulty comparison relies on.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Digest(#[serde(with = "crate::encoding::hex_array")] pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);
    pub const MAX: Digest = Digest([0xffu8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Largest value whose top `bits` bits are zero. A uniformly random
    /// digest falls strictly below it with probability about `2^-bits`.
    pub fn with_leading_zero_bits(bits: u32) -> Digest {
        let mut out = [0xffu8; 32];
        let bits = bits.min(256) as usize;
        for (i, byte) in out.iter_mut().enumerate() {
            let start = i * 8;
            if start + 8 <= bits {
                *byte = 0;
            } else if start < bits {
                *byte = 0xff >> (bits - start);
            }
        }
        Digest(out)
    }

    pub fn leading_zero_bits(&self) -> u32 {
        let mut n = 0;
        for b in self.0 {
            if b == 0 {
                n += 8;
            } else {
                n += b.leading_zeros();
                break;
            }
        }
        n
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

pub fn hash(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_input_vector() {
        assert_eq!(
            hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn deterministic() {
        assert_eq!(hash(b"efrb"), hash(b"efrb"));
    }

    #[test]
    fn single_bit_flip_changes_digest() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let len = rng.gen_range(1..128);
            let mut msg: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let before = hash(&msg);
            let bit = rng.gen_range(0..len * 8);
            msg[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(before, hash(&msg));
        }
    }

    #[test]
    fn leading_zero_targets() {
        assert_eq!(Digest::with_leading_zero_bits(0), Digest::MAX);
        let t = Digest::with_leading_zero_bits(12);
        assert_eq!(t.0[0], 0);
        assert_eq!(t.0[1], 0x0f);
        assert_eq!(t.0[2], 0xff);
        assert_eq!(t.leading_zero_bits(), 12);
        assert_eq!(Digest::with_leading_zero_bits(256), Digest::ZERO);
    }
}
