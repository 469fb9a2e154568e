//! Discrete-log chameleon hash: `h = g^e(m) * pk^r` with `pk = g^sk`.
//!
//! Knowing `sk` lets anyone find `r'` with `g^e(m') * pk^r' = h` for any
//! `m'`. In this protocol the trapdoor is published inside every
//! redactable transaction, so collision finding is never the security
//! boundary; the signatures around it are.

use rand::RngCore;

use super::group::PrimeOrderGroup;
use super::{hash, CryptoError};

#[derive(Clone, Debug, PartialEq)]
pub struct ChameleonKeyPair<G: PrimeOrderGroup> {
    pub pk: G::Element,
    pub sk: G::Scalar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChameleonDigest<G: PrimeOrderGroup> {
    pub h: G::Element,
    pub r: G::Scalar,
}

pub fn ch_kgen<G: PrimeOrderGroup>(group: &G, rng: &mut dyn RngCore) -> ChameleonKeyPair<G> {
    let sk = group.random_nonzero_scalar(rng);
    let pk = group.pow(&group.generator(), &sk);
    ChameleonKeyPair { pk, sk }
}

/// Builds the key pair for a caller-chosen trapdoor.
pub fn ch_keypair_from_secret<G: PrimeOrderGroup>(
    group: &G,
    sk: G::Scalar,
) -> Result<ChameleonKeyPair<G>, CryptoError> {
    if group.is_zero(&sk) {
        return Err(CryptoError::ZeroTrapdoor);
    }
    let pk = group.pow(&group.generator(), &sk);
    Ok(ChameleonKeyPair { pk, sk })
}

/// `e(m)`: SHA-256 of `m`, big-endian, reduced mod q.
pub fn hash_to_scalar<G: PrimeOrderGroup>(group: &G, m: &[u8]) -> G::Scalar {
    group.scalar_from_digest(&hash(m))
}

/// `g^e * pk^r` for an already-derived exponent.
pub fn commit<G: PrimeOrderGroup>(
    group: &G,
    pk: &G::Element,
    e: &G::Scalar,
    r: &G::Scalar,
) -> G::Element {
    group.combine(&group.pow(&group.generator(), e), &group.pow(pk, r))
}

pub fn ch_hash<G: PrimeOrderGroup>(
    group: &G,
    pk: &G::Element,
    m: &[u8],
    rng: &mut dyn RngCore,
) -> ChameleonDigest<G> {
    let r = group.random_scalar(rng);
    ch_hash_with_randomness(group, pk, m, r)
}

pub fn ch_hash_with_randomness<G: PrimeOrderGroup>(
    group: &G,
    pk: &G::Element,
    m: &[u8],
    r: G::Scalar,
) -> ChameleonDigest<G> {
    let h = commit(group, pk, &hash_to_scalar(group, m), &r);
    ChameleonDigest { h, r }
}

pub fn ch_verify<G: PrimeOrderGroup>(
    group: &G,
    pk: &G::Element,
    h: &G::Element,
    r: &G::Scalar,
    m: &[u8],
) -> bool {
    commit(group, pk, &hash_to_scalar(group, m), r) == *h
}

/// Same as [`ch_verify`] but takes encoded inputs; any malformed encoding
/// yields `false`.
pub fn ch_verify_encoded<G: PrimeOrderGroup>(
    group: &G,
    pk: &[u8],
    h: &[u8],
    r: &[u8; 32],
    m: &[u8],
) -> bool {
    match (
        group.decode_element(pk),
        group.decode_element(h),
        group.decode_scalar(r),
    ) {
        (Some(pk), Some(h), Some(r)) => ch_verify(group, &pk, &h, &r, m),
        _ => false,
    }
}

/// `r' = r + (e - e') * sk^-1 mod q`.
pub fn adapt_exponent<G: PrimeOrderGroup>(
    group: &G,
    sk: &G::Scalar,
    r: &G::Scalar,
    e: &G::Scalar,
    e_new: &G::Scalar,
) -> Result<G::Scalar, CryptoError> {
    let inv = group.scalar_invert(sk).ok_or(CryptoError::ZeroTrapdoor)?;
    let delta = group.scalar_mul(&group.scalar_sub(e, e_new), &inv);
    Ok(group.scalar_add(r, &delta))
}

/// Finds `r'` such that `(h, r')` opens to `m_new`. Fails when `(h, r)`
/// does not open to `m` under the public key derived from `sk`.
pub fn ch_adapt<G: PrimeOrderGroup>(
    group: &G,
    sk: &G::Scalar,
    h: &G::Element,
    r: &G::Scalar,
    m: &[u8],
    m_new: &[u8],
) -> Result<G::Scalar, CryptoError> {
    if group.is_zero(sk) {
        return Err(CryptoError::ZeroTrapdoor);
    }
    let pk = group.pow(&group.generator(), sk);
    if !ch_verify(group, &pk, h, r, m) {
        return Err(CryptoError::HashMismatch);
    }
    adapt_exponent(
        group,
        sk,
        r,
        &hash_to_scalar(group, m),
        &hash_to_scalar(group, m_new),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::group::{Secp256k1Group, ToyGroup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_kgen_forced_secret() {
        let g = ToyGroup::shipped();
        // 2^5 mod 47 = 32
        assert_eq!(ch_keypair_from_secret(&g, 5).unwrap().pk, 32);
        assert_eq!(ch_keypair_from_secret(&g, 1).unwrap().pk, g.generator());
        assert!(ch_keypair_from_secret(&g, 0).is_err());
    }

    #[test]
    fn toy_commit_worked_example() {
        let g = ToyGroup::shipped();
        // 2^3 * 32^4 mod 47: 8 * 6 = 48 = 1
        assert_eq!(commit(&g, &32, &3, &4), 1);
        assert_eq!(commit(&g, &32, &0, &0), g.identity());
    }

    #[test]
    fn toy_adapt_worked_example() {
        let g = ToyGroup::shipped();
        // 5^-1 mod 23 = 14; 4 + (3 - 7) * 14 = -52 = 17 (mod 23)
        let r_new = adapt_exponent(&g, &5, &4, &3, &7).unwrap();
        assert_eq!(r_new, 17);
        assert_eq!(commit(&g, &32, &7, &17), 1);
    }

    #[test]
    fn adapt_zero_delta_and_involution() {
        let g = Secp256k1Group;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kp = ch_kgen(&g, &mut rng);
        let d = ch_hash(&g, &kp.pk, b"m", &mut rng);
        assert_eq!(ch_adapt(&g, &kp.sk, &d.h, &d.r, b"m", b"m").unwrap(), d.r);
        let r1 = ch_adapt(&g, &kp.sk, &d.h, &d.r, b"m", b"m2").unwrap();
        let r2 = ch_adapt(&g, &kp.sk, &d.h, &r1, b"m2", b"m").unwrap();
        assert_eq!(r2, d.r);
    }

    #[test]
    fn adapt_rejects_bad_precondition_and_zero_key() {
        let g = Secp256k1Group;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let kp = ch_kgen(&g, &mut rng);
        let d = ch_hash(&g, &kp.pk, b"m", &mut rng);
        assert_eq!(
            ch_adapt(&g, &kp.sk, &d.h, &d.r, b"other", b"x"),
            Err(CryptoError::HashMismatch)
        );
        let zero = g.scalar_from_u64(0);
        assert_eq!(
            ch_adapt(&g, &zero, &d.h, &d.r, b"m", b"x"),
            Err(CryptoError::ZeroTrapdoor)
        );
    }

    #[test]
    fn randomized_hashing_differs_across_seeds() {
        let g = Secp256k1Group;
        let kp = ch_kgen(&g, &mut ChaCha8Rng::seed_from_u64(1));
        let a = ch_hash(&g, &kp.pk, b"m", &mut ChaCha8Rng::seed_from_u64(10));
        let b = ch_hash(&g, &kp.pk, b"m", &mut ChaCha8Rng::seed_from_u64(11));
        assert_ne!(a.r, b.r);
        assert_ne!(a.h, b.h);
        let k2 = ch_kgen(&g, &mut ChaCha8Rng::seed_from_u64(2));
        assert_ne!(kp.sk, k2.sk);
    }

    #[test]
    fn verify_flags_bit_flip_and_malformed_input() {
        let g = Secp256k1Group;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kp = ch_kgen(&g, &mut rng);
        let d = ch_hash(&g, &kp.pk, b"message", &mut rng);
        assert!(ch_verify(&g, &kp.pk, &d.h, &d.r, b"message"));
        assert!(!ch_verify(&g, &kp.pk, &d.h, &d.r, b"messagf"));
        let pk = g.encode_element(&kp.pk);
        let h = g.encode_element(&d.h);
        let r = g.encode_scalar(&d.r);
        assert!(ch_verify_encoded(&g, &pk, &h, &r, b"message"));
        assert!(!ch_verify_encoded(&g, &pk[..10], &h, &r, b"message"));
        assert!(!ch_verify_encoded(&g, &pk, &[0xff; 33], &r, b"message"));
        assert!(!ch_verify_encoded(&g, &pk, &h, &[0xff; 32], b"message"));
    }
}
