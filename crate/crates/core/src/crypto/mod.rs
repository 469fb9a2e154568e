//! Hashing, the chameleon hash, and digital signatures.

mod chameleon;
mod group;
mod hash;
mod signature;

pub use chameleon::{
    adapt_exponent, ch_adapt, ch_hash, ch_hash_with_randomness, ch_keypair_from_secret, ch_kgen,
    ch_verify, ch_verify_encoded, commit, hash_to_scalar, ChameleonDigest, ChameleonKeyPair,
};
pub use group::{
    ch_pgen, GroupParams, Point, PrimeOrderGroup, Scalar, Secp256k1Group, ToyGroup,
    SECP256K1_ORDER_HEX, STANDARD_MAX_BITS, TOY_MAX_BITS,
};
pub use hash::{hash, Digest};
pub use signature::{ds_kgen, ds_sign, ds_verify, PublicKey, SecretKey, Signature, SigningKeyPair};

/// The group every protocol structure uses.
pub const STANDARD_GROUP: Secp256k1Group = Secp256k1Group;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("unsupported security level: {0} bits")]
    UnsupportedSecurityLevel(u32),
    #[error("invalid group parameters: {0}")]
    InvalidGroup(&'static str),
    #[error("chameleon trapdoor is zero or not invertible")]
    ZeroTrapdoor,
    #[error("chameleon hash does not open to the given message")]
    HashMismatch,
    #[error("malformed key encoding")]
    MalformedKey,
}
