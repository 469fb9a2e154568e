//! ECDSA over secp256k1 behind a small sign/verify surface.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use k256::ecdsa::signature::{Signer, Verifier};
use k256::ecdsa::{SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

use super::CryptoError;

/// Compressed SEC1 verifying key. Ordering, equality and hashing follow the
/// 33-byte encoding.
#[derive(Clone, Copy)]
pub struct PublicKey {
    bytes: [u8; 33],
    key: VerifyingKey,
}

#[derive(Clone)]
pub struct SecretKey(SigningKey);

/// Fixed 64-byte `r || s` encoding.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);

#[derive(Clone, Debug)]
pub struct SigningKeyPair {
    pub pk: PublicKey,
    pub sk: SecretKey,
}

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let key = VerifyingKey::from_sec1_bytes(bytes).map_err(|_| CryptoError::MalformedKey)?;
        let point = key.to_encoded_point(true);
        let bytes: [u8; 33] = point
            .as_bytes()
            .try_into()
            .map_err(|_| CryptoError::MalformedKey)?;
        Ok(Self { bytes, key })
    }

    pub fn as_bytes(&self) -> &[u8; 33] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.bytes)
    }

    /// Attribute string naming this key in policies (`pk:<hex>`).
    pub fn identity_attribute(&self) -> String {
        format!("pk:{}", self.to_hex())
    }
}

impl SecretKey {
    pub fn public_key(&self) -> PublicKey {
        let key = *self.0.verifying_key();
        let bytes = key
            .to_encoded_point(true)
            .as_bytes()
            .try_into()
            .expect("compressed point is 33 bytes");
        PublicKey { bytes, key }
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes().into()
    }

    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Self, CryptoError> {
        SigningKey::from_bytes(bytes.into())
            .map(SecretKey)
            .map_err(|_| CryptoError::MalformedKey)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

pub fn ds_kgen<R: RngCore + CryptoRng>(rng: &mut R) -> SigningKeyPair {
    let sk = SecretKey(SigningKey::random(rng));
    SigningKeyPair {
        pk: sk.public_key(),
        sk,
    }
}

/// Deterministic (RFC 6979) ECDSA signature over SHA-256 of `m`.
pub fn ds_sign(m: &[u8], sk: &SecretKey) -> Signature {
    let sig: k256::ecdsa::Signature = sk.0.sign(m);
    Signature(sig.to_bytes().into())
}

pub fn ds_verify(sig: &Signature, m: &[u8], pk: &PublicKey) -> bool {
    match k256::ecdsa::Signature::from_bytes((&sig.0).into()) {
        Ok(s) => pk.key.verify(m, &s).is_ok(),
        Err(_) => false,
    }
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl Eq for PublicKey {}

impl PartialOrd for PublicKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PublicKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bytes.cmp(&other.bytes)
    }
}

impl Hash for PublicKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.bytes.hash(state)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..8]))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let raw = hex::decode(&text).map_err(D::Error::custom)?;
        PublicKey::from_bytes(&raw).map_err(D::Error::custom)
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let raw = hex::decode(&text).map_err(D::Error::custom)?;
        raw.try_into()
            .map(Signature)
            .map_err(|_| D::Error::custom("signature must be 64 bytes"))
    }
}

impl Serialize for SecretKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for SecretKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let raw: [u8; 32] = hex::decode(&text)
            .map_err(D::Error::custom)?
            .try_into()
            .map_err(|_| D::Error::custom("secret key must be 32 bytes"))?;
        SecretKey::from_bytes(&raw).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn sign_then_verify() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = ds_kgen(&mut rng);
        let sig = ds_sign(b"hello", &kp.sk);
        assert!(ds_verify(&sig, b"hello", &kp.pk));
    }

    #[test]
    fn wrong_key_and_flipped_bit_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let a = ds_kgen(&mut rng);
            let b = ds_kgen(&mut rng);
            let mut msg: Vec<u8> = (0..rng.gen_range(1..64)).map(|_| rng.gen()).collect();
            let sig = ds_sign(&msg, &a.sk);
            assert!(!ds_verify(&sig, &msg, &b.pk));
            let bit = rng.gen_range(0..msg.len() * 8);
            msg[bit / 8] ^= 1 << (bit % 8);
            assert!(!ds_verify(&sig, &msg, &a.pk));
        }
    }

    #[test]
    fn malformed_signature_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = ds_kgen(&mut rng);
        assert!(!ds_verify(&Signature([0u8; 64]), b"x", &kp.pk));
        assert!(!ds_verify(&Signature([0xffu8; 64]), b"x", &kp.pk));
    }

    #[test]
    fn key_encodings_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = ds_kgen(&mut rng);
        let pk = PublicKey::from_bytes(kp.pk.as_bytes()).unwrap();
        assert_eq!(pk, kp.pk);
        let sk = SecretKey::from_bytes(&kp.sk.to_bytes()).unwrap();
        assert_eq!(sk.public_key(), kp.pk);
        assert!(PublicKey::from_bytes(&[7u8; 33]).is_err());
        let json = serde_json::to_string(&kp.pk).unwrap();
        let back: PublicKey = serde_json::from_str(&json).unwrap();
        assert_eq!(back, kp.pk);
    }
}
