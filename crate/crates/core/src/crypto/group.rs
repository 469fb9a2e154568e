//! Prime-order groups used by the chameleon hash.
//!
//! Two instantiations exist: a small multiplicative subgroup of `Z_p^*`
//! for exhaustive tests, and the secp256k1 point group for everything
//! else.

use std::fmt;

use k256::elliptic_curve::group::GroupEncoding;
use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use k256::elliptic_curve::{Field, PrimeField};
use k256::{AffinePoint, EncodedPoint, ProjectivePoint, U256};
use rand::RngCore;
use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

use super::{CryptoError, Digest};

pub trait PrimeOrderGroup {
    type Scalar: Clone + PartialEq + fmt::Debug;
    type Element: Clone + PartialEq + fmt::Debug;

    fn generator(&self) -> Self::Element;
    fn identity(&self) -> Self::Element;
    /// The group operation.
    fn combine(&self, a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn pow(&self, base: &Self::Element, exp: &Self::Scalar) -> Self::Element;

    fn scalar_from_u64(&self, v: u64) -> Self::Scalar;
    fn scalar_add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_sub(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_invert(&self, a: &Self::Scalar) -> Option<Self::Scalar>;
    fn is_zero(&self, a: &Self::Scalar) -> bool;
    /// Big-endian interpretation of the digest, reduced mod q.
    fn scalar_from_digest(&self, d: &Digest) -> Self::Scalar;
    /// Uniform in `[0, q)`.
    fn random_scalar(&self, rng: &mut dyn RngCore) -> Self::Scalar;

    fn encode_element(&self, e: &Self::Element) -> Vec<u8>;
    fn decode_element(&self, bytes: &[u8]) -> Option<Self::Element>;
    fn encode_scalar(&self, s: &Self::Scalar) -> [u8; 32];
    fn decode_scalar(&self, bytes: &[u8; 32]) -> Option<Self::Scalar>;

    /// Uniform in `[1, q-1]`.
    fn random_nonzero_scalar(&self, rng: &mut dyn RngCore) -> Self::Scalar {
        loop {
            let s = self.random_scalar(rng);
            if !self.is_zero(&s) {
                return s;
            }
        }
    }
}

/// Output of `ch_pgen`: the parameters selected for a security level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupParams {
    Toy(ToyGroup),
    Standard(Secp256k1Group),
}

impl GroupParams {
    pub fn order_hex(&self) -> String {
        match self {
            GroupParams::Toy(g) => format!("{:x}", g.q),
            GroupParams::Standard(_) => SECP256K1_ORDER_HEX.to_string(),
        }
    }

    pub fn security_bits(&self) -> u32 {
        match self {
            GroupParams::Toy(g) => 64 - g.q.leading_zeros(),
            GroupParams::Standard(_) => 128,
        }
    }
}

/// Security levels `1..=TOY_MAX_BITS` select the shipped toy group and
/// `..=STANDARD_MAX_BITS` select secp256k1. Anything else is rejected.
pub const TOY_MAX_BITS: u32 = 5;
pub const STANDARD_MAX_BITS: u32 = 128;

pub const SECP256K1_ORDER_HEX: &str =
    "fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141";

pub fn ch_pgen(security_bits: u32) -> Result<GroupParams, CryptoError> {
    match security_bits {
        0 => Err(CryptoError::UnsupportedSecurityLevel(0)),
        1..=TOY_MAX_BITS => Ok(GroupParams::Toy(ToyGroup::shipped())),
        b if b <= STANDARD_MAX_BITS => Ok(GroupParams::Standard(Secp256k1Group)),
        b => Err(CryptoError::UnsupportedSecurityLevel(b)),
    }
}

/// Order-q subgroup of `Z_p^*`, small enough to enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyGroup {
    pub p: u64,
    pub q: u64,
    pub g: u64,
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ((acc as u128 * base as u128) % m as u128) as u64;
        }
        base = ((base as u128 * base as u128) % m as u128) as u64;
        exp >>= 1;
    }
    acc
}

impl ToyGroup {
    /// p = 47, q = 23, g = 2.
    pub fn shipped() -> Self {
        Self { p: 47, q: 23, g: 2 }
    }

    pub fn new(p: u64, q: u64, g: u64) -> Result<Self, CryptoError> {
        if p > u32::MAX as u64 || !is_prime(p) || !is_prime(q) || (p - 1) % q != 0 {
            return Err(CryptoError::InvalidGroup("p, q must be primes with q | p-1"));
        }
        if g <= 1 || g >= p || mod_pow(g, q, p) != 1 {
            return Err(CryptoError::InvalidGroup("generator must have order q"));
        }
        Ok(Self { p, q, g })
    }
}

impl PrimeOrderGroup for ToyGroup {
    type Scalar = u64;
    type Element = u64;

    fn generator(&self) -> u64 {
        self.g
    }
    fn identity(&self) -> u64 {
        1
    }
    fn combine(&self, a: &u64, b: &u64) -> u64 {
        (a * b) % self.p
    }
    fn pow(&self, base: &u64, exp: &u64) -> u64 {
        mod_pow(*base, *exp, self.p)
    }
    fn scalar_from_u64(&self, v: u64) -> u64 {
        v % self.q
    }
    fn scalar_add(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.q
    }
    fn scalar_sub(&self, a: &u64, b: &u64) -> u64 {
        (a + self.q - b % self.q) % self.q
    }
    fn scalar_mul(&self, a: &u64, b: &u64) -> u64 {
        (a * b) % self.q
    }
    fn scalar_invert(&self, a: &u64) -> Option<u64> {
        // q is prime: a^(q-2) is the inverse.
        (a % self.q != 0).then(|| mod_pow(*a, self.q - 2, self.q))
    }
    fn is_zero(&self, a: &u64) -> bool {
        a % self.q == 0
    }
    fn scalar_from_digest(&self, d: &Digest) -> u64 {
        d.0.iter().fold(0u64, |acc, &b| (acc * 256 + b as u64) % self.q)
    }
    fn random_scalar(&self, rng: &mut dyn RngCore) -> u64 {
        // Rejection sampling keeps the distribution exactly uniform.
        let zone = u64::MAX - u64::MAX % self.q;
        loop {
            let v = rng.next_u64();
            if v < zone {
                return v % self.q;
            }
        }
    }
    fn encode_element(&self, e: &u64) -> Vec<u8> {
        e.to_be_bytes().to_vec()
    }
    fn decode_element(&self, bytes: &[u8]) -> Option<u64> {
        let raw: [u8; 8] = bytes.try_into().ok()?;
        let v = u64::from_be_bytes(raw);
        (v > 0 && v < self.p && mod_pow(v, self.q, self.p) == 1).then_some(v)
    }
    fn encode_scalar(&self, s: &u64) -> [u8; 32] {
        let mut out = [0u8; 32];
        out[24..].copy_from_slice(&s.to_be_bytes());
        out
    }
    fn decode_scalar(&self, bytes: &[u8; 32]) -> Option<u64> {
        if bytes[..24].iter().any(|&b| b != 0) {
            return None;
        }
        let v = u64::from_be_bytes(bytes[24..].try_into().ok()?);
        (v < self.q).then_some(v)
    }
}

/// The secp256k1 point group (order ≈ 2^256).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Secp256k1Group;

/// secp256k1 scalar mod the curve order.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(pub k256::Scalar);

/// secp256k1 group element, SEC1-compressed on the wire.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Point(pub ProjectivePoint);

impl Scalar {
    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes().into()
    }

    pub fn from_bytes(bytes: &[u8; 32]) -> Option<Scalar> {
        Option::from(k256::Scalar::from_repr((*bytes).into())).map(Scalar)
    }
}

impl Point {
    /// 33 bytes for ordinary points, a single 0x00 byte for the identity.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_affine().to_encoded_point(true).as_bytes().to_vec()
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Point> {
        let encoded = EncodedPoint::from_bytes(bytes).ok()?;
        let affine: Option<AffinePoint> = AffinePoint::from_encoded_point(&encoded).into();
        affine.map(|a| Point(a.into()))
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.to_bytes()))
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({})", hex::encode(self.0.to_bytes()))
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let raw: [u8; 32] = hex::decode(&text)
            .map_err(D::Error::custom)?
            .try_into()
            .map_err(|_| D::Error::custom("scalar must be 32 bytes"))?;
        Scalar::from_bytes(&raw).ok_or_else(|| D::Error::custom("scalar out of range"))
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let raw = hex::decode(&text).map_err(D::Error::custom)?;
        Point::from_bytes(&raw).ok_or_else(|| D::Error::custom("invalid point encoding"))
    }
}

impl PrimeOrderGroup for Secp256k1Group {
    type Scalar = Scalar;
    type Element = Point;

    fn generator(&self) -> Point {
        Point(ProjectivePoint::GENERATOR)
    }
    fn identity(&self) -> Point {
        Point(ProjectivePoint::IDENTITY)
    }
    fn combine(&self, a: &Point, b: &Point) -> Point {
        Point(a.0 + b.0)
    }
    fn pow(&self, base: &Point, exp: &Scalar) -> Point {
        Point(base.0 * exp.0)
    }
    fn scalar_from_u64(&self, v: u64) -> Scalar {
        Scalar(k256::Scalar::from(v))
    }
    fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar(a.0 + b.0)
    }
    fn scalar_sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar(a.0 - b.0)
    }
    fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar(a.0 * b.0)
    }
    fn scalar_invert(&self, a: &Scalar) -> Option<Scalar> {
        Option::from(a.0.invert()).map(Scalar)
    }
    fn is_zero(&self, a: &Scalar) -> bool {
        bool::from(a.0.is_zero())
    }
    fn scalar_from_digest(&self, d: &Digest) -> Scalar {
        Scalar(<k256::Scalar as Reduce<U256>>::reduce_bytes(&d.0.into()))
    }
    fn random_scalar(&self, mut rng: &mut dyn RngCore) -> Scalar {
        Scalar(k256::Scalar::random(&mut rng))
    }
    fn encode_element(&self, e: &Point) -> Vec<u8> {
        e.to_bytes()
    }
    fn decode_element(&self, bytes: &[u8]) -> Option<Point> {
        Point::from_bytes(bytes)
    }
    fn encode_scalar(&self, s: &Scalar) -> [u8; 32] {
        s.to_bytes()
    }
    fn decode_scalar(&self, bytes: &[u8; 32]) -> Option<Scalar> {
        Scalar::from_bytes(bytes)
    }
}
