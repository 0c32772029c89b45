//! Prime-order group abstraction.
//!
//! Two interchangeable backends sit behind the same value types:
//!
//! - `ristretto255`: the production group, a prime-order group of ~128-bit
//!   security built on Curve25519.
//! - `toy23`: the subgroup of order q = 11 generated by 2 in Z_23*. Every
//!   equation over it can be recomputed by hand or by a naive big-integer
//!   oracle, which is exactly what the test suite does.
//!
//! Scalars are always reduced mod q and encode to exactly 32 little-endian
//! bytes; group elements encode to exactly 32 bytes and decoding validates
//! membership in the order-q subgroup. Invalid encodings are rejected, never
//! reduced.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::CompressedRistretto;
use curve25519_dalek::traits::Identity;
use curve25519_dalek::RistrettoPoint;
use curve25519_dalek::Scalar as DalekScalar;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::metrics;

/// Length of every canonical scalar and element encoding.
pub const ENCODED_LEN: usize = 32;

/// Modulus of the toy backend's ambient field.
pub const TOY_P: u64 = 23;
/// Order of the toy backend's subgroup.
pub const TOY_Q: u64 = 11;
/// Generator of the toy subgroup.
pub const TOY_GENERATOR: u64 = 2;

#[derive(Debug, thiserror::Error, Clone, Copy, PartialEq, Eq)]
pub enum GroupError {
    #[error("not a canonical scalar encoding")]
    InvalidScalar,
    #[error("not a canonical group element encoding")]
    InvalidElement,
    #[error("empty element list")]
    EmptyList,
    #[error("unknown group id")]
    UnknownGroup,
}

/// Identifies which backend a value belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupId {
    #[serde(rename = "ristretto255")]
    Ristretto255,
    #[serde(rename = "toy23")]
    Toy23,
}

impl GroupId {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupId::Ristretto255 => "ristretto255",
            GroupId::Toy23 => "toy23",
        }
    }

    pub fn from_str(s: &str) -> Result<Self, GroupError> {
        match s {
            "ristretto255" => Ok(GroupId::Ristretto255),
            "toy23" => Ok(GroupId::Toy23),
            _ => Err(GroupError::UnknownGroup),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            GroupId::Ristretto255 => 1,
            GroupId::Toy23 => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, GroupError> {
        match code {
            1 => Ok(GroupId::Ristretto255),
            2 => Ok(GroupId::Toy23),
            _ => Err(GroupError::UnknownGroup),
        }
    }

    /// The fixed generator of the order-q subgroup.
    pub fn generator(self) -> GroupElement {
        match self {
            GroupId::Ristretto255 => GroupElement::Ristretto(RISTRETTO_BASEPOINT_POINT),
            GroupId::Toy23 => GroupElement::Toy(TOY_GENERATOR),
        }
    }

    /// The group identity.
    pub fn identity(self) -> GroupElement {
        match self {
            GroupId::Ristretto255 => GroupElement::Ristretto(RistrettoPoint::identity()),
            GroupId::Toy23 => GroupElement::Toy(1),
        }
    }

    /// Uniform nonzero scalar.
    pub fn random_scalar<R: RngCore + CryptoRng>(self, rng: &mut R) -> Scalar {
        loop {
            let mut wide = [0u8; 64];
            rng.fill_bytes(&mut wide);
            let s = self.scalar_reduce_wide(&wide);
            if !s.is_zero() {
                return s;
            }
        }
    }

    /// Scalar from a small integer, reduced mod q. Mostly useful with the toy
    /// backend where scalars are hand-picked.
    pub fn scalar_from_u64(self, v: u64) -> Scalar {
        match self {
            GroupId::Ristretto255 => Scalar::Ristretto(DalekScalar::from(v)),
            GroupId::Toy23 => Scalar::Toy(v % TOY_Q),
        }
    }

    /// Decode a canonical 32-byte little-endian scalar. Non-canonical
    /// encodings (value >= q or junk in the padding) are rejected.
    pub fn scalar_from_bytes(self, bytes: &[u8; 32]) -> Result<Scalar, GroupError> {
        match self {
            GroupId::Ristretto255 => {
                let opt: Option<DalekScalar> = DalekScalar::from_canonical_bytes(*bytes).into();
                opt.map(Scalar::Ristretto).ok_or(GroupError::InvalidScalar)
            }
            GroupId::Toy23 => {
                if bytes[1..].iter().any(|&b| b != 0) || u64::from(bytes[0]) >= TOY_Q {
                    return Err(GroupError::InvalidScalar);
                }
                Ok(Scalar::Toy(u64::from(bytes[0])))
            }
        }
    }

    /// Reduce 64 little-endian bytes mod q. Used for hash and PRF outputs so
    /// the reduction bias is negligible.
    pub fn scalar_reduce_wide(self, bytes: &[u8; 64]) -> Scalar {
        match self {
            GroupId::Ristretto255 => Scalar::Ristretto(DalekScalar::from_bytes_mod_order_wide(bytes)),
            GroupId::Toy23 => Scalar::Toy(reduce_le_bytes(bytes, TOY_Q)),
        }
    }

    /// Reduce 32 little-endian bytes mod q. Used where chain values are
    /// consumed as scalars.
    pub fn scalar_reduce(self, bytes: &[u8; 32]) -> Scalar {
        match self {
            GroupId::Ristretto255 => Scalar::Ristretto(DalekScalar::from_bytes_mod_order(*bytes)),
            GroupId::Toy23 => Scalar::Toy(reduce_le_bytes(bytes, TOY_Q)),
        }
    }

    /// Decode a canonical 32-byte group element, checking membership in the
    /// order-q subgroup.
    pub fn element_from_bytes(self, bytes: &[u8; 32]) -> Result<GroupElement, GroupError> {
        match self {
            GroupId::Ristretto255 => CompressedRistretto::from_slice(bytes)
                .ok()
                .and_then(|c| c.decompress())
                .map(GroupElement::Ristretto)
                .ok_or(GroupError::InvalidElement),
            GroupId::Toy23 => {
                if bytes[1..].iter().any(|&b| b != 0) {
                    return Err(GroupError::InvalidElement);
                }
                let v = u64::from(bytes[0]);
                if v == 0 || v >= TOY_P || toy_pow(v, TOY_Q) != 1 {
                    return Err(GroupError::InvalidElement);
                }
                Ok(GroupElement::Toy(v))
            }
        }
    }
}

impl std::fmt::Display for GroupId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An integer in [0, q), always reduced.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Scalar {
    Ristretto(DalekScalar),
    Toy(u64),
}

impl Scalar {
    pub fn group(&self) -> GroupId {
        match self {
            Scalar::Ristretto(_) => GroupId::Ristretto255,
            Scalar::Toy(_) => GroupId::Toy23,
        }
    }

    /// Canonical 32-byte little-endian encoding, zero-padded.
    pub fn encode(&self) -> [u8; 32] {
        match self {
            Scalar::Ristretto(s) => s.to_bytes(),
            Scalar::Toy(v) => {
                let mut out = [0u8; 32];
                out[0] = *v as u8;
                out
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Ristretto(s) => *s == DalekScalar::ZERO,
            Scalar::Toy(v) => *v == 0,
        }
    }

    /// (self + other) mod q.
    pub fn add(&self, other: &Scalar) -> Scalar {
        metrics::bump(|c| c.scalar_add += 1);
        match (self, other) {
            (Scalar::Ristretto(a), Scalar::Ristretto(b)) => Scalar::Ristretto(a + b),
            (Scalar::Toy(a), Scalar::Toy(b)) => Scalar::Toy((a + b) % TOY_Q),
            _ => panic!("group backend mismatch in scalar_add"),
        }
    }

    /// (self - e * y) mod q, the response computation of the Schnorr shape.
    pub fn mulsub(&self, e: &Scalar, y: &Scalar) -> Scalar {
        metrics::bump(|c| c.scalar_mulsub += 1);
        match (self, e, y) {
            (Scalar::Ristretto(r), Scalar::Ristretto(e), Scalar::Ristretto(y)) => {
                Scalar::Ristretto(r - e * y)
            }
            (Scalar::Toy(r), Scalar::Toy(e), Scalar::Toy(y)) => {
                Scalar::Toy((r + TOY_Q - (e * y) % TOY_Q) % TOY_Q)
            }
            _ => panic!("group backend mismatch in scalar_mulsub"),
        }
    }
}

impl std::fmt::Debug for Scalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Scalars are usually secret; keep them out of debug output.
        write!(f, "Scalar({})", self.group())
    }
}

/// An element of the order-q subgroup.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum GroupElement {
    Ristretto(RistrettoPoint),
    Toy(u64),
}

impl GroupElement {
    pub fn group(&self) -> GroupId {
        match self {
            GroupElement::Ristretto(_) => GroupId::Ristretto255,
            GroupElement::Toy(_) => GroupId::Toy23,
        }
    }

    /// Canonical 32-byte encoding. `element_from_bytes` inverts this exactly.
    pub fn encode(&self) -> [u8; 32] {
        match self {
            GroupElement::Ristretto(p) => p.compress().to_bytes(),
            GroupElement::Toy(v) => {
                let mut out = [0u8; 32];
                out[0] = *v as u8;
                out
            }
        }
    }

    /// Group operation (point addition / modular multiplication).
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        match (self, other) {
            (GroupElement::Ristretto(a), GroupElement::Ristretto(b)) => {
                GroupElement::Ristretto(a + b)
            }
            (GroupElement::Toy(a), GroupElement::Toy(b)) => GroupElement::Toy((a * b) % TOY_P),
            _ => panic!("group backend mismatch in element mul"),
        }
    }
}

impl std::fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GroupElement({}, {})", self.group(), hex::encode(self.encode()))
    }
}

/// base^x. The only expensive operation in the system; instrumented so tests
/// can assert it never runs on the signing path.
pub fn exp(base: &GroupElement, x: &Scalar) -> GroupElement {
    metrics::bump(|c| c.exp += 1);
    match (base, x) {
        (GroupElement::Ristretto(b), Scalar::Ristretto(s)) => GroupElement::Ristretto(b * s),
        (GroupElement::Toy(b), Scalar::Toy(v)) => GroupElement::Toy(toy_pow(*b, *v)),
        _ => panic!("group backend mismatch in exp"),
    }
}

/// Product of a non-empty list of group elements.
pub fn elem_product(xs: &[GroupElement]) -> Result<GroupElement, GroupError> {
    let (first, rest) = xs.split_first().ok_or(GroupError::EmptyList)?;
    let mut acc = *first;
    for x in rest {
        acc = acc.mul(x);
    }
    Ok(acc)
}

/// Sum of a non-empty list of scalars.
pub fn scalar_sum(xs: &[Scalar]) -> Result<Scalar, GroupError> {
    let (first, rest) = xs.split_first().ok_or(GroupError::EmptyList)?;
    let mut acc = *first;
    for x in rest {
        acc = acc.add(x);
    }
    Ok(acc)
}

/// The verification equation: R == alpha^s * Y^e.
pub fn verify_eq(r: &GroupElement, s: &Scalar, y: &GroupElement, e: &Scalar) -> bool {
    let alpha = r.group().generator();
    let rhs = exp(&alpha, s).mul(&exp(y, e));
    rhs == *r
}

/// Square-and-multiply in Z_23*.
fn toy_pow(base: u64, mut e: u64) -> u64 {
    let mut acc = 1u64;
    let mut b = base % TOY_P;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % TOY_P;
        }
        b = b * b % TOY_P;
        e >>= 1;
    }
    acc
}

/// Little-endian bytes mod m, for small m.
fn reduce_le_bytes(bytes: &[u8], m: u64) -> u64 {
    let mut acc = 0u64;
    for &b in bytes.iter().rev() {
        acc = (acc * 256 + u64::from(b)) % m;
    }
    acc
}
