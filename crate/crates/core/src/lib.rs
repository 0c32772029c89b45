//! Core primitives for the `lrsha` and `flrsha` signature schemes.
//!
//! Both schemes follow the Schnorr shape but replace the public commitment
//! inside the challenge hash with a secret one-time mask, so the signer never
//! performs a group exponentiation. The commitments verifiers need are derived
//! and certified by a fleet of commitment-construction servers instead.
//!
//! Module map:
//! - [`group`]: prime-order group abstraction with a production ristretto255
//!   backend and a tiny modular-arithmetic backend for oracle testing.
//! - [`keyderive`]: PRF, hash-to-scalar, hash chains and the interleaved
//!   chain table used for the computation/storage trade-off.
//! - [`cert`]: commitment certification — plain Schnorr certificates and a
//!   forward-secure variant built from a key chain plus a Merkle tree.
//! - [`lrsha`] / [`flrsha`]: the two signature schemes themselves.
//! - [`descriptor`] / [`wire`]: verifier-facing deployment descriptor and the
//!   JSON wire protocol spoken by commitment servers.

pub mod cert;
pub mod descriptor;
pub mod flrsha;
pub mod group;
pub mod keyderive;
pub mod lrsha;
pub mod merkle;
pub mod metrics;
pub mod params;
pub mod sig;
pub mod wire;

mod error;

pub use error::SchemeError;
pub use group::{elem_product, exp, scalar_sum, verify_eq, GroupElement, GroupError, GroupId, Scalar};
pub use keyderive::Seed;
pub use params::{SchemeParams, SchemeTag};
pub use sig::{Signature, SIGNATURE_LEN};
