//! The constant-size signature emitted by both schemes.

use crate::group::{GroupId, Scalar};
use crate::SchemeError;

/// s(32) || x(32) || j(8, little-endian).
pub const SIGNATURE_LEN: usize = 72;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    /// Schnorr response s_j.
    pub s: Scalar,
    /// One-time mask x_j, disclosed only after signing.
    pub mask: [u8; 32],
    /// Epoch (state counter) the signature was produced at.
    pub epoch: u64,
}

impl Signature {
    pub fn encode(&self) -> [u8; SIGNATURE_LEN] {
        let mut out = [0u8; SIGNATURE_LEN];
        out[..32].copy_from_slice(&self.s.encode());
        out[32..64].copy_from_slice(&self.mask);
        out[64..].copy_from_slice(&self.epoch.to_le_bytes());
        out
    }

    pub fn decode(group: GroupId, bytes: &[u8]) -> Result<Self, SchemeError> {
        if bytes.len() != SIGNATURE_LEN {
            return Err(SchemeError::Malformed("signature length"));
        }
        let mut s_bytes = [0u8; 32];
        s_bytes.copy_from_slice(&bytes[..32]);
        let s = group.scalar_from_bytes(&s_bytes)?;
        let mut mask = [0u8; 32];
        mask.copy_from_slice(&bytes[32..64]);
        let epoch = u64::from_le_bytes(bytes[64..].try_into().unwrap());
        Ok(Signature { s, mask, epoch })
    }
}
