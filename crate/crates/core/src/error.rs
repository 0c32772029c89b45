//! Error type shared by the two signature schemes.

use crate::cert::CertError;
use crate::group::GroupError;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    /// The signing state has consumed all of its epochs.
    #[error("signing state exhausted after {max_epochs} epochs")]
    StateExhausted { max_epochs: u64 },

    /// Requested epoch is outside [1, J].
    #[error("epoch {epoch} outside [1, {max_epochs}]")]
    EpochOutOfRange { epoch: u64, max_epochs: u64 },

    /// A forward-secure state has already moved past the requested epoch.
    #[error("epoch {requested} expired; state already at {current}")]
    EpochExpired { requested: u64, current: u64 },

    /// Bundles from different epochs were mixed into one aggregate.
    #[error("bundle epoch mismatch: expected {expected}, found {found}")]
    EpochMismatch { expected: u64, found: u64 },

    /// No (or more than one) bundle for this server index.
    #[error("missing bundle for server {server}")]
    MissingServer { server: u16 },

    /// This server's commitment failed certificate verification.
    #[error("certificate check failed for server {server}")]
    CertFailure { server: u16 },

    /// The Schnorr verification equation does not hold.
    #[error("signature equation check failed")]
    BadSignatureEq,

    /// Malformed byte encoding.
    #[error("malformed encoding: {0}")]
    Malformed(&'static str),

    #[error(transparent)]
    Group(#[from] GroupError),
}

impl From<CertError> for SchemeError {
    fn from(e: CertError) -> Self {
        match e {
            CertError::EpochExpired { requested, current } => {
                SchemeError::EpochExpired { requested, current }
            }
            CertError::EpochOutOfRange { epoch, max_epochs } => {
                SchemeError::EpochOutOfRange { epoch, max_epochs }
            }
            _ => SchemeError::Malformed("certificate"),
        }
    }
}
