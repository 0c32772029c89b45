//! Shared scheme parameters.

use serde::{Deserialize, Serialize};

use crate::group::{GroupElement, GroupId};

/// Default signing capability.
pub const DEFAULT_MAX_EPOCHS: u64 = 1 << 20;

#[derive(Debug, thiserror::Error, Clone, Copy, PartialEq, Eq)]
pub enum ParamsError {
    #[error("max epochs must be at least 1")]
    InvalidEpochBound,
    #[error("server count must be at least 1")]
    InvalidServerCount,
    #[error("unknown scheme tag")]
    UnknownScheme,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeTag {
    Lrsha,
    Flrsha,
}

impl SchemeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Lrsha => "lrsha",
            SchemeTag::Flrsha => "flrsha",
        }
    }

    pub fn from_str(s: &str) -> Result<Self, ParamsError> {
        match s {
            "lrsha" => Ok(SchemeTag::Lrsha),
            "flrsha" => Ok(SchemeTag::Flrsha),
            _ => Err(ParamsError::UnknownScheme),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            SchemeTag::Lrsha => 1,
            SchemeTag::Flrsha => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, ParamsError> {
        match code {
            1 => Ok(SchemeTag::Lrsha),
            2 => Ok(SchemeTag::Flrsha),
            _ => Err(ParamsError::UnknownScheme),
        }
    }
}

impl std::fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The public parameter block shared by signer, servers and verifiers:
/// which scheme, which group, the signing capability J and the server
/// count L. Generator and order are fixed by the group id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub scheme: SchemeTag,
    pub group: GroupId,
    pub max_epochs: u64,
    pub servers: u16,
}

impl SchemeParams {
    pub fn new(
        scheme: SchemeTag,
        group: GroupId,
        max_epochs: u64,
        servers: u16,
    ) -> Result<Self, ParamsError> {
        if max_epochs < 1 {
            return Err(ParamsError::InvalidEpochBound);
        }
        if servers < 1 {
            return Err(ParamsError::InvalidServerCount);
        }
        Ok(SchemeParams { scheme, group, max_epochs, servers })
    }

    pub fn generator(&self) -> GroupElement {
        self.group.generator()
    }
}
