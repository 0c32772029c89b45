//! The deployment descriptor: everything a verifier needs to know about a
//! deployment, produced at the key ceremony. Versioned canonical JSON; the
//! serializer output is byte-stable so descriptors can be compared and
//! golden-tested. A PKI would replace this file in production.

use serde::{Deserialize, Serialize};

use crate::group::{GroupElement, GroupError, GroupId};
use crate::merkle::Digest32;
use crate::params::{SchemeParams, SchemeTag};

pub const DESCRIPTOR_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DescriptorError {
    #[error("descriptor parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported descriptor version {0}")]
    Version(u32),
    #[error("descriptor field mismatch: {0}")]
    Inconsistent(&'static str),
    #[error("bad hex in descriptor: {0}")]
    Hex(#[from] hex::FromHexError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerEntry {
    pub index: u16,
    pub endpoint: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentDescriptor {
    pub v: u32,
    pub scheme: SchemeTag,
    pub group: GroupId,
    pub max_epochs: u64,
    pub servers: Vec<ServerEntry>,
    /// Signer public key Y (hex), `lrsha` only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub signer_key: Option<String>,
    /// Per-server certification public keys (hex), `lrsha` only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cert_keys: Option<Vec<String>>,
    /// Per-server forward-secure certification roots (hex), `flrsha` only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fs_roots: Option<Vec<String>>,
}

impl DeploymentDescriptor {
    /// Canonical serialization: pretty JSON with fixed field order and a
    /// trailing newline. `parse` inverts it byte-exactly.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("descriptor serializes");
        s.push('\n');
        s
    }

    pub fn parse(json: &str) -> Result<Self, DescriptorError> {
        let d: DeploymentDescriptor = serde_json::from_str(json)?;
        if d.v != DESCRIPTOR_VERSION {
            return Err(DescriptorError::Version(d.v));
        }
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        let servers = self.servers.len();
        if servers == 0 || servers > u16::MAX as usize {
            return Err(DescriptorError::Inconsistent("server list empty"));
        }
        for (i, entry) in self.servers.iter().enumerate() {
            if entry.index as usize != i + 1 {
                return Err(DescriptorError::Inconsistent("server indices must be 1..=L in order"));
            }
            if entry.endpoint.is_empty() {
                return Err(DescriptorError::Inconsistent("empty endpoint"));
            }
        }
        if self.max_epochs < 1 {
            return Err(DescriptorError::Inconsistent("max_epochs must be at least 1"));
        }
        match self.scheme {
            SchemeTag::Lrsha => {
                if self.signer_key.is_none() {
                    return Err(DescriptorError::Inconsistent("lrsha descriptor needs signer_key"));
                }
                match &self.cert_keys {
                    Some(keys) if keys.len() == servers => {}
                    _ => return Err(DescriptorError::Inconsistent("cert_keys length")),
                }
                if self.fs_roots.is_some() {
                    return Err(DescriptorError::Inconsistent("fs_roots on lrsha descriptor"));
                }
            }
            SchemeTag::Flrsha => {
                match &self.fs_roots {
                    Some(roots) if roots.len() == servers => {}
                    _ => return Err(DescriptorError::Inconsistent("fs_roots length")),
                }
                if self.signer_key.is_some() || self.cert_keys.is_some() {
                    return Err(DescriptorError::Inconsistent("lrsha keys on flrsha descriptor"));
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> SchemeParams {
        SchemeParams {
            scheme: self.scheme,
            group: self.group,
            max_epochs: self.max_epochs,
            servers: self.servers.len() as u16,
        }
    }

    pub fn signer_element(&self) -> Result<GroupElement, DescriptorError> {
        let hex_key =
            self.signer_key.as_ref().ok_or(DescriptorError::Inconsistent("signer_key missing"))?;
        Ok(self.group.element_from_bytes(&decode_hex32(hex_key)?)?)
    }

    pub fn cert_elements(&self) -> Result<Vec<GroupElement>, DescriptorError> {
        let keys =
            self.cert_keys.as_ref().ok_or(DescriptorError::Inconsistent("cert_keys missing"))?;
        keys.iter()
            .map(|k| Ok(self.group.element_from_bytes(&decode_hex32(k)?)?))
            .collect()
    }

    pub fn root_digests(&self) -> Result<Vec<Digest32>, DescriptorError> {
        let roots =
            self.fs_roots.as_ref().ok_or(DescriptorError::Inconsistent("fs_roots missing"))?;
        roots.iter().map(|r| decode_hex32(r)).collect()
    }
}

fn decode_hex32(s: &str) -> Result<[u8; 32], DescriptorError> {
    let bytes = hex::decode(s)?;
    bytes
        .try_into()
        .map_err(|_| DescriptorError::Inconsistent("hex field must encode 32 bytes"))
}
