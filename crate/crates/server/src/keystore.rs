//! The sealed keystore: the stand-in for a hardware enclave boundary.
//!
//! Secrets are provisioned once from a blob file written at the key
//! ceremony. Two at-rest backends share one container format: `Sealed`
//! stores the payload as-is behind file permissions (modeling enclave
//! sealing), `Encrypted` wraps it in XChaCha20-Poly1305 under a key file.
//! A real-enclave backend would slot in behind the same interface.
//!
//! Secret bytes must never leave the keystore: nothing in this module logs,
//! serializes or returns secret material except the sealed write path.

use std::fs;
use std::io::Write;
use std::path::Path;

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{XChaCha20Poly1305, XNonce};
use rand::RngCore;
use zeroize::Zeroize;

use lrsha_core::cert::{fsgn_keygen_from_seed, CertKeypair};
use lrsha_core::flrsha::FlrshaServerSecret;
use lrsha_core::group::GroupId;
use lrsha_core::lrsha::LrshaServerSecret;
use lrsha_core::{Seed, SchemeTag};

pub const MAGIC_SERVER_SECRET: [u8; 4] = *b"LRSB";
pub const MAGIC_SIGNER_KEY: [u8; 4] = *b"LRSK";
pub const MAGIC_PRECOMPUTE: [u8; 4] = *b"LRPS";
pub const MAGIC_CACHE: [u8; 4] = *b"LRCC";

pub const FILE_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum KeystoreError {
    #[error("keystore already provisioned")]
    AlreadyProvisioned,
    #[error("keystore not provisioned")]
    NotProvisioned,
    #[error("malformed secret: {0}")]
    MalformedSecret(String),
    #[error("sealing failure: {0}")]
    Seal(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeystoreBackend {
    /// In-process sealed memory; at-rest payload is plain behind 0600 perms.
    Sealed,
    /// Payload encrypted at rest with XChaCha20-Poly1305.
    Encrypted,
}

impl KeystoreBackend {
    pub fn code(self) -> u8 {
        match self {
            KeystoreBackend::Sealed => 1,
            KeystoreBackend::Encrypted => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, KeystoreError> {
        match code {
            1 => Ok(KeystoreBackend::Sealed),
            2 => Ok(KeystoreBackend::Encrypted),
            _ => Err(KeystoreError::MalformedSecret(format!("unknown backend {code}"))),
        }
    }
}

/// Ten-byte header common to all persisted files:
/// magic(4) || version(1) || backend(1) || scheme(1) || group(1) || aux(2 LE).
/// `aux` carries the server index for per-server files and the server count
/// for signer-side files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FileHeader {
    pub magic: [u8; 4],
    pub backend: KeystoreBackend,
    pub scheme: SchemeTag,
    pub group: GroupId,
    pub aux: u16,
}

impl FileHeader {
    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&self.magic);
        out[4] = FILE_VERSION;
        out[5] = self.backend.code();
        out[6] = self.scheme.code();
        out[7] = self.group.code();
        out[8..].copy_from_slice(&self.aux.to_le_bytes());
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self, KeystoreError> {
        if bytes.len() < HEADER_LEN {
            return Err(KeystoreError::MalformedSecret("file shorter than header".into()));
        }
        if bytes[4] != FILE_VERSION {
            return Err(KeystoreError::MalformedSecret(format!("unknown version {}", bytes[4])));
        }
        let backend = KeystoreBackend::from_code(bytes[5])?;
        let scheme = SchemeTag::from_code(bytes[6])
            .map_err(|e| KeystoreError::MalformedSecret(e.to_string()))?;
        let group = GroupId::from_code(bytes[7])
            .map_err(|e| KeystoreError::MalformedSecret(e.to_string()))?;
        let aux = u16::from_le_bytes(bytes[8..10].try_into().unwrap());
        Ok(FileHeader { magic: bytes[..4].try_into().unwrap(), backend, scheme, group, aux })
    }
}

fn seal_payload(
    backend: KeystoreBackend,
    payload: &[u8],
    key: Option<&[u8; 32]>,
) -> Result<Vec<u8>, KeystoreError> {
    match backend {
        KeystoreBackend::Sealed => Ok(payload.to_vec()),
        KeystoreBackend::Encrypted => {
            let key = key.ok_or_else(|| KeystoreError::Seal("encryption key required".into()))?;
            let cipher = XChaCha20Poly1305::new(key.into());
            let mut nonce = [0u8; 24];
            rand::thread_rng().fill_bytes(&mut nonce);
            let ct = cipher
                .encrypt(&XNonce::from(nonce), payload)
                .map_err(|e| KeystoreError::Seal(e.to_string()))?;
            let mut out = Vec::with_capacity(24 + ct.len());
            out.extend_from_slice(&nonce);
            out.extend_from_slice(&ct);
            Ok(out)
        }
    }
}

fn unseal_payload(
    backend: KeystoreBackend,
    sealed: &[u8],
    key: Option<&[u8; 32]>,
) -> Result<Vec<u8>, KeystoreError> {
    match backend {
        KeystoreBackend::Sealed => Ok(sealed.to_vec()),
        KeystoreBackend::Encrypted => {
            let key = key.ok_or_else(|| KeystoreError::Seal("encryption key required".into()))?;
            if sealed.len() < 24 {
                return Err(KeystoreError::MalformedSecret("sealed payload too short".into()));
            }
            let nonce: [u8; 24] = sealed[..24].try_into().unwrap();
            let cipher = XChaCha20Poly1305::new(key.into());
            cipher
                .decrypt(&XNonce::from(nonce), &sealed[24..])
                .map_err(|_| KeystoreError::Seal("unseal failed (wrong key or corrupt)".into()))
        }
    }
}

/// Write `header || seal(payload)` with owner-only permissions.
pub fn write_sealed_file(
    path: &Path,
    header: FileHeader,
    payload: &[u8],
    key: Option<&[u8; 32]>,
) -> Result<(), KeystoreError> {
    let mut sealed = seal_payload(header.backend, payload, key)?;
    let mut contents = Vec::with_capacity(HEADER_LEN + sealed.len());
    contents.extend_from_slice(&header.encode());
    contents.extend_from_slice(&sealed);
    sealed.zeroize();

    let tmp = path.with_extension("tmp");
    {
        let mut opts = fs::OpenOptions::new();
        opts.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = opts.open(&tmp)?;
        f.write_all(&contents)?;
        f.sync_all()?;
    }
    contents.zeroize();
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Read and unseal a file written by `write_sealed_file`, checking the magic.
pub fn read_sealed_file(
    path: &Path,
    expected_magic: [u8; 4],
    key: Option<&[u8; 32]>,
) -> Result<(FileHeader, Vec<u8>), KeystoreError> {
    let contents = fs::read(path)?;
    let header = FileHeader::decode(&contents)?;
    if header.magic != expected_magic {
        return Err(KeystoreError::MalformedSecret(format!(
            "wrong file magic {:?}",
            &contents[..4]
        )));
    }
    let payload = unseal_payload(header.backend, &contents[HEADER_LEN..], key)?;
    Ok((header, payload))
}

/// Read a 32-byte hex key file for the encrypted backend.
pub fn read_key_file(path: &Path) -> Result<[u8; 32], KeystoreError> {
    let text = fs::read_to_string(path)?;
    let bytes = hex::decode(text.trim())
        .map_err(|e| KeystoreError::MalformedSecret(format!("key file hex: {e}")))?;
    bytes
        .try_into()
        .map_err(|_| KeystoreError::MalformedSecret("key file must hold 32 bytes".into()))
}

/// Write a fresh random key file for the encrypted backend.
pub fn write_key_file(path: &Path) -> Result<[u8; 32], KeystoreError> {
    let mut key = [0u8; 32];
    rand::thread_rng().fill_bytes(&mut key);
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path)?;
    writeln!(f, "{}", hex::encode(key))?;
    Ok(key)
}

/// The material the ceremony provisions to one server.
pub struct ServerSecretBlob {
    pub scheme: SchemeTag,
    pub group: GroupId,
    pub index: u16,
    pub max_epochs: u64,
    pub material: BlobMaterial,
}

pub enum BlobMaterial {
    Lrsha { cert_secret: [u8; 32], seed: Seed },
    Flrsha { cert_seed: Seed, y_seed: Seed, r_seed: Seed },
}

impl ServerSecretBlob {
    pub fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 96);
        out.extend_from_slice(&self.max_epochs.to_le_bytes());
        match &self.material {
            BlobMaterial::Lrsha { cert_secret, seed } => {
                out.extend_from_slice(cert_secret);
                out.extend_from_slice(seed.as_bytes());
            }
            BlobMaterial::Flrsha { cert_seed, y_seed, r_seed } => {
                out.extend_from_slice(cert_seed.as_bytes());
                out.extend_from_slice(y_seed.as_bytes());
                out.extend_from_slice(r_seed.as_bytes());
            }
        }
        out
    }

    pub fn from_parts(header: &FileHeader, payload: &[u8]) -> Result<Self, KeystoreError> {
        let expected = match header.scheme {
            SchemeTag::Lrsha => 8 + 64,
            SchemeTag::Flrsha => 8 + 96,
        };
        if payload.len() != expected {
            return Err(KeystoreError::MalformedSecret(format!(
                "payload length {} does not fit scheme {}",
                payload.len(),
                header.scheme
            )));
        }
        let max_epochs = u64::from_le_bytes(payload[..8].try_into().unwrap());
        if max_epochs < 1 {
            return Err(KeystoreError::MalformedSecret("max_epochs must be positive".into()));
        }
        let material = match header.scheme {
            SchemeTag::Lrsha => BlobMaterial::Lrsha {
                cert_secret: payload[8..40].try_into().unwrap(),
                seed: Seed::from_bytes(payload[40..72].try_into().unwrap()),
            },
            SchemeTag::Flrsha => BlobMaterial::Flrsha {
                cert_seed: Seed::from_bytes(payload[8..40].try_into().unwrap()),
                y_seed: Seed::from_bytes(payload[40..72].try_into().unwrap()),
                r_seed: Seed::from_bytes(payload[72..104].try_into().unwrap()),
            },
        };
        Ok(ServerSecretBlob {
            scheme: header.scheme,
            group: header.group,
            index: header.aux,
            max_epochs,
            material,
        })
    }

    pub fn write(
        &self,
        path: &Path,
        backend: KeystoreBackend,
        key: Option<&[u8; 32]>,
    ) -> Result<(), KeystoreError> {
        let header = FileHeader {
            magic: MAGIC_SERVER_SECRET,
            backend,
            scheme: self.scheme,
            group: self.group,
            aux: self.index,
        };
        let mut payload = self.payload_bytes();
        let res = write_sealed_file(path, header, &payload, key);
        payload.zeroize();
        res
    }

    pub fn read(path: &Path, key: Option<&[u8; 32]>) -> Result<Self, KeystoreError> {
        let (header, mut payload) = read_sealed_file(path, MAGIC_SERVER_SECRET, key)?;
        let blob = Self::from_parts(&header, &payload);
        payload.zeroize();
        blob
    }
}

/// The provisioned secret, expanded into its operational form.
pub enum ProvisionedSecret {
    Lrsha(LrshaServerSecret),
    Flrsha(Box<FlrshaServerSecret>),
}

/// One-shot vault for a single server secret. Re-provision requires an
/// explicit `reset`.
pub struct SealedKeystore {
    secret: Option<ProvisionedSecret>,
}

impl SealedKeystore {
    pub fn new() -> Self {
        SealedKeystore { secret: None }
    }

    pub fn is_provisioned(&self) -> bool {
        self.secret.is_some()
    }

    /// Expand and seal a blob. `expected` pins the scheme and index the
    /// server was configured for; any mismatch is a malformed secret.
    pub fn provision(
        &mut self,
        blob: ServerSecretBlob,
        expected_scheme: SchemeTag,
        expected_index: u16,
    ) -> Result<(), KeystoreError> {
        if self.secret.is_some() {
            return Err(KeystoreError::AlreadyProvisioned);
        }
        if blob.scheme != expected_scheme {
            return Err(KeystoreError::MalformedSecret(format!(
                "blob is {} but server is configured for {expected_scheme}",
                blob.scheme
            )));
        }
        if blob.index != expected_index {
            return Err(KeystoreError::MalformedSecret(format!(
                "blob is for server {} but this is server {expected_index}",
                blob.index
            )));
        }
        let secret = match blob.material {
            BlobMaterial::Lrsha { cert_secret, seed } => {
                let cert = CertKeypair::from_secret_bytes(blob.group, &cert_secret)
                    .map_err(|e| KeystoreError::MalformedSecret(e.to_string()))?;
                ProvisionedSecret::Lrsha(LrshaServerSecret {
                    index: blob.index,
                    cert,
                    seed,
                    max_epochs: blob.max_epochs,
                })
            }
            BlobMaterial::Flrsha { cert_seed, y_seed, r_seed } => {
                let (fs_state, _root) =
                    fsgn_keygen_from_seed(blob.group, blob.max_epochs, cert_seed);
                ProvisionedSecret::Flrsha(Box::new(FlrshaServerSecret::new(
                    blob.index,
                    fs_state,
                    y_seed,
                    r_seed,
                    blob.max_epochs,
                )))
            }
        };
        self.secret = Some(secret);
        Ok(())
    }

    pub fn secret(&self) -> Result<&ProvisionedSecret, KeystoreError> {
        self.secret.as_ref().ok_or(KeystoreError::NotProvisioned)
    }

    pub fn secret_mut(&mut self) -> Result<&mut ProvisionedSecret, KeystoreError> {
        self.secret.as_mut().ok_or(KeystoreError::NotProvisioned)
    }

    /// Drop the sealed secret, allowing a fresh provision.
    pub fn reset(&mut self) {
        self.secret = None;
    }
}

impl Default for SealedKeystore {
    fn default() -> Self {
        Self::new()
    }
}
