//! Signer-side file formats: the signer key file and the precompute store.
//! Both ride the sealed-container format of the keystore module; writes are
//! atomic (write-new-then-rename), which is what makes crash-safe signing
//! possible.

use std::path::Path;

use anyhow::{bail, Context, Result};

use lrsha_core::group::GroupId;
use lrsha_core::{flrsha, lrsha, SchemeTag};
use lrsha_server::{
    read_sealed_file, write_sealed_file, FileHeader, KeystoreBackend, MAGIC_PRECOMPUTE,
    MAGIC_SIGNER_KEY,
};

/// A loaded signer key of either scheme.
pub enum SignerKey {
    Lrsha(lrsha::LrshaSignerKey),
    Flrsha(flrsha::FlrshaSignerKey),
}

impl SignerKey {
    pub fn scheme(&self) -> SchemeTag {
        match self {
            SignerKey::Lrsha(_) => SchemeTag::Lrsha,
            SignerKey::Flrsha(_) => SchemeTag::Flrsha,
        }
    }

    pub fn group(&self) -> GroupId {
        match self {
            SignerKey::Lrsha(k) => k.group(),
            SignerKey::Flrsha(k) => k.group(),
        }
    }

    pub fn epoch(&self) -> u64 {
        match self {
            SignerKey::Lrsha(k) => k.epoch(),
            SignerKey::Flrsha(k) => k.epoch(),
        }
    }

    pub fn max_epochs(&self) -> u64 {
        match self {
            SignerKey::Lrsha(k) => k.max_epochs(),
            SignerKey::Flrsha(k) => k.max_epochs(),
        }
    }

    pub fn remaining(&self) -> u64 {
        match self {
            SignerKey::Lrsha(k) => k.remaining(),
            SignerKey::Flrsha(k) => k.remaining(),
        }
    }

    pub fn servers(&self) -> u16 {
        match self {
            SignerKey::Lrsha(k) => k.servers(),
            SignerKey::Flrsha(k) => k.servers(),
        }
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        match self {
            SignerKey::Lrsha(k) => k.payload_bytes(),
            SignerKey::Flrsha(k) => k.payload_bytes(),
        }
    }
}

/// Persist a signer key, atomically replacing any previous file.
pub fn store_signer_key(
    path: &Path,
    key: &SignerKey,
    backend: KeystoreBackend,
    seal_key: Option<&[u8; 32]>,
) -> Result<()> {
    let header = FileHeader {
        magic: MAGIC_SIGNER_KEY,
        backend,
        scheme: key.scheme(),
        group: key.group(),
        aux: key.servers(),
    };
    write_sealed_file(path, header, &key.payload_bytes(), seal_key)
        .with_context(|| format!("writing signer key {}", path.display()))?;
    Ok(())
}

pub fn load_signer_key(path: &Path, seal_key: Option<&[u8; 32]>) -> Result<SignerKey> {
    let (header, payload) = read_sealed_file(path, MAGIC_SIGNER_KEY, seal_key)
        .with_context(|| format!("reading signer key {}", path.display()))?;
    let key = match header.scheme {
        SchemeTag::Lrsha => SignerKey::Lrsha(
            lrsha::LrshaSignerKey::from_payload(header.group, &payload)
                .context("corrupt signer key payload")?,
        ),
        SchemeTag::Flrsha => SignerKey::Flrsha(
            flrsha::FlrshaSignerKey::from_payload(header.group, &payload)
                .context("corrupt signer key payload")?,
        ),
    };
    if key.servers() != header.aux {
        bail!("corrupt signer key: header says {} servers, payload {}", header.aux, key.servers());
    }
    Ok(key)
}

/// One precomputed signing epoch: the aggregated scalars and the one-time
/// mask, i.e. everything the online path needs beyond the long-lived key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StoreEntry {
    pub epoch: u64,
    /// Aggregated epoch key scalar (flrsha only).
    pub y_sum: Option<[u8; 32]>,
    /// Aggregated nonce scalar.
    pub r_sum: [u8; 32],
    /// One-time mask x.
    pub mask: [u8; 32],
}

/// Precomputed signer material for a contiguous run of future epochs.
/// Consuming an epoch removes its entry; entries only exist for epochs at or
/// beyond the live key's state.
#[derive(Debug)]
pub struct PrecomputeStore {
    pub scheme: SchemeTag,
    pub group: GroupId,
    pub entries: Vec<StoreEntry>,
}

impl PrecomputeStore {
    fn entry_len(scheme: SchemeTag) -> usize {
        match scheme {
            SchemeTag::Lrsha => 8 + 64,
            SchemeTag::Flrsha => 8 + 96,
        }
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.entries.len() * Self::entry_len(self.scheme));
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for entry in &self.entries {
            out.extend_from_slice(&entry.epoch.to_le_bytes());
            if let Some(y) = &entry.y_sum {
                out.extend_from_slice(y);
            }
            out.extend_from_slice(&entry.r_sum);
            out.extend_from_slice(&entry.mask);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = FileHeader {
            magic: MAGIC_PRECOMPUTE,
            backend: KeystoreBackend::Sealed,
            scheme: self.scheme,
            group: self.group,
            aux: 0,
        };
        write_sealed_file(path, header, &self.payload_bytes(), None)
            .with_context(|| format!("writing precompute store {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, payload) = read_sealed_file(path, MAGIC_PRECOMPUTE, None)
            .with_context(|| format!("reading precompute store {}", path.display()))?;
        if payload.len() < 8 {
            bail!("corrupt precompute store");
        }
        let count = u64::from_le_bytes(payload[..8].try_into().unwrap()) as usize;
        let entry_len = Self::entry_len(header.scheme);
        if payload.len() != 8 + count * entry_len {
            bail!("corrupt precompute store: bad entry count");
        }
        let mut entries = Vec::with_capacity(count);
        for chunk in payload[8..].chunks_exact(entry_len) {
            let epoch = u64::from_le_bytes(chunk[..8].try_into().unwrap());
            let (y_sum, rest) = match header.scheme {
                SchemeTag::Lrsha => (None, &chunk[8..]),
                SchemeTag::Flrsha => {
                    (Some(chunk[8..40].try_into().unwrap()), &chunk[40..])
                }
            };
            entries.push(StoreEntry {
                epoch,
                y_sum,
                r_sum: rest[..32].try_into().unwrap(),
                mask: rest[32..64].try_into().unwrap(),
            });
        }
        Ok(PrecomputeStore { scheme: header.scheme, group: header.group, entries })
    }

    /// Remove and return the entry for `epoch`, dropping anything older.
    pub fn take(&mut self, epoch: u64) -> Option<StoreEntry> {
        let found = self.entries.iter().position(|e| e.epoch == epoch).map(|i| self.entries.remove(i));
        self.entries.retain(|e| e.epoch > epoch);
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_round_trips_and_consumes_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store");
        let store = PrecomputeStore {
            scheme: SchemeTag::Flrsha,
            group: GroupId::Toy23,
            entries: (3..=6)
                .map(|epoch| StoreEntry {
                    epoch,
                    y_sum: Some([epoch as u8; 32]),
                    r_sum: [epoch as u8 + 100; 32],
                    mask: [epoch as u8 + 200; 32],
                })
                .collect(),
        };
        store.save(&path).unwrap();

        let mut loaded = PrecomputeStore::load(&path).unwrap();
        assert_eq!(loaded.entries, store.entries);

        let taken = loaded.take(4).unwrap();
        assert_eq!(taken.epoch, 4);
        // everything at or below the consumed epoch is gone
        assert!(loaded.entries.iter().all(|e| e.epoch > 4));
        assert!(loaded.take(4).is_none());
    }
}
