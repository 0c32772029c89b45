//! Signer-side commands: sign with crash-safe state persistence, and the
//! offline precompute path.
//!
//! Epoch reuse is the one unforgivable failure mode in a Schnorr-shaped
//! scheme (two signatures at the same epoch over different messages leak the
//! key), so the advanced state is always persisted before a signature is
//! released: a crash in between loses a signature, never reuses an epoch.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use lrsha_core::{flrsha, lrsha, SchemeError, SchemeTag, Signature};
use lrsha_server::KeystoreBackend;

use crate::keyfiles::{load_signer_key, store_signer_key, PrecomputeStore, SignerKey, StoreEntry};

pub struct SignArgs {
    pub key_path: PathBuf,
    pub message: Vec<u8>,
    pub signature_out: Option<PathBuf>,
    pub store_path: Option<PathBuf>,
}

#[derive(Debug)]
pub struct SignOutput {
    pub signature: Signature,
    pub epoch: u64,
    pub used_store: bool,
}

/// Sign one message: load key, derive (from the store when possible),
/// persist the advanced key, and only then release the signature bytes.
pub fn sign_once(args: &SignArgs) -> Result<SignOutput> {
    let mut key = load_signer_key(&args.key_path, None)?;

    let mut store = match &args.store_path {
        Some(path) if path.exists() => Some((PrecomputeStore::load(path)?, path.clone())),
        _ => None,
    };
    let entry = match &mut store {
        Some((store, _)) => {
            if store.scheme != key.scheme() {
                bail!("precompute store is for {}, key is {}", store.scheme, key.scheme());
            }
            store.take(key.epoch())
        }
        None => None,
    };
    let used_store = entry.is_some();

    let signature = produce_signature(&mut key, &args.message, entry)?;

    // write-ahead: state first, signature after
    store_signer_key(&args.key_path, &key, KeystoreBackend::Sealed, None)?;
    if let Some((store, path)) = &store {
        store.save(path)?;
    }
    if let Some(out) = &args.signature_out {
        std::fs::write(out, signature.encode())
            .with_context(|| format!("writing signature {}", out.display()))?;
    }

    Ok(SignOutput { epoch: signature.epoch, signature, used_store })
}

fn produce_signature(
    key: &mut SignerKey,
    message: &[u8],
    entry: Option<StoreEntry>,
) -> Result<Signature> {
    let group = key.group();
    let result = match (key, entry) {
        (SignerKey::Lrsha(k), Some(e)) => {
            let r_sum = group
                .scalar_from_bytes(&e.r_sum)
                .map_err(|_| anyhow::anyhow!("corrupt store entry"))?;
            lrsha::sign_with_materials(k, message, r_sum, e.mask)
        }
        (SignerKey::Lrsha(k), None) => lrsha::sign(k, message),
        (SignerKey::Flrsha(k), Some(e)) => {
            let y_sum = group
                .scalar_from_bytes(&e.y_sum.context("store entry missing epoch key")?)
                .map_err(|_| anyhow::anyhow!("corrupt store entry"))?;
            let r_sum = group
                .scalar_from_bytes(&e.r_sum)
                .map_err(|_| anyhow::anyhow!("corrupt store entry"))?;
            flrsha::sign_with_materials(k, message, y_sum, r_sum, e.mask)
        }
        (SignerKey::Flrsha(k), None) => flrsha::sign(k, message),
    };
    result.map_err(|e| match e {
        SchemeError::StateExhausted { max_epochs } => {
            anyhow::anyhow!("signing state exhausted after {max_epochs} epochs")
        }
        other => anyhow::anyhow!("signing failed: {other}"),
    })
}

/// Derive the next `count` epochs of signing material from a snapshot of the
/// key. The live key file is not advanced: a stolen store weakens forward
/// security for the covered window, but signing order stays intact.
pub fn precompute(key_path: &Path, count: u64, out: &Path) -> Result<PrecomputeStore> {
    let key = load_signer_key(key_path, None)?;
    if count > key.remaining() {
        bail!(
            "count {count} exceeds remaining epochs {} (state at {}, max {})",
            key.remaining(),
            key.epoch(),
            key.max_epochs()
        );
    }

    let mut entries = Vec::with_capacity(count as usize);
    match key {
        SignerKey::Lrsha(key) => {
            for epoch in key.epoch()..key.epoch() + count {
                let (r_sum, mask) = lrsha::epoch_materials(&key, epoch)
                    .map_err(|e| anyhow::anyhow!("deriving epoch {epoch}: {e}"))?;
                entries.push(StoreEntry { epoch, y_sum: None, r_sum: r_sum.encode(), mask });
            }
            let store = PrecomputeStore {
                scheme: SchemeTag::Lrsha,
                group: key.group(),
                entries,
            };
            store.save(out)?;
            Ok(store)
        }
        SignerKey::Flrsha(mut key) => {
            // walk a snapshot of the chains; the on-disk key stays put
            for _ in 0..count {
                let epoch = key.epoch();
                let (y_sum, r_sum, mask) = flrsha::epoch_materials(&key)
                    .map_err(|e| anyhow::anyhow!("deriving epoch {epoch}: {e}"))?;
                entries.push(StoreEntry {
                    epoch,
                    y_sum: Some(y_sum.encode()),
                    r_sum: r_sum.encode(),
                    mask,
                });
                if key.epoch() < key.max_epochs() {
                    flrsha::update(&mut key)
                        .map_err(|e| anyhow::anyhow!("advancing snapshot: {e}"))?;
                } else {
                    break;
                }
            }
            let store = PrecomputeStore {
                scheme: SchemeTag::Flrsha,
                group: key.group(),
                entries,
            };
            store.save(out)?;
            Ok(store)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ceremony::{self, CeremonyArgs};
    use lrsha_core::group::GroupId;

    fn setup(scheme: SchemeTag, max_epochs: u64) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let out = ceremony::run(&CeremonyArgs {
            scheme,
            group: GroupId::Ristretto255,
            servers: 3,
            max_epochs,
            out_dir: dir.path().join("deploy"),
            endpoints: None,
            seed: Some(42),
            encrypt: false,
        })
        .unwrap();
        (dir, out.signer_key_path)
    }

    #[test]
    fn signing_advances_persisted_state() {
        let (_dir, key_path) = setup(SchemeTag::Lrsha, 8);
        for expected_epoch in 1..=3u64 {
            let out = sign_once(&SignArgs {
                key_path: key_path.clone(),
                message: b"advance".to_vec(),
                signature_out: None,
                store_path: None,
            })
            .unwrap();
            assert_eq!(out.epoch, expected_epoch);
        }
        let key = load_signer_key(&key_path, None).unwrap();
        assert_eq!(key.epoch(), 4);
    }

    #[test]
    fn exhausted_key_refuses_to_sign() {
        let (_dir, key_path) = setup(SchemeTag::Flrsha, 2);
        let args = SignArgs {
            key_path: key_path.clone(),
            message: b"m".to_vec(),
            signature_out: None,
            store_path: None,
        };
        sign_once(&args).unwrap();
        sign_once(&args).unwrap();
        let err = sign_once(&args).unwrap_err();
        assert!(err.to_string().contains("exhausted"));
    }

    #[test]
    fn precomputed_and_online_signatures_are_byte_identical() {
        for scheme in [SchemeTag::Lrsha, SchemeTag::Flrsha] {
            // two identical deployments from the same ceremony seed
            let (_d1, key_a) = setup(scheme, 128);
            let (d2, key_b) = setup(scheme, 128);

            let store_path = d2.path().join("store");
            let store = precompute(&key_b, 100, &store_path).unwrap();
            assert_eq!(store.entries.len(), 100);

            for i in 0..100u64 {
                let msg = format!("{scheme} byte equivalence {i}").into_bytes();
                let online = sign_once(&SignArgs {
                    key_path: key_a.clone(),
                    message: msg.clone(),
                    signature_out: None,
                    store_path: None,
                })
                .unwrap();
                let offline = sign_once(&SignArgs {
                    key_path: key_b.clone(),
                    message: msg,
                    signature_out: None,
                    store_path: Some(store_path.clone()),
                })
                .unwrap();
                assert!(offline.used_store, "entry {i} should come from the store");
                assert_eq!(
                    online.signature.encode(),
                    offline.signature.encode(),
                    "{scheme} epoch {i}"
                );
            }

            // store exhausted: falls back to online derivation and still works
            let fallback = sign_once(&SignArgs {
                key_path: key_b.clone(),
                message: b"past the store".to_vec(),
                signature_out: None,
                store_path: Some(store_path.clone()),
            })
            .unwrap();
            assert!(!fallback.used_store);
        }
    }

    #[test]
    fn precompute_count_is_bounded_by_remaining_epochs() {
        let (dir, key_path) = setup(SchemeTag::Lrsha, 8);
        let err = precompute(&key_path, 9, &dir.path().join("store")).unwrap_err();
        assert!(err.to_string().contains("exceeds remaining"));
    }

    #[test]
    fn crash_between_persist_and_emit_never_reuses_an_epoch() {
        let (_dir, key_path) = setup(SchemeTag::Lrsha, 8);

        // simulate the crash window: state persisted, signature lost. That is
        // exactly what sign_once does before writing the signature, so signing
        // again must move on to the next epoch.
        let first = sign_once(&SignArgs {
            key_path: key_path.clone(),
            message: b"first".to_vec(),
            signature_out: None,
            store_path: None,
        })
        .unwrap();
        let second = sign_once(&SignArgs {
            key_path: key_path.clone(),
            message: b"second, after crash".to_vec(),
            signature_out: None,
            store_path: None,
        })
        .unwrap();
        assert_eq!(first.epoch, 1);
        assert_eq!(second.epoch, 2);
    }
}
