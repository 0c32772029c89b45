//! The key ceremony: generate all key material for a deployment and write
//! the signer key file, one sealed blob per server, and the deployment
//! descriptor.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use lrsha_core::descriptor::{DeploymentDescriptor, ServerEntry};
use lrsha_core::group::GroupId;
use lrsha_core::{flrsha, lrsha, SchemeParams, SchemeTag};
use lrsha_server::{
    write_key_file, BlobMaterial, KeystoreBackend, ServerSecretBlob,
};

use crate::keyfiles::{store_signer_key, SignerKey};

pub struct CeremonyArgs {
    pub scheme: SchemeTag,
    pub group: GroupId,
    pub servers: u16,
    pub max_epochs: u64,
    pub out_dir: PathBuf,
    /// One endpoint per server; defaults to http://127.0.0.1:{9100+l}.
    pub endpoints: Option<Vec<String>>,
    /// Deterministic key generation for reproducible demos.
    pub seed: Option<u64>,
    /// Encrypt keystore blobs and the signer key at rest.
    pub encrypt: bool,
}

pub struct CeremonyOutput {
    pub descriptor_path: PathBuf,
    pub signer_key_path: PathBuf,
    pub server_blob_paths: Vec<PathBuf>,
    pub descriptor: DeploymentDescriptor,
}

pub fn run(args: &CeremonyArgs) -> Result<CeremonyOutput> {
    let params = SchemeParams::new(args.scheme, args.group, args.max_epochs, args.servers)
        .map_err(|e| anyhow::anyhow!("bad parameters: {e}"))?;

    if args.out_dir.exists() {
        if !args.out_dir.is_dir() {
            bail!("{} is not a directory", args.out_dir.display());
        }
        if fs::read_dir(&args.out_dir)?.next().is_some() {
            bail!("output directory {} is not empty", args.out_dir.display());
        }
    } else {
        fs::create_dir_all(&args.out_dir)
            .with_context(|| format!("creating {}", args.out_dir.display()))?;
    }

    let endpoints = match &args.endpoints {
        Some(list) => {
            if list.len() != args.servers as usize {
                bail!("{} endpoints provided for {} servers", list.len(), args.servers);
            }
            list.clone()
        }
        None => (1..=args.servers).map(|l| format!("http://127.0.0.1:{}", 9100 + l)).collect(),
    };

    // seeded runs make demo transcripts and golden files reproducible
    let mut rng = match args.seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed),
        None => ChaCha20Rng::from_entropy(),
    };

    let backend = if args.encrypt { KeystoreBackend::Encrypted } else { KeystoreBackend::Sealed };
    let seal_key = if args.encrypt {
        let key_path = args.out_dir.join("keystore.key");
        Some(write_key_file(&key_path).context("writing keystore key file")?)
    } else {
        None
    };

    let (signer_key, descriptor, blobs) = match args.scheme {
        SchemeTag::Lrsha => {
            let (signer, public, secrets) = lrsha::keygen(&params, &mut rng);
            let blobs: Vec<ServerSecretBlob> = secrets
                .iter()
                .map(|s| ServerSecretBlob {
                    scheme: SchemeTag::Lrsha,
                    group: params.group,
                    index: s.index,
                    max_epochs: params.max_epochs,
                    material: BlobMaterial::Lrsha {
                        cert_secret: s.cert.secret_bytes(),
                        seed: s.seed.clone(),
                    },
                })
                .collect();
            let descriptor = DeploymentDescriptor {
                v: 1,
                scheme: SchemeTag::Lrsha,
                group: params.group,
                max_epochs: params.max_epochs,
                servers: entries(&endpoints),
                signer_key: Some(hex::encode(public.y_public.encode())),
                cert_keys: Some(
                    public.cert_keys.iter().map(|k| hex::encode(k.encode())).collect(),
                ),
                fs_roots: None,
            };
            (SignerKey::Lrsha(signer), descriptor, blobs)
        }
        SchemeTag::Flrsha => {
            let (signer, vk, secrets) = flrsha::keygen(&params, &mut rng);
            let blobs: Vec<ServerSecretBlob> = secrets
                .iter()
                .map(|s| ServerSecretBlob {
                    scheme: SchemeTag::Flrsha,
                    group: params.group,
                    index: s.index,
                    max_epochs: params.max_epochs,
                    material: BlobMaterial::Flrsha {
                        cert_seed: s.fs_state.chain_seed().clone(),
                        y_seed: s.y_seed.clone(),
                        r_seed: s.r_seed.clone(),
                    },
                })
                .collect();
            let descriptor = DeploymentDescriptor {
                v: 1,
                scheme: SchemeTag::Flrsha,
                group: params.group,
                max_epochs: params.max_epochs,
                servers: entries(&endpoints),
                signer_key: None,
                cert_keys: None,
                fs_roots: Some(vk.roots.iter().map(hex::encode).collect()),
            };
            (SignerKey::Flrsha(signer), descriptor, blobs)
        }
    };
    descriptor.validate().context("generated descriptor failed validation")?;

    let signer_key_path = args.out_dir.join("signer.key");
    store_signer_key(&signer_key_path, &signer_key, backend, seal_key.as_ref())?;

    let mut server_blob_paths = Vec::with_capacity(blobs.len());
    for blob in &blobs {
        let path = args.out_dir.join(format!("server-{}.keystore", blob.index));
        blob.write(&path, backend, seal_key.as_ref())
            .with_context(|| format!("writing {}", path.display()))?;
        server_blob_paths.push(path);
    }

    let descriptor_path = args.out_dir.join("descriptor.json");
    fs::write(&descriptor_path, descriptor.to_canonical_json())
        .with_context(|| format!("writing {}", descriptor_path.display()))?;

    Ok(CeremonyOutput { descriptor_path, signer_key_path, server_blob_paths, descriptor })
}

fn entries(endpoints: &[String]) -> Vec<ServerEntry> {
    endpoints
        .iter()
        .enumerate()
        .map(|(i, endpoint)| ServerEntry { index: i as u16 + 1, endpoint: endpoint.clone() })
        .collect()
}
