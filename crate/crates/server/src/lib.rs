//! The commitment-construction (ComC) server.
//!
//! A long-running service holding one server's sealed secret share. It
//! derives, certifies and serves commitment bundles over the JSON wire
//! protocol, either on demand or from a precomputed cache, and never lets
//! secret bytes cross the keystore boundary.

pub mod cache;
pub mod http;
pub mod keystore;
pub mod service;

pub use cache::CommitmentCache;
pub use keystore::{
    read_key_file, read_sealed_file, write_key_file, write_sealed_file, BlobMaterial, FileHeader,
    KeystoreBackend, KeystoreError, SealedKeystore, ServerSecretBlob, MAGIC_CACHE,
    MAGIC_PRECOMPUTE, MAGIC_SERVER_SECRET, MAGIC_SIGNER_KEY,
};
pub use service::{CommitmentService, ServeError, ServerConfig};
