//! Request handling behind the wire protocol, independent of transport.

use std::path::Path;
use std::sync::RwLock;

use lrsha_core::wire::{StatusBody, WireOp, WireRequest, WireResponse, WIRE_VERSION};
use lrsha_core::{flrsha, lrsha, SchemeError, SchemeTag};

use crate::cache::{CacheError, CommitmentCache};
use crate::keystore::{KeystoreError, ProvisionedSecret, SealedKeystore, ServerSecretBlob};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("server not provisioned")]
    NotProvisioned,
    #[error("epoch {epoch} outside [1, {max_epochs}]")]
    EpochOutOfRange { epoch: u64, max_epochs: u64 },
    #[error("range of {requested} exceeds max batch {max_batch}")]
    RangeTooLarge { requested: u64, max_batch: u64 },
    #[error("epoch {requested} expired; live state already at {current}")]
    EpochExpired { requested: u64, current: u64 },
    #[error("budget exceeded: {needed} bytes needed, {budget} allowed")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl ServeError {
    /// Stable machine-readable code for the wire error body.
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::NotProvisioned => "NotProvisioned",
            ServeError::EpochOutOfRange { .. } => "EpochOutOfRange",
            ServeError::RangeTooLarge { .. } => "RangeTooLarge",
            ServeError::EpochExpired { .. } => "EpochExpired",
            ServeError::BudgetExceeded { .. } => "BudgetExceeded",
            ServeError::BadRequest(_) => "BadRequest",
            ServeError::Internal(_) => "Internal",
        }
    }
}

impl From<SchemeError> for ServeError {
    fn from(e: SchemeError) -> Self {
        match e {
            SchemeError::EpochOutOfRange { epoch, max_epochs } => {
                ServeError::EpochOutOfRange { epoch, max_epochs }
            }
            SchemeError::EpochExpired { requested, current } => {
                ServeError::EpochExpired { requested, current }
            }
            other => ServeError::Internal(other.to_string()),
        }
    }
}

impl From<KeystoreError> for ServeError {
    fn from(e: KeystoreError) -> Self {
        match e {
            KeystoreError::NotProvisioned => ServeError::NotProvisioned,
            other => ServeError::Internal(other.to_string()),
        }
    }
}

impl From<CacheError> for ServeError {
    fn from(e: CacheError) -> Self {
        match e {
            CacheError::BudgetExceeded { needed, budget } => {
                ServeError::BudgetExceeded { needed, budget }
            }
            other => ServeError::Internal(other.to_string()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub scheme: SchemeTag,
    pub index: u16,
    pub max_batch: u64,
    pub cache_budget: u64,
    /// Chain-table stride for flrsha derivation; None picks ~sqrt(J).
    pub chain_stride: Option<u64>,
    /// Fault injection for the demo's detection phase: flips one byte in
    /// every served bundle after derivation.
    pub inject_tamper: bool,
}

impl ServerConfig {
    pub fn new(scheme: SchemeTag, index: u16) -> Self {
        ServerConfig {
            scheme,
            index,
            max_batch: 1024,
            cache_budget: 64 << 20,
            chain_stride: None,
            inject_tamper: false,
        }
    }
}

pub struct CommitmentService {
    config: ServerConfig,
    keystore: RwLock<SealedKeystore>,
    cache: RwLock<CommitmentCache>,
}

impl CommitmentService {
    pub fn new(config: ServerConfig) -> Self {
        let cache = CommitmentCache::new(config.cache_budget);
        CommitmentService { config, keystore: RwLock::new(SealedKeystore::new()), cache: RwLock::new(cache) }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn is_provisioned(&self) -> bool {
        self.keystore.read().unwrap().is_provisioned()
    }

    /// Seal the blob and, for flrsha, build the chain tables bounding
    /// per-request derivation cost.
    pub fn provision(&self, blob: ServerSecretBlob) -> Result<(), KeystoreError> {
        let max_epochs = blob.max_epochs;
        let mut ks = self.keystore.write().unwrap();
        ks.provision(blob, self.config.scheme, self.config.index)?;
        if let ProvisionedSecret::Flrsha(secret) = ks.secret_mut()? {
            let stride = self
                .config
                .chain_stride
                .unwrap_or_else(|| (max_epochs as f64).sqrt().ceil() as u64)
                .clamp(1, max_epochs);
            secret
                .build_chain_tables(stride)
                .map_err(|e| KeystoreError::MalformedSecret(e.to_string()))?;
        }
        Ok(())
    }

    pub fn max_epochs(&self) -> Result<u64, ServeError> {
        let ks = self.keystore.read().unwrap();
        Ok(match ks.secret()? {
            ProvisionedSecret::Lrsha(s) => s.max_epochs,
            ProvisionedSecret::Flrsha(s) => s.max_epochs,
        })
    }

    fn derive(&self, epoch: u64) -> Result<Vec<u8>, ServeError> {
        let mut ks = self.keystore.write().unwrap();
        match ks.secret_mut()? {
            ProvisionedSecret::Lrsha(secret) => {
                Ok(lrsha::server_commit(secret, epoch)?.encode())
            }
            ProvisionedSecret::Flrsha(secret) => {
                Ok(flrsha::server_commit(secret, epoch)?.encode())
            }
        }
    }

    fn post_process(&self, mut bundle: Vec<u8>) -> Vec<u8> {
        if self.config.inject_tamper {
            // lands inside the R (lrsha) or Y (flrsha) field either way
            bundle[20] ^= 0x01;
        }
        bundle
    }

    /// Serve one epoch, preferring the cache. Cached and cold bytes are
    /// identical because all derivation is deterministic.
    pub fn serve_commitment(&self, epoch: u64) -> Result<Vec<u8>, ServeError> {
        let max_epochs = self.max_epochs()?;
        if epoch < 1 || epoch > max_epochs {
            return Err(ServeError::EpochOutOfRange { epoch, max_epochs });
        }
        if let Some(bundle) = self.cache.read().unwrap().get(epoch) {
            return Ok(self.post_process(bundle));
        }
        Ok(self.post_process(self.derive(epoch)?))
    }

    pub fn serve_batch(&self, lo: u64, hi: u64) -> Result<Vec<Vec<u8>>, ServeError> {
        if lo > hi || lo < 1 {
            return Err(ServeError::BadRequest(format!("bad range [{lo}, {hi}]")));
        }
        let requested = hi - lo + 1;
        if requested > self.config.max_batch {
            return Err(ServeError::RangeTooLarge { requested, max_batch: self.config.max_batch });
        }
        (lo..=hi).map(|epoch| self.serve_commitment(epoch)).collect()
    }

    /// Populate the cache for a range. Subsequent serves in range are cache
    /// hits, observable through the status stats.
    pub fn precompute(&self, lo: u64, hi: u64) -> Result<lrsha_core::wire::CacheStats, ServeError> {
        let max_epochs = self.max_epochs()?;
        if lo > hi || lo < 1 || hi > max_epochs {
            return Err(ServeError::EpochOutOfRange { epoch: hi.max(lo), max_epochs });
        }
        let mut cache = self.cache.write().unwrap();
        cache.populate(lo, hi, |epoch| self.derive(epoch)).map_err(|e| match e {
            crate::cache::PopulateError::Budget { needed, budget } => {
                ServeError::BudgetExceeded { needed, budget }
            }
            crate::cache::PopulateError::Derive(e) => e,
        })
    }

    pub fn cache_stats(&self) -> lrsha_core::wire::CacheStats {
        self.cache.read().unwrap().stats()
    }

    pub fn save_cache(&self, path: &Path) -> Result<(), ServeError> {
        let ks = self.keystore.read().unwrap();
        let group = match ks.secret()? {
            ProvisionedSecret::Lrsha(s) => s.cert.public().group(),
            ProvisionedSecret::Flrsha(s) => s.fs_state.group(),
        };
        drop(ks);
        self.cache
            .read()
            .unwrap()
            .save(path, self.config.scheme, group, self.config.index)?;
        Ok(())
    }

    pub fn load_cache(&self, path: &Path) -> Result<(), ServeError> {
        let ks = self.keystore.read().unwrap();
        let group = match ks.secret()? {
            ProvisionedSecret::Lrsha(s) => s.cert.public().group(),
            ProvisionedSecret::Flrsha(s) => s.fs_state.group(),
        };
        drop(ks);
        let cache = CommitmentCache::load(
            path,
            self.config.cache_budget,
            self.config.scheme,
            group,
            self.config.index,
        )?;
        *self.cache.write().unwrap() = cache;
        Ok(())
    }

    pub fn status(&self) -> StatusBody {
        let cache = self.cache.read().unwrap();
        let (lo, hi) = match cache.range() {
            Some((lo, hi)) => (Some(lo), Some(hi)),
            None => (None, None),
        };
        StatusBody {
            ready: self.is_provisioned(),
            scheme: self.config.scheme,
            server: self.config.index,
            max_epochs: self.max_epochs().unwrap_or(0),
            precomputed_lo: lo,
            precomputed_hi: hi,
            cache: cache.stats(),
        }
    }

    /// Full wire-protocol dispatch.
    pub fn handle(&self, req: &WireRequest) -> WireResponse {
        if req.v != WIRE_VERSION {
            return WireResponse::fault("BadRequest", format!("unsupported version {}", req.v));
        }
        if req.scheme != self.config.scheme {
            return WireResponse::fault(
                "BadRequest",
                format!("server speaks {}, request says {}", self.config.scheme, req.scheme),
            );
        }
        if req.server != self.config.index {
            return WireResponse::fault(
                "BadRequest",
                format!("this is server {}, request names {}", self.config.index, req.server),
            );
        }
        match req.op {
            WireOp::Get { j } => match self.serve_commitment(j) {
                Ok(bundle) => WireResponse::bundles(vec![bundle]),
                Err(e) => WireResponse::fault(e.code(), e.to_string()),
            },
            WireOp::Batch { lo, hi } => match self.serve_batch(lo, hi) {
                Ok(bundles) => WireResponse::bundles(bundles),
                Err(e) => WireResponse::fault(e.code(), e.to_string()),
            },
            WireOp::Status => WireResponse::status(self.status()),
        }
    }
}
