//! The verifier client: prefetch, validate, aggregate, verify.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use futures::future::join_all;
use serde::Serialize;

use lrsha_core::descriptor::{DeploymentDescriptor, DescriptorError, ServerEntry};
use lrsha_core::group::elem_product;
use lrsha_core::{flrsha, lrsha, SchemeError, SchemeParams, SchemeTag, Signature};

use crate::cache::{AggregateCache, EpochAggregates, DEFAULT_CAPACITY};
use crate::source::{BundleSource, SourceError};

/// Faults attributable during bundle retrieval and validation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientFault {
    #[error("server {server} unreachable: {detail}")]
    ServerUnreachable { server: u16, detail: String },
    #[error("CertFailure{{server={server}, epoch={epoch}}}")]
    CertFailure { server: u16, epoch: u64 },
    #[error("epoch {epoch} outside [1, {max_epochs}]")]
    EpochOutOfRange { epoch: u64, max_epochs: u64 },
}

/// Why a signature was not accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    /// The Schnorr equation failed against this epoch's aggregates.
    BadSignatureEq,
    /// The signature bytes did not decode.
    MalformedSignature,
    /// Epoch outside the deployment's [1, J].
    EpochOutOfRange { epoch: u64, max_epochs: u64 },
    /// Retrieval or certificate validation failed.
    Fault(ClientFault),
    /// Replay protection: epoch at or below the accepted floor.
    StaleEpoch { epoch: u64, floor: u64 },
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::BadSignatureEq => write!(f, "BadSignatureEq"),
            RejectReason::MalformedSignature => write!(f, "MalformedSignature"),
            RejectReason::EpochOutOfRange { epoch, max_epochs } => {
                write!(f, "EpochOutOfRange{{epoch={epoch}, max={max_epochs}}}")
            }
            RejectReason::Fault(ClientFault::CertFailure { server, epoch }) => {
                write!(f, "CertFailure{{server={server}, epoch={epoch}}}")
            }
            RejectReason::Fault(ClientFault::ServerUnreachable { server, .. }) => {
                write!(f, "ServerUnreachable{{server={server}}}")
            }
            RejectReason::Fault(ClientFault::EpochOutOfRange { epoch, max_epochs }) => {
                write!(f, "EpochOutOfRange{{epoch={epoch}, max={max_epochs}}}")
            }
            RejectReason::StaleEpoch { epoch, floor } => {
                write!(f, "StaleEpoch{{epoch={epoch}, floor={floor}}}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyOutcome {
    Accept { epoch: u64 },
    Reject(RejectReason),
}

impl VerifyOutcome {
    pub fn is_accept(&self) -> bool {
        matches!(self, VerifyOutcome::Accept { .. })
    }
}

#[derive(Debug, Default)]
pub struct PrefetchStats {
    pub epochs_cached: u64,
    pub faults: Vec<ClientFault>,
}

#[derive(Debug, Serialize)]
pub struct AuditReport {
    pub epochs: Vec<u64>,
    pub servers: Vec<ServerAudit>,
}

#[derive(Debug, Serialize)]
pub struct ServerAudit {
    pub server: u16,
    pub passed: u64,
    pub failed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<FailureNote>,
}

#[derive(Debug, Serialize)]
pub struct FailureNote {
    pub epoch: u64,
    pub reason: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
}

enum VerifierKeys {
    Lrsha(lrsha::LrshaPublicKey),
    Flrsha(flrsha::FlrshaVerifierKey),
}

enum ValidatedBundle {
    Lrsha(lrsha::CommitmentBundle),
    Flrsha(flrsha::FlrshaCommitmentBundle),
}

pub struct VerifierClient {
    descriptor: DeploymentDescriptor,
    params: SchemeParams,
    keys: VerifierKeys,
    source: Box<dyn BundleSource>,
    cache: Mutex<AggregateCache>,
    /// When set, only strictly increasing epochs are accepted.
    replay_floor: Option<AtomicU64>,
}

impl VerifierClient {
    pub fn new(
        descriptor: DeploymentDescriptor,
        source: Box<dyn BundleSource>,
    ) -> Result<Self, ClientError> {
        Self::with_cache_capacity(descriptor, source, DEFAULT_CAPACITY)
    }

    pub fn with_cache_capacity(
        descriptor: DeploymentDescriptor,
        source: Box<dyn BundleSource>,
        capacity: usize,
    ) -> Result<Self, ClientError> {
        descriptor.validate()?;
        let params = descriptor.params();
        let keys = match descriptor.scheme {
            SchemeTag::Lrsha => VerifierKeys::Lrsha(lrsha::LrshaPublicKey {
                y_public: descriptor.signer_element()?,
                cert_keys: descriptor.cert_elements()?,
                params,
            }),
            SchemeTag::Flrsha => VerifierKeys::Flrsha(flrsha::FlrshaVerifierKey {
                params,
                roots: descriptor.root_digests()?,
            }),
        };
        Ok(VerifierClient {
            descriptor,
            params,
            keys,
            source,
            cache: Mutex::new(AggregateCache::new(capacity)),
            replay_floor: None,
        })
    }

    /// Enable the strictly-increasing-epoch policy (off by default),
    /// rejecting any signature at or below `floor`.
    pub fn with_replay_protection(mut self, floor: u64) -> Self {
        self.replay_floor = Some(AtomicU64::new(floor));
        self
    }

    pub fn replay_floor(&self) -> Option<u64> {
        self.replay_floor.as_ref().map(|f| f.load(Ordering::Relaxed))
    }

    pub fn descriptor(&self) -> &DeploymentDescriptor {
        &self.descriptor
    }

    pub fn cached_epochs(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Decode and fully validate one server's response bundle. Any failure
    /// is attributed to that server: a tampered index, epoch, commitment or
    /// certificate all land here.
    fn validate_bundle(
        &self,
        server: u16,
        epoch: u64,
        bytes: &[u8],
    ) -> Result<ValidatedBundle, ClientFault> {
        let fail = || ClientFault::CertFailure { server, epoch };
        match &self.keys {
            VerifierKeys::Lrsha(pk) => {
                let bundle =
                    lrsha::CommitmentBundle::decode(self.params.group, bytes).map_err(|_| fail())?;
                if bundle.server != server || bundle.epoch != epoch || bundle.encode() != bytes {
                    return Err(fail());
                }
                lrsha::check_bundle(pk, &bundle).map_err(|_| fail())?;
                Ok(ValidatedBundle::Lrsha(bundle))
            }
            VerifierKeys::Flrsha(vk) => {
                let bundle = flrsha::FlrshaCommitmentBundle::decode(self.params.group, bytes)
                    .map_err(|_| fail())?;
                if bundle.server != server || bundle.epoch != epoch || bundle.encode() != bytes {
                    return Err(fail());
                }
                flrsha::check_bundle(vk, &bundle).map_err(|_| fail())?;
                Ok(ValidatedBundle::Flrsha(bundle))
            }
        }
    }

    fn aggregate_validated(&self, bundles: Vec<ValidatedBundle>) -> EpochAggregates {
        let mut commitments = Vec::with_capacity(bundles.len());
        let mut keys = Vec::with_capacity(bundles.len());
        for bundle in bundles {
            match bundle {
                ValidatedBundle::Lrsha(b) => commitments.push(b.commitment),
                ValidatedBundle::Flrsha(b) => {
                    commitments.push(b.commitment);
                    keys.push(b.epoch_key);
                }
            }
        }
        EpochAggregates {
            commitment: elem_product(&commitments).expect("one bundle per server"),
            epoch_key: if keys.is_empty() {
                None
            } else {
                Some(elem_product(&keys).expect("one bundle per server"))
            },
        }
    }

    /// Fetch `lo..=hi` from every server concurrently, validate, aggregate,
    /// and cache. Failures are attributed per server; epochs untouched by
    /// any fault are still cached.
    pub async fn prefetch(&self, lo: u64, hi: u64) -> Result<PrefetchStats, ClientFault> {
        let max_epochs = self.params.max_epochs;
        if lo < 1 || lo > hi || hi > max_epochs {
            return Err(ClientFault::EpochOutOfRange { epoch: hi.max(lo), max_epochs });
        }
        let fetches = join_all(self.descriptor.servers.iter().map(|entry| async move {
            (entry.index, self.source.fetch_bundles(entry, self.params.scheme, lo, hi).await)
        }))
        .await;

        let mut stats = PrefetchStats::default();
        let span = (hi - lo + 1) as usize;
        let mut per_server: Vec<Option<Vec<Vec<u8>>>> = Vec::with_capacity(fetches.len());
        for (index, result) in fetches {
            match result {
                Ok(bundles) if bundles.len() == span => per_server.push(Some(bundles)),
                Ok(bundles) => {
                    stats.faults.push(ClientFault::ServerUnreachable {
                        server: index,
                        detail: format!("returned {} bundles for a span of {span}", bundles.len()),
                    });
                    per_server.push(None);
                }
                Err(e) => {
                    stats.faults.push(source_fault(index, e, lo, max_epochs));
                    per_server.push(None);
                }
            }
        }

        for offset in 0..span {
            let epoch = lo + offset as u64;
            let mut validated = Vec::with_capacity(per_server.len());
            let mut epoch_ok = true;
            for (i, server_bundles) in per_server.iter().enumerate() {
                let server = self.descriptor.servers[i].index;
                match server_bundles {
                    Some(bundles) => match self.validate_bundle(server, epoch, &bundles[offset]) {
                        Ok(v) => validated.push(v),
                        Err(fault) => {
                            stats.faults.push(fault);
                            epoch_ok = false;
                        }
                    },
                    None => epoch_ok = false, // fetch fault already recorded
                }
            }
            if epoch_ok {
                let aggregates = self.aggregate_validated(validated);
                self.cache.lock().unwrap().insert(epoch, aggregates);
                stats.epochs_cached += 1;
            }
        }
        Ok(stats)
    }

    async fn aggregates_for(&self, epoch: u64) -> Result<EpochAggregates, RejectReason> {
        if let Some(hit) = self.cache.lock().unwrap().get(epoch) {
            return Ok(hit);
        }
        let stats = self
            .prefetch(epoch, epoch)
            .await
            .map_err(|f| RejectReason::Fault(f))?;
        if let Some(fault) = stats.faults.into_iter().next() {
            return Err(RejectReason::Fault(fault));
        }
        self.cache
            .lock()
            .unwrap()
            .get(epoch)
            .ok_or(RejectReason::Fault(ClientFault::EpochOutOfRange {
                epoch,
                max_epochs: self.params.max_epochs,
            }))
    }

    /// Verify one message/signature pair, fetching aggregates on a cache
    /// miss. The warm path costs one hash and two exponentiations.
    pub async fn verify_message(&self, msg: &[u8], sig_bytes: &[u8]) -> VerifyOutcome {
        let sig = match Signature::decode(self.params.group, sig_bytes) {
            Ok(sig) => sig,
            Err(_) => return VerifyOutcome::Reject(RejectReason::MalformedSignature),
        };
        self.verify_signature(msg, &sig).await
    }

    pub async fn verify_signature(&self, msg: &[u8], sig: &Signature) -> VerifyOutcome {
        let max_epochs = self.params.max_epochs;
        if sig.epoch < 1 || sig.epoch > max_epochs {
            return VerifyOutcome::Reject(RejectReason::EpochOutOfRange {
                epoch: sig.epoch,
                max_epochs,
            });
        }
        if let Some(floor) = &self.replay_floor {
            let floor_val = floor.load(Ordering::Acquire);
            if sig.epoch <= floor_val {
                return VerifyOutcome::Reject(RejectReason::StaleEpoch {
                    epoch: sig.epoch,
                    floor: floor_val,
                });
            }
        }

        let aggregates = match self.aggregates_for(sig.epoch).await {
            Ok(a) => a,
            Err(reason) => return VerifyOutcome::Reject(reason),
        };

        let verified = match &self.keys {
            VerifierKeys::Lrsha(pk) => lrsha::check(pk, msg, sig, &aggregates.commitment),
            VerifierKeys::Flrsha(vk) => {
                let epoch_key = aggregates.epoch_key.expect("flrsha aggregates carry keys");
                flrsha::check(vk, msg, sig, &epoch_key, &aggregates.commitment)
            }
        };
        match verified {
            Ok(()) => {
                if let Some(floor) = &self.replay_floor {
                    floor.fetch_max(sig.epoch, Ordering::AcqRel);
                }
                VerifyOutcome::Accept { epoch: sig.epoch }
            }
            Err(SchemeError::EpochOutOfRange { epoch, max_epochs }) => {
                VerifyOutcome::Reject(RejectReason::EpochOutOfRange { epoch, max_epochs })
            }
            Err(_) => VerifyOutcome::Reject(RejectReason::BadSignatureEq),
        }
    }

    /// Probe each server at the sampled epochs, verifying its certificates
    /// individually. The report carries per-server pass/fail counts and the
    /// first failing epoch.
    pub async fn audit_servers(&self, epochs: &[u64]) -> AuditReport {
        let mut servers = Vec::with_capacity(self.descriptor.servers.len());
        for entry in &self.descriptor.servers {
            servers.push(self.audit_one(entry, epochs).await);
        }
        AuditReport { epochs: epochs.to_vec(), servers }
    }

    async fn audit_one(&self, entry: &ServerEntry, epochs: &[u64]) -> ServerAudit {
        let mut audit =
            ServerAudit { server: entry.index, passed: 0, failed: 0, first_failure: None };
        for &epoch in epochs {
            let outcome = match self
                .source
                .fetch_bundles(entry, self.params.scheme, epoch, epoch)
                .await
            {
                Ok(bundles) if bundles.len() == 1 => self
                    .validate_bundle(entry.index, epoch, &bundles[0])
                    .map(|_| ())
                    .map_err(|f| f.to_string()),
                Ok(_) => Err("short response".to_string()),
                Err(e) => Err(e.to_string()),
            };
            match outcome {
                Ok(()) => audit.passed += 1,
                Err(reason) => {
                    audit.failed += 1;
                    if audit.first_failure.is_none() {
                        audit.first_failure = Some(FailureNote { epoch, reason });
                    }
                }
            }
        }
        audit
    }
}

fn source_fault(server: u16, e: SourceError, epoch: u64, max_epochs: u64) -> ClientFault {
    match e {
        // surface the server's own range complaint under the client's view
        SourceError::Fault { ref code, .. } if code == "EpochOutOfRange" => {
            ClientFault::EpochOutOfRange { epoch, max_epochs }
        }
        other => ClientFault::ServerUnreachable { server, detail: other.to_string() },
    }
}
