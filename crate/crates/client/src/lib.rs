//! Verifier-side orchestration.
//!
//! The client fetches certified commitment bundles from all L servers,
//! validates every bundle against the deployment descriptor (attributing any
//! failure to the server that produced it), caches per-epoch aggregates, and
//! runs the constant-cost online verification: one hash and two group
//! exponentiations on a warm cache.

pub mod cache;
pub mod client;
pub mod source;

pub use async_trait::async_trait;
pub use cache::AggregateCache;
pub use client::{
    AuditReport, ClientError, ClientFault, PrefetchStats, RejectReason, ServerAudit,
    VerifierClient, VerifyOutcome,
};
pub use source::{BundleSource, HttpSource, SourceError, StaticSource};
