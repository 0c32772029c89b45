//! Transport abstraction for fetching bundles from commitment servers.

use std::collections::HashMap;

use async_trait::async_trait;

use lrsha_core::descriptor::ServerEntry;
use lrsha_core::wire::{WireRequest, WireResponse};
use lrsha_core::SchemeTag;

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("server fault {code}: {message}")]
    Fault { code: String, message: String },
}

/// Fetches raw bundle bytes for an inclusive epoch range from one server.
#[async_trait]
pub trait BundleSource: Send + Sync {
    async fn fetch_bundles(
        &self,
        entry: &ServerEntry,
        scheme: SchemeTag,
        lo: u64,
        hi: u64,
    ) -> Result<Vec<Vec<u8>>, SourceError>;
}

/// HTTP transport speaking the JSON wire protocol.
pub struct HttpSource {
    http: reqwest::Client,
}

impl HttpSource {
    pub fn new() -> Self {
        HttpSource { http: reqwest::Client::new() }
    }
}

impl Default for HttpSource {
    fn default() -> Self {
        Self::new()
    }
}

#[async_trait]
impl BundleSource for HttpSource {
    async fn fetch_bundles(
        &self,
        entry: &ServerEntry,
        scheme: SchemeTag,
        lo: u64,
        hi: u64,
    ) -> Result<Vec<Vec<u8>>, SourceError> {
        let req = if lo == hi {
            WireRequest::get(scheme, entry.index, lo)
        } else {
            WireRequest::batch(scheme, entry.index, lo, hi)
        };
        let resp = self
            .http
            .post(&entry.endpoint)
            .json(&req)
            .send()
            .await
            .map_err(|e| SourceError::Transport(e.to_string()))?;
        let body: WireResponse =
            resp.json().await.map_err(|e| SourceError::Protocol(e.to_string()))?;
        if let Some(fault) = body.error {
            return Err(SourceError::Fault { code: fault.code, message: fault.message });
        }
        body.raw_bundles().map_err(|e| SourceError::Protocol(e.to_string()))
    }
}

/// An in-memory source serving pre-recorded bundles, keyed by
/// (server index, epoch). Useful for offline verification from bundle dumps
/// and as a deterministic transport in tests.
#[derive(Default)]
pub struct StaticSource {
    bundles: HashMap<(u16, u64), Vec<u8>>,
}

impl StaticSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, server: u16, epoch: u64, bundle: Vec<u8>) {
        self.bundles.insert((server, epoch), bundle);
    }

    pub fn get(&self, server: u16, epoch: u64) -> Option<&Vec<u8>> {
        self.bundles.get(&(server, epoch))
    }

    pub fn get_mut(&mut self, server: u16, epoch: u64) -> Option<&mut Vec<u8>> {
        self.bundles.get_mut(&(server, epoch))
    }
}

#[async_trait]
impl BundleSource for StaticSource {
    async fn fetch_bundles(
        &self,
        entry: &ServerEntry,
        _scheme: SchemeTag,
        lo: u64,
        hi: u64,
    ) -> Result<Vec<Vec<u8>>, SourceError> {
        (lo..=hi)
            .map(|epoch| {
                self.bundles
                    .get(&(entry.index, epoch))
                    .cloned()
                    .ok_or_else(|| SourceError::Transport(format!("no bundle for epoch {epoch}")))
            })
            .collect()
    }
}
