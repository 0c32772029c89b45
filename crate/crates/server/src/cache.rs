//! Precomputed bundle cache.
//!
//! Servers can trade storage for response latency by precomputing a range of
//! bundles. Cached bytes are exactly what the cold path would derive; the
//! budget bounds total bundle bytes. The cache file is public material (the
//! bundles are served to anyone), so it is never encrypted.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use lrsha_core::group::GroupId;
use lrsha_core::wire::CacheStats;
use lrsha_core::SchemeTag;

use crate::keystore::{
    read_sealed_file, write_sealed_file, FileHeader, KeystoreBackend, KeystoreError, MAGIC_CACHE,
};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("budget exceeded: {needed} bytes needed, {budget} allowed")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("cache file mismatch: {0}")]
    Mismatch(&'static str),
    #[error(transparent)]
    Keystore(#[from] KeystoreError),
}

/// Outcome of a populate pass: the budget ran out, or the deriver failed.
#[derive(Debug)]
pub enum PopulateError<E> {
    Budget { needed: u64, budget: u64 },
    Derive(E),
}

pub struct CommitmentCache {
    budget: u64,
    range: Option<(u64, u64)>,
    bundles: BTreeMap<u64, Vec<u8>>,
    bytes: u64,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl CommitmentCache {
    pub fn new(budget: u64) -> Self {
        CommitmentCache {
            budget,
            range: None,
            bundles: BTreeMap::new(),
            bytes: 0,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn range(&self) -> Option<(u64, u64)> {
        self.range
    }

    /// Replace the cache contents with bundles for `lo..=hi` produced by
    /// `derive`. On budget overflow the existing contents stay untouched.
    pub fn populate<E>(
        &mut self,
        lo: u64,
        hi: u64,
        mut derive: impl FnMut(u64) -> Result<Vec<u8>, E>,
    ) -> Result<CacheStats, PopulateError<E>> {
        let mut fresh = BTreeMap::new();
        let mut bytes = 0u64;
        for epoch in lo..=hi {
            let bundle = derive(epoch).map_err(PopulateError::Derive)?;
            bytes += bundle.len() as u64;
            if bytes > self.budget {
                return Err(PopulateError::Budget { needed: bytes, budget: self.budget });
            }
            fresh.insert(epoch, bundle);
        }
        self.bundles = fresh;
        self.bytes = bytes;
        self.range = Some((lo, hi));
        Ok(self.stats())
    }

    pub fn get(&self, epoch: u64) -> Option<Vec<u8>> {
        match self.bundles.get(&epoch) {
            Some(b) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(b.clone())
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            bundles: self.bundles.len() as u64,
            bytes: self.bytes,
            budget: self.budget,
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    /// Persist to a versioned cache file next to the keystore.
    pub fn save(
        &self,
        path: &Path,
        scheme: SchemeTag,
        group: GroupId,
        server: u16,
    ) -> Result<(), CacheError> {
        let header = FileHeader {
            magic: MAGIC_CACHE,
            backend: KeystoreBackend::Sealed,
            scheme,
            group,
            aux: server,
        };
        let (lo, hi) = self.range.unwrap_or((0, 0));
        let mut payload = Vec::new();
        payload.extend_from_slice(&lo.to_le_bytes());
        payload.extend_from_slice(&hi.to_le_bytes());
        payload.extend_from_slice(&(self.bundles.len() as u64).to_le_bytes());
        for (epoch, bundle) in &self.bundles {
            payload.extend_from_slice(&epoch.to_le_bytes());
            payload.extend_from_slice(&(bundle.len() as u32).to_le_bytes());
            payload.extend_from_slice(bundle);
        }
        write_sealed_file(path, header, &payload, None)?;
        Ok(())
    }

    /// Load a cache file, verifying it belongs to this server and scheme.
    pub fn load(
        path: &Path,
        budget: u64,
        scheme: SchemeTag,
        group: GroupId,
        server: u16,
    ) -> Result<Self, CacheError> {
        let (header, payload) = read_sealed_file(path, MAGIC_CACHE, None)?;
        if header.scheme != scheme || header.group != group {
            return Err(CacheError::Mismatch("scheme or group"));
        }
        if header.aux != server {
            return Err(CacheError::Mismatch("server index"));
        }
        if payload.len() < 24 {
            return Err(CacheError::Mismatch("truncated payload"));
        }
        let lo = u64::from_le_bytes(payload[..8].try_into().unwrap());
        let hi = u64::from_le_bytes(payload[8..16].try_into().unwrap());
        let count = u64::from_le_bytes(payload[16..24].try_into().unwrap());

        let mut cache = CommitmentCache::new(budget);
        let mut offset = 24usize;
        for _ in 0..count {
            if payload.len() < offset + 12 {
                return Err(CacheError::Mismatch("truncated entry"));
            }
            let epoch = u64::from_le_bytes(payload[offset..offset + 8].try_into().unwrap());
            let len =
                u32::from_le_bytes(payload[offset + 8..offset + 12].try_into().unwrap()) as usize;
            offset += 12;
            if payload.len() < offset + len {
                return Err(CacheError::Mismatch("truncated bundle"));
            }
            cache.bytes += len as u64;
            if cache.bytes > budget {
                return Err(CacheError::BudgetExceeded { needed: cache.bytes, budget });
            }
            cache.bundles.insert(epoch, payload[offset..offset + len].to_vec());
            offset += len;
        }
        if offset != payload.len() {
            return Err(CacheError::Mismatch("trailing bytes"));
        }
        if count > 0 {
            cache.range = Some((lo, hi));
        }
        Ok(cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(epoch: u64) -> Vec<u8> {
        let mut b = vec![0u8; 40];
        b[..8].copy_from_slice(&epoch.to_le_bytes());
        b
    }

    type NoFail = std::convert::Infallible;

    #[test]
    fn populate_get_and_stats() {
        let mut cache = CommitmentCache::new(10_000);
        let stats = cache.populate(1, 10, |e| Ok::<_, NoFail>(bundle(e))).unwrap();
        assert_eq!(stats.bundles, 10);
        assert_eq!(stats.bytes, 400);
        assert!(stats.bytes <= stats.budget);

        assert_eq!(cache.get(5), Some(bundle(5)));
        assert_eq!(cache.get(11), None);
        let stats = cache.stats();
        assert_eq!((stats.hits, stats.misses), (1, 1));
    }

    #[test]
    fn budget_smaller_than_one_bundle_is_rejected() {
        let mut cache = CommitmentCache::new(39);
        let err = cache.populate(1, 1, |e| Ok::<_, NoFail>(bundle(e))).unwrap_err();
        assert!(matches!(err, PopulateError::Budget { needed: 40, budget: 39 }));
        assert_eq!(cache.stats().bundles, 0);
    }

    #[test]
    fn save_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache");
        let mut cache = CommitmentCache::new(10_000);
        cache.populate(3, 7, |e| Ok::<_, NoFail>(bundle(e))).unwrap();
        cache.save(&path, SchemeTag::Lrsha, GroupId::Toy23, 2).unwrap();

        let loaded =
            CommitmentCache::load(&path, 10_000, SchemeTag::Lrsha, GroupId::Toy23, 2).unwrap();
        assert_eq!(loaded.range(), Some((3, 7)));
        for epoch in 3..=7 {
            assert_eq!(loaded.get(epoch), Some(bundle(epoch)));
        }

        assert!(CommitmentCache::load(&path, 10_000, SchemeTag::Flrsha, GroupId::Toy23, 2).is_err());
        assert!(CommitmentCache::load(&path, 10_000, SchemeTag::Lrsha, GroupId::Toy23, 1).is_err());
        assert!(CommitmentCache::load(&path, 100, SchemeTag::Lrsha, GroupId::Toy23, 2).is_err());
    }
}
