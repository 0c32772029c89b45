//! LRU cache of per-epoch aggregates. Every cached entry was produced from
//! fully certificate-verified bundles.

use std::num::NonZeroUsize;

use lru::LruCache;

use lrsha_core::group::GroupElement;

pub const DEFAULT_CAPACITY: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpochAggregates {
    /// Product of the partial commitments R_j^l.
    pub commitment: GroupElement,
    /// Product of the per-epoch keys Y_j^l (flrsha only).
    pub epoch_key: Option<GroupElement>,
}

pub struct AggregateCache {
    entries: LruCache<u64, EpochAggregates>,
}

impl AggregateCache {
    pub fn new(capacity: usize) -> Self {
        let capacity = NonZeroUsize::new(capacity.max(1)).unwrap();
        AggregateCache { entries: LruCache::new(capacity) }
    }

    pub fn get(&mut self, epoch: u64) -> Option<EpochAggregates> {
        self.entries.get(&epoch).copied()
    }

    pub fn insert(&mut self, epoch: u64, aggregates: EpochAggregates) {
        self.entries.put(epoch, aggregates);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.entries.cap().get()
    }
}
