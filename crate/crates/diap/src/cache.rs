// SPDX-License-Identifier: Apache-2.0

//! LRU cache of resolved DID documents.
//!
//! Entries never go stale: a CID names exactly one document, so only
//! capacity evicts.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use diap_core::{Cid, DidDocument};
use lru::LruCache;

pub const DEFAULT_CACHE_CAPACITY: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DidCacheEntry {
    pub cid: Cid,
    pub document: DidDocument,
    pub fetched_at: u64,
}

pub struct DidCache {
    entries: Option<Mutex<LruCache<Cid, DidCacheEntry>>>,
    hits: AtomicU64,
    fetches: AtomicU64,
}

impl Default for DidCache {
    fn default() -> Self {
        Self::new(DEFAULT_CACHE_CAPACITY)
    }
}

impl DidCache {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity).expect("capacity must be nonzero");
        DidCache {
            entries: Some(Mutex::new(LruCache::new(cap))),
            hits: AtomicU64::new(0),
            fetches: AtomicU64::new(0),
        }
    }

    /// A cache that never stores anything; every lookup is a fetch.
    pub fn disabled() -> Self {
        DidCache {
            entries: None,
            hits: AtomicU64::new(0),
            fetches: AtomicU64::new(0),
        }
    }

    pub fn get(&self, cid: &Cid) -> Option<DidDocument> {
        let found = self
            .entries
            .as_ref()
            .and_then(|m| m.lock().unwrap().get(cid).map(|e| e.document.clone()));
        if found.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        }
        found
    }

    pub fn insert(&self, entry: DidCacheEntry) {
        if let Some(m) = &self.entries {
            m.lock().unwrap().put(entry.cid, entry);
        }
    }

    pub(crate) fn record_fetch(&self) {
        self.fetches.fetch_add(1, Ordering::Relaxed);
    }

    pub fn contains(&self, cid: &Cid) -> bool {
        self.entries
            .as_ref()
            .is_some_and(|m| m.lock().unwrap().contains(cid))
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    /// Number of store fetches made on behalf of this cache.
    pub fn fetches(&self) -> u64 {
        self.fetches.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.as_ref().map_or(0, |m| m.lock().unwrap().len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
