// SPDX-License-Identifier: Apache-2.0

//! The shared handles every agent operation runs against.

use std::sync::Arc;

use diap_core::{Cid, DidDocument, EmbeddedBackend, ProofBackend};
use thiserror::Error;

use crate::cache::{DidCache, DidCacheEntry};
use crate::clock::{Clock, SystemClock};
use crate::nonce::ChallengeTable;
use crate::store::{ContentStore, StoreError};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("not-found")]
    NotFound,
    #[error("integrity-violation")]
    IntegrityViolation,
    #[error("parse-error: {0}")]
    Parse(diap_core::Error),
    #[error("store error: {0}")]
    Store(StoreError),
}

impl From<StoreError> for ResolveError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound => ResolveError::NotFound,
            StoreError::IntegrityViolation(_) => ResolveError::IntegrityViolation,
            other => ResolveError::Store(other),
        }
    }
}

/// Store, cache, challenge table, proof backend and clock, cheaply
/// cloneable. Agents that share a `Context` see the same network.
#[derive(Clone)]
pub struct Context {
    pub store: Arc<ContentStore>,
    pub cache: Arc<DidCache>,
    pub challenges: Arc<ChallengeTable>,
    pub backend: Arc<dyn ProofBackend>,
    pub clock: Arc<dyn Clock>,
}

impl Context {
    pub fn new(store: ContentStore) -> Self {
        Context {
            store: Arc::new(store),
            cache: Arc::new(DidCache::default()),
            challenges: Arc::new(ChallengeTable::default()),
            backend: Arc::new(EmbeddedBackend),
            clock: Arc::new(SystemClock),
        }
    }

    pub fn in_memory() -> Self {
        Self::new(ContentStore::in_memory())
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_cache(mut self, cache: DidCache) -> Self {
        self.cache = Arc::new(cache);
        self
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    pub fn resolve_document(&self, cid: &Cid) -> Result<DidDocument, ResolveError> {
        resolve_document(cid, &self.cache, &self.store, self.now())
    }
}

/// Fetches the document stored under `cid`, from cache when possible.
/// Only documents whose bytes hash to `cid` are returned or cached.
pub fn resolve_document(
    cid: &Cid,
    cache: &DidCache,
    store: &ContentStore,
    now: u64,
) -> Result<DidDocument, ResolveError> {
    if let Some(doc) = cache.get(cid) {
        return Ok(doc);
    }
    cache.record_fetch();
    let bytes = store.get(cid)?;
    let document = DidDocument::from_json_bytes(&bytes).map_err(ResolveError::Parse)?;
    cache.insert(DidCacheEntry {
        cid: *cid,
        document: document.clone(),
        fetched_at: now,
    });
    Ok(document)
}
