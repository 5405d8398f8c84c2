// SPDX-License-Identifier: Apache-2.0

//! Single-use challenge bookkeeping, keyed by nonce hash.
//!
//! Interactive challenges are consumed once, globally. Broadcast challenges
//! are self-issued by a publisher and consumed once per [`ConsumerId`], so
//! every subscriber can accept an envelope exactly once.

use std::collections::hash_map::Entry as MapEntry;
use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use diap_core::challenge::DEFAULT_CHALLENGE_TTL_SECS;
use diap_core::{split_hash_to_fields, FieldElement, NonceChallenge};
use rand::rngs::OsRng;
use rand::RngCore;
use thiserror::Error;

/// Above this many live entries, issuing a challenge sweeps expired ones.
pub const SWEEP_THRESHOLD: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConsumerId(u64);

impl ConsumerId {
    pub const DEFAULT: ConsumerId = ConsumerId(0);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum NonceRejection {
    #[error("nonce-unknown")]
    Unknown,
    #[error("nonce-expired")]
    Expired,
    #[error("nonce-consumed")]
    Consumed,
}

#[derive(Debug, Error)]
#[error("randomness unavailable: {0}")]
pub struct RandomnessUnavailable(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scope {
    Single,
    Broadcast,
}

struct Entry {
    issued_at: u64,
    scope: Scope,
    consumed: bool,
    consumed_by: HashSet<ConsumerId>,
}

pub struct ChallengeTable {
    ttl: u64,
    entries: Mutex<HashMap<FieldElement, Entry>>,
    next_consumer: AtomicU64,
}

impl Default for ChallengeTable {
    fn default() -> Self {
        Self::new(DEFAULT_CHALLENGE_TTL_SECS)
    }
}

impl ChallengeTable {
    pub fn new(ttl_secs: u64) -> Self {
        ChallengeTable {
            ttl: ttl_secs,
            entries: Mutex::new(HashMap::new()),
            next_consumer: AtomicU64::new(1),
        }
    }

    pub fn ttl(&self) -> u64 {
        self.ttl
    }

    pub fn new_consumer(&self) -> ConsumerId {
        ConsumerId(self.next_consumer.fetch_add(1, Ordering::Relaxed))
    }

    /// Issues a fresh interactive challenge.
    pub fn issue(&self, now: u64) -> Result<NonceChallenge, RandomnessUnavailable> {
        let challenge = fresh_challenge(now)?;
        self.insert(&challenge, Scope::Single);
        Ok(challenge)
    }

    /// Issues a challenge a publisher attaches to its own broadcast.
    pub fn issue_broadcast(&self, now: u64) -> Result<NonceChallenge, RandomnessUnavailable> {
        let challenge = fresh_challenge(now)?;
        self.insert(&challenge, Scope::Broadcast);
        Ok(challenge)
    }

    /// Registers an externally generated interactive challenge.
    pub fn register(&self, challenge: &NonceChallenge) {
        self.insert(challenge, Scope::Single);
    }

    pub fn register_broadcast(&self, challenge: &NonceChallenge) {
        self.insert(challenge, Scope::Broadcast);
    }

    fn insert(&self, challenge: &NonceChallenge, scope: Scope) {
        let mut entries = self.entries.lock().unwrap();
        if entries.len() >= SWEEP_THRESHOLD {
            let ttl = self.ttl;
            let now = challenge.issued_at;
            entries.retain(|_, e| !expired(ttl, e.issued_at, now));
        }
        entries.entry(challenge.nonce_hash).or_insert(Entry {
            issued_at: challenge.issued_at,
            scope,
            consumed: false,
            consumed_by: HashSet::new(),
        });
    }

    /// True if `nonce_hash` is known, unexpired and not yet consumed by the
    /// default consumer. Does not consume.
    pub fn is_live(&self, nonce_hash: &FieldElement, now: u64) -> bool {
        let entries = self.entries.lock().unwrap();
        match entries.get(nonce_hash) {
            Some(e) => {
                !expired(self.ttl, e.issued_at, now)
                    && match e.scope {
                        Scope::Single => !e.consumed,
                        Scope::Broadcast => !e.consumed_by.contains(&ConsumerId::DEFAULT),
                    }
            }
            None => false,
        }
    }

    pub fn try_consume(
        &self,
        nonce_hash: &FieldElement,
        consumer: ConsumerId,
        now: u64,
    ) -> Result<(), NonceRejection> {
        let mut entries = self.entries.lock().unwrap();
        let MapEntry::Occupied(mut slot) = entries.entry(*nonce_hash) else {
            return Err(NonceRejection::Unknown);
        };
        if expired(self.ttl, slot.get().issued_at, now) {
            slot.remove();
            return Err(NonceRejection::Expired);
        }
        let e = slot.get_mut();
        let fresh = match e.scope {
            Scope::Single => !std::mem::replace(&mut e.consumed, true),
            Scope::Broadcast => e.consumed_by.insert(consumer),
        };
        if fresh {
            Ok(())
        } else {
            Err(NonceRejection::Consumed)
        }
    }

    /// True exactly once per issued, unexpired challenge.
    pub fn check_and_consume(&self, nonce_hash: &FieldElement, now: u64) -> bool {
        self.try_consume(nonce_hash, ConsumerId::DEFAULT, now).is_ok()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn expired(ttl: u64, issued_at: u64, now: u64) -> bool {
    now.saturating_sub(issued_at) > ttl
}

fn fresh_challenge(now: u64) -> Result<NonceChallenge, RandomnessUnavailable> {
    let mut bytes = [0u8; 32];
    OsRng
        .try_fill_bytes(&mut bytes)
        .map_err(|e| RandomnessUnavailable(e.to_string()))?;
    let nonce = split_hash_to_fields(&bytes).expect("32-byte input");
    Ok(NonceChallenge::from_nonce(nonce, now))
}
