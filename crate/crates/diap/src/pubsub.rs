// SPDX-License-Identifier: Apache-2.0

//! Authenticated broadcast.
//!
//! A publisher issues itself a broadcast challenge in the shared table,
//! proves ownership of its identity against it and signs the payload.
//! Receivers accept an envelope only if, in order, the nonce is fresh for
//! them, the ownership proof holds for the claimed cid, and the signature
//! verifies under the key in the resolved document.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use diap_core::{AuthenticatedMessage, DidDocument, NonceChallenge};
use thiserror::Error;

use crate::auth::{AuthFailure, Verifier};
use crate::bus::{BroadcastBus, BusError, Subscription};
use crate::context::Context;
use crate::identity::AgentIdentity;

#[derive(Debug, Error)]
pub enum PublishError {
    #[error("refused to publish: {0}")]
    Refused(AuthFailure),
    #[error(transparent)]
    Bus(#[from] BusError),
}

#[derive(Clone)]
pub struct PubsubAuthenticator {
    ctx: Context,
    bus: Arc<dyn BroadcastBus>,
}

impl PubsubAuthenticator {
    pub fn new(ctx: Context, bus: Arc<dyn BroadcastBus>) -> Self {
        PubsubAuthenticator { ctx, bus }
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    /// A broadcast challenge registered in the shared table.
    pub fn issue_challenge(&self) -> Result<NonceChallenge, AuthFailure> {
        self.ctx
            .challenges
            .issue_broadcast(self.ctx.now())
            .map_err(|_| AuthFailure::RandomnessUnavailable)
    }

    /// Builds a signed envelope without publishing it.
    pub fn seal(
        &self,
        identity: &AgentIdentity,
        topic: &str,
        content: Vec<u8>,
        challenge: &NonceChallenge,
    ) -> Result<AuthenticatedMessage, AuthFailure> {
        let proof = identity.prove_ownership(&challenge.nonce, self.ctx.backend.as_ref())?;
        Ok(AuthenticatedMessage::seal(
            identity.keypair(),
            identity.cid(),
            topic,
            content,
            challenge.nonce_hash,
            proof,
        ))
    }

    pub async fn publish_authenticated(
        &self,
        identity: &AgentIdentity,
        topic: &str,
        content: Vec<u8>,
        challenge: &NonceChallenge,
    ) -> Result<AuthenticatedMessage, PublishError> {
        let msg = self
            .seal(identity, topic, content, challenge)
            .map_err(PublishError::Refused)?;
        self.bus.publish(topic, msg.to_json()).await?;
        Ok(msg)
    }

    /// Issues a fresh challenge and publishes under it.
    pub async fn publish(
        &self,
        identity: &AgentIdentity,
        topic: &str,
        content: Vec<u8>,
    ) -> Result<AuthenticatedMessage, PublishError> {
        let challenge = self.issue_challenge().map_err(PublishError::Refused)?;
        self.publish_authenticated(identity, topic, content, &challenge)
            .await
    }

    /// Publishes raw bytes, bypassing sealing. For adversarial tests and
    /// the demo's tamper mode.
    pub async fn publish_raw(&self, topic: &str, bytes: Vec<u8>) -> Result<(), BusError> {
        self.bus.publish(topic, bytes).await
    }

    /// A verifier with its own consumer id, so it accepts each envelope
    /// once regardless of other receivers.
    pub fn receiver(&self) -> MessageVerifier {
        MessageVerifier {
            verifier: Verifier::with_consumer(self.ctx.clone(), self.ctx.challenges.new_consumer()),
        }
    }

    pub async fn subscribe_verified(&self, topic: &str) -> Result<VerifiedSubscription, BusError> {
        Ok(VerifiedSubscription {
            inner: self.bus.subscribe(topic).await?,
            verifier: self.receiver(),
            accepted: AtomicU64::new(0),
            rejected: AtomicU64::new(0),
        })
    }
}

pub struct MessageVerifier {
    verifier: Verifier,
}

impl MessageVerifier {
    pub fn verify_message(&self, msg: &AuthenticatedMessage) -> bool {
        self.verifier.record(self.check_message(msg))
    }

    /// Nonce, then ownership proof, then sender and signature. Returns the
    /// sender's document.
    pub fn check_message(&self, msg: &AuthenticatedMessage) -> Result<DidDocument, AuthFailure> {
        self.verifier.consume(&msg.nonce_hash)?;
        let document = self
            .verifier
            .check_after_nonce(&msg.did_cid, &msg.zkp_proof, &msg.nonce_hash)?;
        if msg.from_did != document.id {
            return Err(AuthFailure::DidMismatch);
        }
        if !document.public_key.verify(&msg.signed_bytes(), &msg.signature) {
            return Err(AuthFailure::SignatureInvalid);
        }
        Ok(document)
    }

    /// Parses and checks raw envelope bytes.
    pub fn check_bytes(&self, bytes: &[u8]) -> Result<(AuthenticatedMessage, DidDocument), AuthFailure> {
        let msg = AuthenticatedMessage::from_json(bytes)
            .map_err(|e| AuthFailure::Malformed(e.to_string()))?;
        let doc = self.check_message(&msg)?;
        Ok((msg, doc))
    }

    pub fn last_failure(&self) -> Option<AuthFailure> {
        self.verifier.last_failure()
    }
}

/// Yields only envelopes that pass verification; the rest are counted.
pub struct VerifiedSubscription {
    inner: Subscription,
    verifier: MessageVerifier,
    accepted: AtomicU64,
    rejected: AtomicU64,
}

impl VerifiedSubscription {
    pub async fn next(&mut self) -> Option<(AuthenticatedMessage, DidDocument)> {
        loop {
            let bytes = self.inner.recv().await?;
            if let Some(hit) = self.process(&bytes) {
                return Some(hit);
            }
        }
    }

    /// Waits for one delivery and reports its verdict.
    pub async fn next_outcome(
        &mut self,
    ) -> Option<Result<(AuthenticatedMessage, DidDocument), AuthFailure>> {
        let bytes = self.inner.recv().await?;
        Some(self.process(&bytes).ok_or_else(|| {
            self.last_failure()
                .unwrap_or(AuthFailure::Malformed("unknown".into()))
        }))
    }

    /// Drains whatever is already queued without waiting.
    pub fn drain_ready(&mut self) -> Vec<(AuthenticatedMessage, DidDocument)> {
        let mut out = Vec::new();
        while let Some(bytes) = self.inner.try_recv() {
            out.extend(self.process(&bytes));
        }
        out
    }

    fn process(&self, bytes: &[u8]) -> Option<(AuthenticatedMessage, DidDocument)> {
        let result = self.verifier.check_bytes(bytes);
        let ok = result.is_ok();
        let out = result.as_ref().ok().cloned();
        self.verifier.verifier.record(result);
        if ok {
            self.accepted.fetch_add(1, Ordering::Relaxed);
        } else {
            self.rejected.fetch_add(1, Ordering::Relaxed);
        }
        out
    }

    pub fn accepted(&self) -> u64 {
        self.accepted.load(Ordering::Relaxed)
    }

    pub fn rejected(&self) -> u64 {
        self.rejected.load(Ordering::Relaxed)
    }

    pub fn last_failure(&self) -> Option<AuthFailure> {
        self.verifier.last_failure()
    }
}
