// SPDX-License-Identifier: Apache-2.0

//! Ownership verification and the mutual-authentication handshake.
//!
//! A [`Verifier`] holds nothing about remote agents between calls. It
//! issues challenges into the shared table and checks proofs against the
//! content store; the last failure reason is kept only for diagnostics.

use std::fmt;
use std::sync::Mutex;

use diap_core::proof::check_proof;
use diap_core::{
    split_hash_to_fields, Cid, ConstraintViolation, DidDocument, FieldElement, NonceChallenge,
    Proof, ProofBackend, ProofRejection, PublicInputs,
};

use crate::context::{Context, ResolveError};
use crate::identity::AgentIdentity;
use crate::nonce::{ConsumerId, NonceRejection};

/// Why a verification returned false.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AuthFailure {
    Nonce(NonceRejection),
    NonceMismatch,
    DidHashMismatch,
    PublicKeyHashMismatch,
    NotFound,
    IntegrityViolation,
    ParseError,
    StoreError(String),
    Proof(ProofRejection),
    ConstraintViolation(u8),
    DidMismatch,
    SignatureInvalid,
    RandomnessUnavailable,
    Malformed(String),
}

impl AuthFailure {
    /// Stable, machine-readable reason code.
    pub fn code(&self) -> String {
        match self {
            AuthFailure::Nonce(r) => r.to_string(),
            AuthFailure::NonceMismatch => "nonce-mismatch".into(),
            AuthFailure::DidHashMismatch => "did-hash-mismatch".into(),
            AuthFailure::PublicKeyHashMismatch => "public-key-hash-mismatch".into(),
            AuthFailure::NotFound => "not-found".into(),
            AuthFailure::IntegrityViolation => "integrity-violation".into(),
            AuthFailure::ParseError => "parse-error".into(),
            AuthFailure::StoreError(_) => "store-error".into(),
            AuthFailure::Proof(r) => match r {
                ProofRejection::PublicInputsMismatch => "public-inputs-mismatch".into(),
                ProofRejection::TagMismatch => "tag-mismatch".into(),
                ProofRejection::BackendMismatch => "backend-mismatch".into(),
                ProofRejection::BackendRejected => "backend-rejected".into(),
            },
            AuthFailure::ConstraintViolation(i) => format!("constraint-violation {i}"),
            AuthFailure::DidMismatch => "did-mismatch".into(),
            AuthFailure::SignatureInvalid => "signature-invalid".into(),
            AuthFailure::RandomnessUnavailable => "randomness-unavailable".into(),
            AuthFailure::Malformed(_) => "malformed".into(),
        }
    }
}

impl fmt::Display for AuthFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuthFailure::StoreError(e) | AuthFailure::Malformed(e) => {
                write!(f, "{}: {e}", self.code())
            }
            _ => f.write_str(&self.code()),
        }
    }
}

impl std::error::Error for AuthFailure {}

impl From<ResolveError> for AuthFailure {
    fn from(e: ResolveError) -> Self {
        match e {
            ResolveError::NotFound => AuthFailure::NotFound,
            ResolveError::IntegrityViolation => AuthFailure::IntegrityViolation,
            ResolveError::Parse(_) => AuthFailure::ParseError,
            ResolveError::Store(e) => AuthFailure::StoreError(e.to_string()),
        }
    }
}

impl From<ConstraintViolation> for AuthFailure {
    fn from(v: ConstraintViolation) -> Self {
        AuthFailure::ConstraintViolation(v.index)
    }
}

pub struct Verifier {
    ctx: Context,
    consumer: ConsumerId,
    last_failure: Mutex<Option<AuthFailure>>,
}

impl Verifier {
    pub fn new(ctx: Context) -> Self {
        Self::with_consumer(ctx, ConsumerId::DEFAULT)
    }

    /// A verifier that consumes broadcast challenges under its own id.
    pub fn with_consumer(ctx: Context, consumer: ConsumerId) -> Self {
        Verifier {
            ctx,
            consumer,
            last_failure: Mutex::new(None),
        }
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn issue_challenge(&self) -> Result<NonceChallenge, AuthFailure> {
        self.ctx
            .challenges
            .issue(self.ctx.now())
            .map_err(|_| AuthFailure::RandomnessUnavailable)
    }

    /// True iff the nonce is fresh, the proof names `remote_cid`, carries
    /// the key hash of the document stored there, answers `challenge`, and
    /// passes the backend.
    pub fn verify_ownership(&self, remote_cid: &Cid, proof: &Proof, challenge: &NonceChallenge) -> bool {
        self.record(self.check_ownership(remote_cid, proof, challenge))
    }

    /// [`verify_ownership`](Self::verify_ownership) with the reason.
    pub fn check_ownership(
        &self,
        remote_cid: &Cid,
        proof: &Proof,
        challenge: &NonceChallenge,
    ) -> Result<(), AuthFailure> {
        self.consume(&challenge.nonce_hash)?;
        self.check_after_nonce(remote_cid, proof, &challenge.nonce_hash)
            .map(drop)
    }

    pub(crate) fn consume(&self, nonce_hash: &FieldElement) -> Result<(), AuthFailure> {
        self.ctx
            .challenges
            .try_consume(nonce_hash, self.consumer, self.ctx.now())
            .map_err(AuthFailure::Nonce)
    }

    /// Everything after the nonce check; returns the resolved document.
    pub(crate) fn check_after_nonce(
        &self,
        remote_cid: &Cid,
        proof: &Proof,
        nonce_hash: &FieldElement,
    ) -> Result<DidDocument, AuthFailure> {
        let expected_did_hash = split_hash_to_fields(remote_cid.digest()).expect("32-byte digest");
        if proof.public_inputs.expected_did_hash != expected_did_hash {
            return Err(AuthFailure::DidHashMismatch);
        }
        let document = self.ctx.resolve_document(remote_cid)?;
        if proof.public_inputs.public_key_hash != document.zkp_public_key_hash {
            return Err(AuthFailure::PublicKeyHashMismatch);
        }
        if proof.public_inputs.nonce_hash != *nonce_hash {
            return Err(AuthFailure::NonceMismatch);
        }
        let expected = PublicInputs {
            expected_did_hash,
            public_key_hash: document.zkp_public_key_hash,
            nonce_hash: *nonce_hash,
        };
        check_proof(proof, &expected, self.ctx.backend.as_ref()).map_err(AuthFailure::Proof)?;
        Ok(document)
    }

    pub(crate) fn record<T>(&self, result: Result<T, AuthFailure>) -> bool {
        let mut last = self.last_failure.lock().unwrap();
        match result {
            Ok(_) => {
                *last = None;
                true
            }
            Err(e) => {
                *last = Some(e);
                false
            }
        }
    }

    /// Reason for the most recent false result, cleared by a success.
    pub fn last_failure(&self) -> Option<AuthFailure> {
        self.last_failure.lock().unwrap().clone()
    }
}

/// The proving side of a handshake.
pub trait Prover {
    fn cid(&self) -> Cid;
    fn respond(
        &self,
        challenge: &NonceChallenge,
        backend: &dyn ProofBackend,
    ) -> Result<Proof, ConstraintViolation>;
}

impl Prover for AgentIdentity {
    fn cid(&self) -> Cid {
        AgentIdentity::cid(self)
    }

    fn respond(
        &self,
        challenge: &NonceChallenge,
        backend: &dyn ProofBackend,
    ) -> Result<Proof, ConstraintViolation> {
        self.prove_ownership(&challenge.nonce, backend)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionState {
    Init,
    ChallengeSent,
    Verified,
    Failed,
}

/// One direction of a handshake, from the verifier's side.
pub struct AuthSession<'a> {
    verifier: &'a Verifier,
    remote_cid: Cid,
    challenge: Option<NonceChallenge>,
    state: SessionState,
    failure: Option<AuthFailure>,
}

impl<'a> AuthSession<'a> {
    pub fn new(verifier: &'a Verifier, remote_cid: Cid) -> Self {
        AuthSession {
            verifier,
            remote_cid,
            challenge: None,
            state: SessionState::Init,
            failure: None,
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn remote_cid(&self) -> Cid {
        self.remote_cid
    }

    pub fn challenge(&self) -> Option<&NonceChallenge> {
        self.challenge.as_ref()
    }

    pub fn failure(&self) -> Option<&AuthFailure> {
        self.failure.as_ref()
    }

    /// Init → ChallengeSent. Returns the challenge to send to the prover.
    pub fn send_challenge(&mut self) -> Result<NonceChallenge, AuthFailure> {
        assert_eq!(self.state, SessionState::Init, "challenge already sent");
        match self.verifier.issue_challenge() {
            Ok(c) => {
                self.challenge = Some(c);
                self.state = SessionState::ChallengeSent;
                Ok(c)
            }
            Err(e) => Err(self.fail(e)),
        }
    }

    /// ChallengeSent → Verified or Failed.
    pub fn receive_proof(&mut self, proof: &Proof) -> bool {
        assert_eq!(self.state, SessionState::ChallengeSent, "no challenge outstanding");
        let challenge = self.challenge.expect("set with state");
        match self.verifier.check_ownership(&self.remote_cid, proof, &challenge) {
            Ok(()) => {
                self.verifier.record(Ok::<_, AuthFailure>(()));
                self.state = SessionState::Verified;
                true
            }
            Err(e) => {
                self.verifier.record::<()>(Err(e.clone()));
                self.fail(e);
                false
            }
        }
    }

    /// The prover refused to answer.
    pub fn abort(&mut self, reason: AuthFailure) {
        self.fail(reason);
    }

    fn fail(&mut self, reason: AuthFailure) -> AuthFailure {
        self.state = SessionState::Failed;
        self.failure = Some(reason.clone());
        reason
    }
}

/// Runs one full challenge-response: `verifier` checks `prover`.
pub fn authenticate(verifier: &Verifier, prover: &dyn Prover) -> Result<(), AuthFailure> {
    let mut session = AuthSession::new(verifier, prover.cid());
    let challenge = session.send_challenge()?;
    match prover.respond(&challenge, verifier.context().backend.as_ref()) {
        Ok(proof) => {
            if session.receive_proof(&proof) {
                Ok(())
            } else {
                Err(session.failure().cloned().expect("failed session has a reason"))
            }
        }
        Err(v) => {
            session.abort(v.into());
            Err(v.into())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `a` challenged `b` and `b` failed.
    AVerifiesB,
    /// `b` challenged `a` and `a` failed.
    BVerifiesA,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MutualFailure {
    pub direction: Direction,
    pub reason: AuthFailure,
}

impl fmt::Display for MutualFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stage = match self.direction {
            Direction::AVerifiesB => "a-verifies-b",
            Direction::BVerifiesA => "b-verifies-a",
        };
        write!(f, "{stage}: {}", self.reason)
    }
}

/// `a` verifies `b`, then `b` verifies `a`. Stops at the first failure.
pub fn mutual_authenticate_report(
    a: &dyn Prover,
    b: &dyn Prover,
    ctx: &Context,
) -> Result<(), MutualFailure> {
    let verifier_a = Verifier::new(ctx.clone());
    authenticate(&verifier_a, b).map_err(|reason| MutualFailure {
        direction: Direction::AVerifiesB,
        reason,
    })?;
    let verifier_b = Verifier::new(ctx.clone());
    authenticate(&verifier_b, a).map_err(|reason| MutualFailure {
        direction: Direction::BVerifiesA,
        reason,
    })
}

/// True iff both directions verify.
pub fn mutual_authenticate(a: &AgentIdentity, b: &AgentIdentity, ctx: &Context) -> bool {
    mutual_authenticate_report(a, b, ctx).is_ok()
}
