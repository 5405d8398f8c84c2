// SPDX-License-Identifier: Apache-2.0

//! Agent identities: registration, updates and ownership proofs.

use diap_core::{
    compute_cid, derive_secret_fields, generate_proof, hash_pair, split_hash_to_fields,
    ConstraintViolation, Cid, DidDocument, DidKey, FieldPair, IpnsName, IpnsRecord, KeyPair,
    PeerId, Proof, ProofBackend, PublicInputs, Witness,
};
use rand::rngs::OsRng;
use rand::RngCore;
use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::nonce::RandomnessUnavailable;
use crate::store::{ContentStore, StoreError};

#[derive(Debug, Error)]
pub enum IdentityError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Core(#[from] diap_core::Error),
    #[error(transparent)]
    Randomness(#[from] RandomnessUnavailable),
    #[error("stored document does not belong to this keypair")]
    DocumentMismatch,
}

#[derive(Clone, Debug)]
pub struct AgentIdentity {
    keypair: KeyPair,
    did: DidKey,
    document: DidDocument,
    cid: Cid,
    ipns_name: IpnsName,
    peer_id: PeerId,
}

impl AgentIdentity {
    /// Fresh keypair and peer id, registered in `store`.
    pub fn create(store: &ContentStore) -> Result<Self, IdentityError> {
        let keypair = generate_keypair()?;
        let peer_id = PeerId::new(random_bytes::<32>()?.to_vec())?;
        Self::register(keypair, peer_id, store)
    }

    pub fn register(
        keypair: KeyPair,
        peer_id: PeerId,
        store: &ContentStore,
    ) -> Result<Self, IdentityError> {
        let (document, cid, _) = register_identity(&keypair, &peer_id, store)?;
        Ok(Self::from_parts(keypair, document, cid, peer_id))
    }

    /// Rebuilds an identity from its keypair and a previously registered
    /// cid, checking the stored document belongs to the keypair.
    pub fn load(
        keypair: KeyPair,
        peer_id: PeerId,
        cid: Cid,
        store: &ContentStore,
    ) -> Result<Self, IdentityError> {
        let document = DidDocument::from_json_bytes(&store.get(&cid)?)?;
        if document.public_key != keypair.public_key() {
            return Err(IdentityError::DocumentMismatch);
        }
        Ok(Self::from_parts(keypair, document, cid, peer_id))
    }

    /// Assembles an identity without any consistency check. Mismatched
    /// parts produce an identity that cannot prove ownership.
    pub fn from_parts(keypair: KeyPair, document: DidDocument, cid: Cid, peer_id: PeerId) -> Self {
        AgentIdentity {
            did: document.id.clone(),
            ipns_name: IpnsName::for_key(&keypair.public_key()),
            keypair,
            document,
            cid,
            peer_id,
        }
    }

    /// Publishes a new document (fresh endpoint ciphertext, optionally a
    /// new peer id) under the next sequence number.
    pub fn update(
        &self,
        peer_id: PeerId,
        store: &ContentStore,
    ) -> Result<(Self, IpnsRecord), IdentityError> {
        let last = store.ipns_record(&self.ipns_name)?.sequence;
        let (document, cid, record) = publish_document(
            &self.keypair,
            &peer_id,
            store,
            SystemClock.now(),
            last + 1,
        )?;
        Ok((
            Self::from_parts(self.keypair.clone(), document, cid, peer_id),
            record,
        ))
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn did(&self) -> &DidKey {
        &self.did
    }

    pub fn document(&self) -> &DidDocument {
        &self.document
    }

    pub fn cid(&self) -> Cid {
        self.cid
    }

    pub fn ipns_name(&self) -> &IpnsName {
        &self.ipns_name
    }

    pub fn peer_id(&self) -> &PeerId {
        &self.peer_id
    }

    pub fn prove_ownership(
        &self,
        challenge_nonce: &FieldPair,
        backend: &dyn ProofBackend,
    ) -> Result<Proof, ConstraintViolation> {
        prove_ownership(self, challenge_nonce, backend)
    }
}

pub fn generate_keypair() -> Result<KeyPair, RandomnessUnavailable> {
    Ok(KeyPair::from_seed(&random_bytes::<32>()?))
}

fn random_bytes<const N: usize>() -> Result<[u8; N], RandomnessUnavailable> {
    let mut b = [0u8; N];
    OsRng
        .try_fill_bytes(&mut b)
        .map_err(|e| RandomnessUnavailable(e.to_string()))?;
    Ok(b)
}

/// Builds the document, stores it and publishes the name at sequence 1.
pub fn register_identity(
    keypair: &KeyPair,
    peer_id: &PeerId,
    store: &ContentStore,
) -> Result<(DidDocument, Cid, IpnsRecord), IdentityError> {
    publish_document(keypair, peer_id, store, SystemClock.now(), 1)
}

/// Like [`register_identity`] with an explicit timestamp and sequence.
pub fn publish_document(
    keypair: &KeyPair,
    peer_id: &PeerId,
    store: &ContentStore,
    created_at: u64,
    sequence: u64,
) -> Result<(DidDocument, Cid, IpnsRecord), IdentityError> {
    let document = diap_core::build_document(keypair, peer_id, created_at, &mut OsRng)?;
    let cid = store.put(&document.to_canonical_bytes())?;
    let record = store.ipns_publish(keypair, cid, sequence)?;
    Ok((document, cid, record))
}

/// Proves the identity owns the document at its cid, bound to the nonce.
///
/// The witness document hash is taken from the document the identity
/// actually holds, so an identity carrying someone else's document fails
/// constraint 1 rather than proving a cid it cannot back.
pub fn prove_ownership(
    identity: &AgentIdentity,
    challenge_nonce: &FieldPair,
    backend: &dyn ProofBackend,
) -> Result<Proof, ConstraintViolation> {
    let held = compute_cid(&identity.document.to_canonical_bytes());
    let witness = Witness {
        secret_key: derive_secret_fields(identity.keypair.seed()).expect("seed is 32 bytes"),
        did_document_hash: split_hash_to_fields(held.digest()).expect("digest is 32 bytes"),
        nonce: *challenge_nonce,
    };
    let public = PublicInputs {
        expected_did_hash: split_hash_to_fields(identity.cid.digest()).expect("digest is 32 bytes"),
        public_key_hash: identity.document.zkp_public_key_hash,
        nonce_hash: hash_pair(challenge_nonce),
    };
    generate_proof(&public, &witness, backend)
}
