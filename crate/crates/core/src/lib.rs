// SPDX-License-Identifier: Apache-2.0

//! Protocol core for DIAP agents.
//!
//! Everything here is pure computation over bytes and field elements and
//! builds under `no_std` with `alloc`. Randomness is always supplied by the
//! caller. Storage, transports, clocks and the command line live in the
//! `diap` crate.
//!
//! - [`keys`] and [`did_key`]: ed25519 keys, signatures, `did:key` strings
//! - [`cid`]: CIDv1 identifiers over raw bytes
//! - [`document`]: DID documents and the self-encrypted peer endpoint
//! - [`field`], [`circuit`], [`proof`], [`challenge`]: the ownership circuit
//!   over the BN254 scalar field, its proofs and nonce challenges
//! - [`ipns`]: signed name records
//! - [`message`]: the broadcast envelope and RPC envelope wire formats
//! - [`canonical`]: canonical JSON
#![no_std]

extern crate alloc;

pub mod canonical;
pub mod challenge;
pub mod cid;
pub mod circuit;
pub mod did_key;
pub mod document;
mod encoding;
pub mod error;
pub mod field;
pub mod ipns;
pub mod keys;
pub mod message;
pub mod proof;

pub use crate::challenge::NonceChallenge;
pub use crate::cid::{compute_cid, Cid};
pub use crate::circuit::{
    derive_secret_fields, evaluate_circuit, hash_pair, split_hash_to_fields, ConstraintViolation,
    FieldPair, PublicInputs, Witness,
};
pub use crate::did_key::{derive_did_key, DidKey};
pub use crate::document::{
    build_document, canonical_serialize, decrypt_peer_id, encrypt_peer_id,
    verify_endpoint_signature, DidDocument, EncryptedPeerEndpoint, PeerId,
};
pub use crate::error::Error;
pub use crate::field::FieldElement;
pub use crate::ipns::{IpnsName, IpnsRecord};
pub use crate::keys::{verify_signature, KeyPair, PublicKey, Signature};
pub use crate::message::{sign_bytes, AuthenticatedMessage, RpcEnvelope, RpcKind};
pub use crate::proof::{
    generate_proof, verify_proof, EmbeddedBackend, Proof, ProofBackend, ProofRejection,
};
