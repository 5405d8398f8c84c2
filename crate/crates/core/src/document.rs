// SPDX-License-Identifier: Apache-2.0

//! DID documents and the self-encrypted peer endpoint.
//!
//! The endpoint is the agent's network address token sealed with
//! AES-256-GCM under `SHA-256(seed ‖ "DIAP_AES_KEY_V3")`, plus an ed25519
//! signature over `ciphertext ‖ nonce`. Anyone holding the document can check
//! the signature; only the key owner can open the ciphertext.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use rand_core::CryptoRngCore;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::circuit::{derive_secret_fields, hash_pair};
use crate::did_key::DidKey;
use crate::encoding::{base64_array, base64_bytes, base64_signature};
use crate::error::Error;
use crate::field::FieldElement;
use crate::keys::{KeyPair, PublicKey, Signature, PEER_ENDPOINT_SALT};

pub const AEAD_NONCE_LEN: usize = 12;

/// An agent's network-layer address token. Opaque outside messaging.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeerId(Vec<u8>);

impl PeerId {
    pub fn new(bytes: Vec<u8>) -> Result<Self, Error> {
        if bytes.is_empty() {
            return Err(Error::InvalidInput("peer id must not be empty"));
        }
        Ok(PeerId(bytes))
    }

    pub fn random<R: CryptoRngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = alloc::vec![0u8; 32];
        rng.fill_bytes(&mut bytes);
        PeerId(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeerId({})", self.to_hex())
    }
}

/// The sealed peer endpoint stored as a document's `serviceEndpoint`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncryptedPeerEndpoint {
    #[serde(with = "base64_bytes")]
    pub ciphertext: Vec<u8>,
    #[serde(rename = "nonce", with = "base64_array")]
    pub aead_nonce: [u8; AEAD_NONCE_LEN],
    #[serde(with = "base64_signature")]
    pub signature: Signature,
}

impl EncryptedPeerEndpoint {
    /// `ciphertext ‖ aead_nonce`, the bytes covered by the signature.
    pub fn signed_bytes(&self) -> Vec<u8> {
        endpoint_signed_bytes(&self.ciphertext, &self.aead_nonce)
    }
}

fn endpoint_signed_bytes(ciphertext: &[u8], nonce: &[u8; AEAD_NONCE_LEN]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(ciphertext.len() + AEAD_NONCE_LEN);
    buf.extend_from_slice(ciphertext);
    buf.extend_from_slice(nonce);
    buf
}

fn endpoint_cipher(keypair: &KeyPair) -> Aes256Gcm {
    let key = keypair
        .derive_symmetric_key(PEER_ENDPOINT_SALT)
        .expect("salt is non-empty");
    Aes256Gcm::new((&*key).into())
}

pub fn encrypt_peer_id<R: CryptoRngCore + ?Sized>(
    keypair: &KeyPair,
    peer_id: &PeerId,
    rng: &mut R,
) -> Result<EncryptedPeerEndpoint, Error> {
    if peer_id.0.is_empty() {
        return Err(Error::InvalidInput("peer id must not be empty"));
    }
    let mut aead_nonce = [0u8; AEAD_NONCE_LEN];
    rng.fill_bytes(&mut aead_nonce);
    let ciphertext = endpoint_cipher(keypair)
        .encrypt(Nonce::from_slice(&aead_nonce), peer_id.as_bytes())
        .map_err(|_| Error::InvalidInput("peer id too large to encrypt"))?;
    let signature = keypair.sign(&endpoint_signed_bytes(&ciphertext, &aead_nonce));
    Ok(EncryptedPeerEndpoint {
        ciphertext,
        aead_nonce,
        signature,
    })
}

pub fn decrypt_peer_id(keypair: &KeyPair, endpoint: &EncryptedPeerEndpoint) -> Result<PeerId, Error> {
    let plain = endpoint_cipher(keypair)
        .decrypt(Nonce::from_slice(&endpoint.aead_nonce), endpoint.ciphertext.as_slice())
        .map_err(|_| Error::DecryptionFailure)?;
    PeerId::new(plain).map_err(|_| Error::DecryptionFailure)
}

pub fn verify_endpoint_signature(public_key: &[u8], endpoint: &EncryptedPeerEndpoint) -> bool {
    crate::keys::verify_signature(public_key, &endpoint.signed_bytes(), &endpoint.signature)
}

/// An agent's identity document. Its CID is the agent's identity.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "DocumentJson", into = "DocumentJson")]
pub struct DidDocument {
    pub id: DidKey,
    pub public_key: PublicKey,
    pub zkp_public_key_hash: FieldElement,
    pub service_endpoint: EncryptedPeerEndpoint,
    pub created_at: u64,
}

impl DidDocument {
    /// Assembles a document around an existing endpoint. `build_document`
    /// is the normal entry point; this exists for fixed-endpoint fixtures.
    pub fn from_parts(keypair: &KeyPair, service_endpoint: EncryptedPeerEndpoint, created_at: u64) -> Self {
        let public_key = keypair.public_key();
        let secret = derive_secret_fields(keypair.seed()).expect("seed is 32 bytes");
        DidDocument {
            id: DidKey::from_public_key(&public_key),
            public_key,
            zkp_public_key_hash: hash_pair(&secret),
            service_endpoint,
            created_at,
        }
    }

    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        canonical::to_vec(self).expect("document serializes")
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, Error> {
        let raw: DocumentJson = serde_json::from_slice(bytes)?;
        raw.try_into()
    }
}

pub fn build_document<R: CryptoRngCore + ?Sized>(
    keypair: &KeyPair,
    peer_id: &PeerId,
    created_at: u64,
    rng: &mut R,
) -> Result<DidDocument, Error> {
    let endpoint = encrypt_peer_id(keypair, peer_id, rng)?;
    Ok(DidDocument::from_parts(keypair, endpoint, created_at))
}

pub fn canonical_serialize(doc: &DidDocument) -> Vec<u8> {
    doc.to_canonical_bytes()
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DocumentJson {
    id: DidKey,
    public_key: String,
    zkp_public_key_hash: FieldElement,
    service_endpoint: EncryptedPeerEndpoint,
    created_at: u64,
}

impl TryFrom<DocumentJson> for DidDocument {
    type Error = Error;

    fn try_from(d: DocumentJson) -> Result<Self, Error> {
        let raw = bs58::decode(&d.public_key)
            .into_vec()
            .map_err(|_| Error::InvalidDocument("publicKey is not base58"))?;
        let public_key =
            PublicKey::from_slice(&raw).map_err(|_| Error::InvalidDocument("publicKey length"))?;
        if d.id.public_key() != public_key {
            return Err(Error::InvalidDocument("id does not match publicKey"));
        }
        Ok(DidDocument {
            id: d.id,
            public_key,
            zkp_public_key_hash: d.zkp_public_key_hash,
            service_endpoint: d.service_endpoint,
            created_at: d.created_at,
        })
    }
}

impl From<DidDocument> for DocumentJson {
    fn from(d: DidDocument) -> Self {
        DocumentJson {
            id: d.id,
            public_key: bs58::encode(d.public_key.as_bytes()).into_string(),
            zkp_public_key_hash: d.zkp_public_key_hash,
            service_endpoint: d.service_endpoint,
            created_at: d.created_at,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::OsRng;

    fn agent() -> (KeyPair, PeerId) {
        (KeyPair::generate(&mut OsRng), PeerId::random(&mut OsRng))
    }

    #[test]
    fn endpoint_round_trip_and_freshness() {
        let (kp, pid) = agent();
        let a = encrypt_peer_id(&kp, &pid, &mut OsRng).unwrap();
        let b = encrypt_peer_id(&kp, &pid, &mut OsRng).unwrap();
        assert_ne!(a.ciphertext, b.ciphertext);
        assert_eq!(decrypt_peer_id(&kp, &a).unwrap(), pid);
        assert_eq!(decrypt_peer_id(&kp, &b).unwrap(), pid);
        assert!(verify_endpoint_signature(kp.public_key().as_bytes(), &a));
    }

    #[test]
    fn endpoint_rejects_strangers_and_tampering() {
        let (kp, pid) = agent();
        let other = KeyPair::generate(&mut OsRng);
        let ep = encrypt_peer_id(&kp, &pid, &mut OsRng).unwrap();
        assert_eq!(decrypt_peer_id(&other, &ep).unwrap_err(), Error::DecryptionFailure);
        assert!(!verify_endpoint_signature(other.public_key().as_bytes(), &ep));

        let mut flipped = ep.clone();
        flipped.ciphertext[0] ^= 1;
        assert_eq!(decrypt_peer_id(&kp, &flipped).unwrap_err(), Error::DecryptionFailure);
        assert!(!verify_endpoint_signature(kp.public_key().as_bytes(), &flipped));

        let mut renonced = ep;
        renonced.aead_nonce[3] ^= 0x80;
        assert!(!verify_endpoint_signature(kp.public_key().as_bytes(), &renonced));
    }

    #[test]
    fn empty_peer_id_is_invalid() {
        assert!(PeerId::new(Vec::new()).is_err());
    }

    #[test]
    fn document_construction() {
        let (kp, pid) = agent();
        let doc = build_document(&kp, &pid, 1_700_000_000, &mut OsRng).unwrap();
        assert_eq!(doc.id, kp.did());
        assert_eq!(
            doc.zkp_public_key_hash,
            hash_pair(&derive_secret_fields(kp.seed()).unwrap())
        );
        let again = build_document(&kp, &pid, 1_700_000_000, &mut OsRng).unwrap();
        assert_ne!(doc.service_endpoint, again.service_endpoint);
        let mut same_endpoint = again.clone();
        same_endpoint.service_endpoint = doc.service_endpoint.clone();
        assert_eq!(same_endpoint, doc);
    }

    #[test]
    fn canonical_form_is_a_fixpoint() {
        let (kp, pid) = agent();
        let doc = build_document(&kp, &pid, 42, &mut OsRng).unwrap();
        let bytes = canonical_serialize(&doc);
        assert_eq!(bytes, canonical_serialize(&doc));
        let parsed = DidDocument::from_json_bytes(&bytes).unwrap();
        assert_eq!(parsed, doc);
        assert_eq!(canonical_serialize(&parsed), bytes);

        let text = core::str::from_utf8(&bytes).unwrap();
        assert!(text.starts_with(r#"{"createdAt":42,"id":"did:key:z6Mk"#));
        assert!(text.contains(r#""serviceEndpoint":{"ciphertext":""#));
        assert!(!text.contains(' '));
    }

    #[test]
    fn field_order_in_input_does_not_matter() {
        let (kp, pid) = agent();
        let doc = build_document(&kp, &pid, 42, &mut OsRng).unwrap();
        let v = serde_json::to_value(&doc).unwrap();
        let obj = v.as_object().unwrap();
        let mut reordered = String::from("{");
        for (i, key) in ["serviceEndpoint", "createdAt", "zkpPublicKeyHash", "publicKey", "id"]
            .iter()
            .enumerate()
        {
            if i > 0 {
                reordered.push(',');
            }
            reordered.push_str(&alloc::format!("\"{key}\": {}", obj[*key]));
        }
        reordered.push('}');
        let parsed = DidDocument::from_json_bytes(reordered.as_bytes()).unwrap();
        assert_eq!(canonical_serialize(&parsed), canonical_serialize(&doc));
    }

    #[test]
    fn parse_rejects_mismatched_id() {
        let (kp, pid) = agent();
        let other = KeyPair::generate(&mut OsRng);
        let mut doc = build_document(&kp, &pid, 1, &mut OsRng).unwrap();
        doc.id = other.did();
        let bytes = canonical::to_vec(&doc).unwrap();
        assert_eq!(
            DidDocument::from_json_bytes(&bytes).unwrap_err(),
            Error::InvalidDocument("id does not match publicKey")
        );
    }
}
