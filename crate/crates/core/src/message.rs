// SPDX-License-Identifier: Apache-2.0

//! Wire formats for the broadcast envelope and direct-channel RPC.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cid::Cid;
use crate::did_key::DidKey;
use crate::encoding::{base64_bytes, base64_signature};
use crate::error::Error;
use crate::field::FieldElement;
use crate::keys::{KeyPair, Signature};
use crate::proof::Proof;

/// Largest frame payload accepted on a direct channel.
pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;

/// Bytes covered by an envelope signature:
/// `u32 len ‖ topic ‖ u32 len ‖ content ‖ u32 len ‖ decimal(nonce_hash)`,
/// lengths big-endian.
pub fn sign_bytes(topic: &str, content: &[u8], nonce_hash: &FieldElement) -> Vec<u8> {
    let nonce = nonce_hash.to_decimal();
    let mut buf = Vec::with_capacity(12 + topic.len() + content.len() + nonce.len());
    for part in [topic.as_bytes(), content, nonce.as_bytes()] {
        buf.extend_from_slice(&(part.len() as u32).to_be_bytes());
        buf.extend_from_slice(part);
    }
    buf
}

/// Broadcast envelope binding a payload to the sender's identity proof.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AuthenticatedMessage {
    pub from_did: DidKey,
    pub did_cid: Cid,
    pub nonce_hash: FieldElement,
    pub zkp_proof: Proof,
    pub topic: String,
    #[serde(with = "base64_bytes")]
    pub content: Vec<u8>,
    #[serde(with = "base64_signature")]
    pub signature: Signature,
}

impl AuthenticatedMessage {
    /// Signs `content` for `topic` and assembles the envelope.
    pub fn seal(
        keypair: &KeyPair,
        did_cid: Cid,
        topic: &str,
        content: Vec<u8>,
        nonce_hash: FieldElement,
        zkp_proof: Proof,
    ) -> Self {
        let signature = keypair.sign(&sign_bytes(topic, &content, &nonce_hash));
        AuthenticatedMessage {
            from_did: keypair.did(),
            did_cid,
            nonce_hash,
            zkp_proof,
            topic: topic.into(),
            content,
            signature,
        }
    }

    pub fn signed_bytes(&self) -> Vec<u8> {
        sign_bytes(&self.topic, &self.content, &self.nonce_hash)
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::canonical::to_vec(self).expect("envelope serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, Error> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RpcKind {
    Request,
    Response,
}

/// One request or response on a direct channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpcEnvelope {
    pub kind: RpcKind,
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(with = "base64_bytes")]
    pub payload: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RpcEnvelope {
    pub fn request(id: u64, method: &str, payload: Vec<u8>) -> Self {
        RpcEnvelope {
            kind: RpcKind::Request,
            id,
            method: Some(method.into()),
            payload,
            error: None,
        }
    }

    pub fn response(id: u64, result: Result<Vec<u8>, String>) -> Self {
        let (payload, error) = match result {
            Ok(p) => (p, None),
            Err(e) => (Vec::new(), Some(e)),
        };
        RpcEnvelope {
            kind: RpcKind::Response,
            id,
            method: None,
            payload,
            error,
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::canonical::to_vec(self).expect("rpc envelope serializes")
    }

    /// Parses and checks that fields match the kind: requests carry a
    /// method and no error, responses carry no method.
    pub fn from_json(bytes: &[u8]) -> Result<Self, Error> {
        let env: RpcEnvelope = serde_json::from_slice(bytes)?;
        match env.kind {
            RpcKind::Request if env.method.is_none() || env.error.is_some() => {
                Err(Error::Encoding("malformed request".into()))
            }
            RpcKind::Response if env.method.is_some() => {
                Err(Error::Encoding("malformed response".into()))
            }
            _ => Ok(env),
        }
    }
}

/// Prefixes `payload` with its u32 big-endian length.
pub fn encode_frame(payload: &[u8]) -> Result<Vec<u8>, Error> {
    if payload.len() > MAX_FRAME_LEN {
        return Err(Error::InvalidInput("frame exceeds 16 MiB"));
    }
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_bytes_layout() {
        let b = sign_bytes("t", b"", &FieldElement::ZERO);
        assert_eq!(hex::encode(b), concat!("00000001", "74", "00000000", "00000001", "30"));
    }

    #[test]
    fn sign_bytes_is_injective_across_boundaries() {
        let z = FieldElement::from_u64(9);
        assert_ne!(sign_bytes("ab", b"c", &z), sign_bytes("a", b"bc", &z));
        assert_eq!(sign_bytes("ab", b"c", &z), sign_bytes("ab", b"c", &z));
    }

    #[test]
    fn rpc_json_layout() {
        let req = RpcEnvelope::request(3, "ping", b"hi".to_vec());
        assert_eq!(
            String::from_utf8(req.to_json()).unwrap(),
            r#"{"id":3,"kind":"request","method":"ping","payload":"aGk="}"#
        );
        let resp = RpcEnvelope::response(3, Err("boom".into()));
        assert_eq!(
            String::from_utf8(resp.to_json()).unwrap(),
            r#"{"error":"boom","id":3,"kind":"response","payload":""}"#
        );
        assert_eq!(RpcEnvelope::from_json(&req.to_json()).unwrap(), req);
        assert!(RpcEnvelope::from_json(br#"{"id":1,"kind":"request","payload":""}"#).is_err());
        assert!(RpcEnvelope::from_json(br#"{"id":1,"kind":"response","method":"x","payload":""}"#).is_err());
    }

    #[test]
    fn frame_header() {
        assert_eq!(encode_frame(b"abc").unwrap(), b"\x00\x00\x00\x03abc");
        assert!(encode_frame(&alloc::vec![0u8; MAX_FRAME_LEN + 1]).is_err());
    }
}
