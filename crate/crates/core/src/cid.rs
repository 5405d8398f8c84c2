// SPDX-License-Identifier: Apache-2.0

//! CIDv1 content identifiers: raw codec, SHA-256 multihash, base32-lower
//! multibase text form.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::Error;

pub const CID_VERSION: u8 = 1;
pub const RAW_CODEC: u8 = 0x55;
pub const SHA2_256: u8 = 0x12;
pub const DIGEST_LEN: u8 = 32;

/// Length of the binary form: version, codec, hash code, digest length, digest.
pub const CID_BYTES_LEN: usize = 36;

const BASE32_LOWER: char = 'b';

/// Content identifier. The version, codec and hash algorithm are fixed, so
/// only the digest varies.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cid {
    digest: [u8; 32],
}

impl Cid {
    pub fn compute(content: &[u8]) -> Self {
        Cid {
            digest: Sha256::digest(content).into(),
        }
    }

    pub fn from_digest(digest: [u8; 32]) -> Self {
        Cid { digest }
    }

    pub fn version(&self) -> u8 {
        CID_VERSION
    }

    pub fn codec(&self) -> u8 {
        RAW_CODEC
    }

    pub fn hash_algo(&self) -> u8 {
        SHA2_256
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    pub fn to_bytes(&self) -> [u8; CID_BYTES_LEN] {
        let mut out = [0u8; CID_BYTES_LEN];
        out[..4].copy_from_slice(&[CID_VERSION, RAW_CODEC, SHA2_256, DIGEST_LEN]);
        out[4..].copy_from_slice(&self.digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Error> {
        if bytes.len() != CID_BYTES_LEN {
            return Err(Error::InvalidCid("wrong length"));
        }
        match bytes[..4] {
            [CID_VERSION, RAW_CODEC, SHA2_256, DIGEST_LEN] => {}
            [v, ..] if v != CID_VERSION => return Err(Error::InvalidCid("unsupported version")),
            [_, c, ..] if c != RAW_CODEC => return Err(Error::InvalidCid("unsupported codec")),
            _ => return Err(Error::InvalidCid("unsupported multihash")),
        }
        let mut digest = [0u8; 32];
        digest.copy_from_slice(&bytes[4..]);
        Ok(Cid { digest })
    }

    /// Multibase base32-lower text, `b…`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(59);
        out.push(BASE32_LOWER);
        let body = data_encoding::BASE32_NOPAD.encode(&self.to_bytes());
        out.push_str(&body.to_ascii_lowercase());
        out
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let body = text
            .strip_prefix(BASE32_LOWER)
            .ok_or(Error::InvalidCid("expected base32-lower multibase"))?;
        if body.bytes().any(|c| c.is_ascii_uppercase()) {
            return Err(Error::InvalidCid("uppercase in base32-lower"));
        }
        let raw = data_encoding::BASE32_NOPAD
            .decode(body.to_ascii_uppercase().as_bytes())
            .map_err(|_| Error::InvalidCid("bad base32"))?;
        Self::from_bytes(&raw)
    }

    /// Checks that `content` hashes to this identifier.
    pub fn matches(&self, content: &[u8]) -> bool {
        Self::compute(content) == *self
    }
}

/// Computes the identifier of `content`.
pub fn compute_cid(content: &[u8]) -> Cid {
    Cid::compute(content)
}

impl fmt::Display for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl fmt::Debug for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cid({})", self.to_text())
    }
}

impl FromStr for Cid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::parse(s)
    }
}

impl Serialize for Cid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for Cid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}
