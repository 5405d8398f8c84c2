// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;

use thiserror::Error;

/// Errors raised by the protocol core.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid key: expected 32 bytes, got {0}")]
    InvalidKey(usize),
    #[error("invalid salt: must not be empty")]
    InvalidSalt,
    #[error("invalid digest: expected 32 bytes, got {0}")]
    InvalidDigest(usize),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("invalid did:key: {0}")]
    InvalidDid(&'static str),
    #[error("invalid cid: {0}")]
    InvalidCid(&'static str),
    #[error("invalid ipns name")]
    InvalidIpnsName,
    #[error("invalid field element")]
    InvalidFieldElement,
    #[error("invalid signature encoding")]
    InvalidSignature,
    #[error("peer endpoint decryption failed")]
    DecryptionFailure,
    #[error("document invalid: {0}")]
    InvalidDocument(&'static str),
    #[error("malformed encoding: {0}")]
    Encoding(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Encoding(alloc::format!("{e}"))
    }
}
