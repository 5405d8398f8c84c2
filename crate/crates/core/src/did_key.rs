// SPDX-License-Identifier: Apache-2.0

//! `did:key` identifiers for ed25519 public keys.
//!
//! `did:key:` + `z` (base58btc multibase) + base58(`0xed 0x01` ‖ public key).

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::keys::PublicKey;

pub const DID_KEY_PREFIX: &str = "did:key:";

/// Unsigned-varint encoding of the ed25519-pub multicodec (0xed).
pub const ED25519_MULTICODEC: [u8; 2] = [0xed, 0x01];

const BASE58BTC: char = 'z';

/// A `did:key` string for an ed25519 key. Always well-formed.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DidKey {
    text: String,
    key: PublicKey,
}

impl DidKey {
    pub fn from_public_key(key: &PublicKey) -> Self {
        DidKey {
            text: alloc::format!("{DID_KEY_PREFIX}{}", encode_multibase_key(key)),
            key: *key,
        }
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let payload = text
            .strip_prefix(DID_KEY_PREFIX)
            .ok_or(Error::InvalidDid("missing did:key: prefix"))?;
        let key = decode_multibase_key(payload)?;
        // Reject alternative spellings of the same key.
        let did = Self::from_public_key(&key);
        if did.text != text {
            return Err(Error::InvalidDid("non-canonical encoding"));
        }
        Ok(did)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// The multibase part after `did:key:`, e.g. `z6Mk…`.
    pub fn multibase(&self) -> &str {
        &self.text[DID_KEY_PREFIX.len()..]
    }

    pub fn public_key(&self) -> PublicKey {
        self.key
    }
}

/// Derives the `did:key` for a raw 32-byte public key.
pub fn derive_did_key(public_key: &[u8]) -> Result<DidKey, Error> {
    Ok(DidKey::from_public_key(&PublicKey::from_slice(public_key)?))
}

pub(crate) fn encode_multibase_key(key: &PublicKey) -> String {
    let mut buf = Vec::with_capacity(34);
    buf.extend_from_slice(&ED25519_MULTICODEC);
    buf.extend_from_slice(key.as_bytes());
    let mut out = String::with_capacity(49);
    out.push(BASE58BTC);
    out.push_str(&bs58::encode(buf).into_string());
    out
}

pub(crate) fn decode_multibase_key(payload: &str) -> Result<PublicKey, Error> {
    let body = payload
        .strip_prefix(BASE58BTC)
        .ok_or(Error::InvalidDid("expected base58btc multibase"))?;
    let raw = bs58::decode(body)
        .into_vec()
        .map_err(|_| Error::InvalidDid("bad base58"))?;
    let key = raw
        .strip_prefix(&ED25519_MULTICODEC[..])
        .ok_or(Error::InvalidDid("not an ed25519 multicodec key"))?;
    PublicKey::from_slice(key).map_err(|_| Error::InvalidDid("wrong key length"))
}

impl fmt::Display for DidKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl fmt::Debug for DidKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DidKey({})", self.text)
    }
}

impl FromStr for DidKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::parse(s)
    }
}

impl Serialize for DidKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for DidKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_key_golden() {
        // Computed with an independent Python base58btc encoder over 0xed 0x01 ‖ [0; 32].
        let did = derive_did_key(&[0u8; 32]).unwrap();
        assert_eq!(
            did.as_str(),
            "did:key:z6MkeTG3bFFSLYVU7VqhgZxqr6YzpaGrQtFMh1uvqGy1vDnP"
        );
        assert_eq!(did, derive_did_key(&[0u8; 32]).unwrap());
    }

    #[test]
    fn rfc8032_key_golden() {
        let pk = hex::decode("d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a")
            .unwrap();
        assert_eq!(
            derive_did_key(&pk).unwrap().as_str(),
            "did:key:z6MktwupdmLXVVqTzCw4i46r4uGyosGXRnR3XjN4Zq7oMMsw"
        );
    }

    #[test]
    fn wrong_length_is_invalid_key() {
        assert_eq!(derive_did_key(&[0u8; 31]).unwrap_err(), Error::InvalidKey(31));
    }

    #[test]
    fn parse_rejects_garbage() {
        for bad in [
            "did:web:example.com",
            "did:key:6MkeTG3bFFSLYVU7VqhgZxqr6YzpaGrQtFMh1uvqGy1vDnP",
            "did:key:z0OIl",
            "did:key:z6LSj72tK8brWgZja8NLRwPigth2T9QRiG1uH9oKZuKjdh9p",
        ] {
            assert!(DidKey::parse(bad).is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn round_trips_and_starts_with_z6mk(key in any::<[u8; 32]>()) {
            let did = derive_did_key(&key).unwrap();
            prop_assert!(did.as_str().starts_with("did:key:z6Mk"));
            let parsed = DidKey::parse(did.as_str()).unwrap();
            prop_assert_eq!(parsed.public_key().0, key);
        }
    }
}
