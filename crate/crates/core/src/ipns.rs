// SPDX-License-Identifier: Apache-2.0

//! Signed, sequence-numbered name records pointing a key-derived name at a
//! CID.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cid::Cid;
use crate::did_key::{decode_multibase_key, encode_multibase_key};
use crate::encoding::base64_signature;
use crate::error::Error;
use crate::keys::{KeyPair, PublicKey, Signature};

pub const IPNS_PREFIX: &str = "ipns:";

/// `ipns:` followed by the publisher's multibase key, the same payload a
/// `did:key` carries. The public key is recoverable from the name alone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpnsName {
    text: String,
    key: PublicKey,
}

impl IpnsName {
    pub fn for_key(key: &PublicKey) -> Self {
        IpnsName {
            text: alloc::format!("{IPNS_PREFIX}{}", encode_multibase_key(key)),
            key: *key,
        }
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let payload = text.strip_prefix(IPNS_PREFIX).ok_or(Error::InvalidIpnsName)?;
        let key = decode_multibase_key(payload).map_err(|_| Error::InvalidIpnsName)?;
        let name = Self::for_key(&key);
        if name.text != text {
            return Err(Error::InvalidIpnsName);
        }
        Ok(name)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// The name without its `ipns:` prefix.
    pub fn key_payload(&self) -> &str {
        &self.text[IPNS_PREFIX.len()..]
    }

    pub fn public_key(&self) -> PublicKey {
        self.key
    }
}

impl fmt::Display for IpnsName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl fmt::Debug for IpnsName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IpnsName({})", self.text)
    }
}

impl FromStr for IpnsName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::parse(s)
    }
}

impl Serialize for IpnsName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for IpnsName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpnsRecord {
    pub name: IpnsName,
    pub value: Cid,
    pub sequence: u64,
    #[serde(with = "base64_signature")]
    pub signature: Signature,
}

impl IpnsRecord {
    pub fn sign(keypair: &KeyPair, value: Cid, sequence: u64) -> Self {
        let name = IpnsName::for_key(&keypair.public_key());
        let signature = keypair.sign(&record_signing_bytes(&name, &value, sequence));
        IpnsRecord {
            name,
            value,
            sequence,
            signature,
        }
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        record_signing_bytes(&self.name, &self.value, self.sequence)
    }

    /// Checks the signature under the key embedded in the name.
    pub fn verify(&self) -> bool {
        self.name.public_key().verify(&self.signing_bytes(), &self.signature)
    }
}

/// `u32 len ‖ name ‖ u32 len ‖ cid text ‖ u64 sequence`, big-endian.
fn record_signing_bytes(name: &IpnsName, value: &Cid, sequence: u64) -> Vec<u8> {
    let cid = value.to_text();
    let mut buf = Vec::with_capacity(16 + name.text.len() + cid.len());
    buf.extend_from_slice(&(name.text.len() as u32).to_be_bytes());
    buf.extend_from_slice(name.text.as_bytes());
    buf.extend_from_slice(&(cid.len() as u32).to_be_bytes());
    buf.extend_from_slice(cid.as_bytes());
    buf.extend_from_slice(&sequence.to_be_bytes());
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use rand::rngs::OsRng;

    #[test]
    fn name_reuses_did_key_payload() {
        let kp = KeyPair::generate(&mut OsRng);
        let name = IpnsName::for_key(&kp.public_key());
        assert_eq!(name.key_payload(), kp.did().multibase());
        assert_eq!(IpnsName::parse(name.as_str()).unwrap(), name);
        assert!(IpnsName::parse(kp.did().as_str()).is_err());
    }

    #[test]
    fn record_signature_covers_all_fields() {
        let kp = KeyPair::generate(&mut OsRng);
        let rec = IpnsRecord::sign(&kp, Cid::compute(b"doc"), 1);
        assert!(rec.verify());

        let mut r = rec.clone();
        r.sequence = 2;
        assert!(!r.verify());
        let mut r = rec.clone();
        r.value = Cid::compute(b"other");
        assert!(!r.verify());
        let mut r = rec.clone();
        r.name = IpnsName::for_key(&KeyPair::generate(&mut OsRng).public_key());
        assert!(!r.verify());
        let mut r = rec;
        r.signature.0[10] ^= 4;
        assert!(!r.verify());
    }

    #[test]
    fn json_round_trip() {
        let kp = KeyPair::generate(&mut OsRng);
        let rec = IpnsRecord::sign(&kp, Cid::compute(b"doc"), 7);
        let bytes = canonical::to_vec(&rec).unwrap();
        let text = core::str::from_utf8(&bytes).unwrap();
        assert!(text.starts_with(r#"{"name":"ipns:z6Mk"#));
        assert!(text.contains(r#""sequence":7,"#));
        let back: IpnsRecord = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, rec);
    }
}
