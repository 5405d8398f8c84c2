// SPDX-License-Identifier: Apache-2.0

//! Serde helpers for byte fields.

/// Standard padded base64 for `Vec<u8>` fields.
pub mod base64_bytes {
    use alloc::string::String;
    use alloc::vec::Vec;

    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        STANDARD.decode(s.as_bytes()).map_err(serde::de::Error::custom)
    }
}

/// Base64 for fixed-size arrays.
pub mod base64_array {
    use alloc::string::String;

    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(bytes: &[u8; N], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[u8; N], D::Error> {
        let s = String::deserialize(d)?;
        let raw = STANDARD.decode(s.as_bytes()).map_err(serde::de::Error::custom)?;
        raw.try_into()
            .map_err(|v: alloc::vec::Vec<u8>| serde::de::Error::invalid_length(v.len(), &"fixed-size byte array"))
    }
}

/// Base64 for [`Signature`](crate::keys::Signature).
pub mod base64_signature {
    use serde::{Deserializer, Serializer};

    use crate::keys::Signature;

    pub fn serialize<S: Serializer>(sig: &Signature, s: S) -> Result<S::Ok, S::Error> {
        super::base64_array::serialize(&sig.0, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Signature, D::Error> {
        super::base64_array::deserialize::<D, 64>(d).map(Signature)
    }
}
