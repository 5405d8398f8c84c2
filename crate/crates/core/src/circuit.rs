// SPDX-License-Identifier: Apache-2.0

//! The ownership circuit.
//!
//! Public inputs: the document hash split into two field elements, the hash
//! of the prover's secret key pair, and the verifier's nonce hash. Private
//! witness: the secret key pair, the document hash, and the nonce. The
//! circuit asserts, in order:
//!
//! 1. `did_document_hash == expected_did_hash` (both halves)
//! 2. `hash_pair(secret_key) == public_key_hash`
//! 3. `hash_pair(nonce) == nonce_hash`
//!
//! and outputs the binding value
//! `(sk0 + sk1) * (h0 + h1) + n0 + n1`.

use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::FieldElement;

/// Domain separator for deriving the circuit secret from an ed25519 seed.
pub const SECRET_FIELDS_DOMAIN: &[u8] = b"DIAP_ZKP_SK_V1";

pub type FieldPair = [FieldElement; 2];

/// `x0 * x1 + x0 + x1`. Used for both the key hash and the nonce hash.
pub fn hash_pair(x: &FieldPair) -> FieldElement {
    x[0] * x[1] + x[0] + x[1]
}

/// Reads a 32-byte digest as two big-endian 128-bit halves. Both halves are
/// below `2^128 < p`, so no reduction happens and the map is injective.
pub fn split_hash_to_fields(digest: &[u8]) -> Result<FieldPair, crate::Error> {
    let digest: &[u8; 32] = digest
        .try_into()
        .map_err(|_| crate::Error::InvalidDigest(digest.len()))?;
    Ok(split_digest(digest))
}

pub(crate) fn split_digest(digest: &[u8; 32]) -> FieldPair {
    let hi = u128::from_be_bytes(digest[..16].try_into().expect("16 bytes"));
    let lo = u128::from_be_bytes(digest[16..].try_into().expect("16 bytes"));
    [FieldElement::from_u128(hi), FieldElement::from_u128(lo)]
}

/// Inverse of [`split_hash_to_fields`]; `None` if either element does not
/// fit in 128 bits.
pub fn join_fields_to_hash(pair: &FieldPair) -> Option<[u8; 32]> {
    let mut out = [0u8; 32];
    out[..16].copy_from_slice(&pair[0].to_u128()?.to_be_bytes());
    out[16..].copy_from_slice(&pair[1].to_u128()?.to_be_bytes());
    Some(out)
}

/// `split_hash_to_fields(SHA-256(seed ‖ "DIAP_ZKP_SK_V1"))`.
pub fn derive_secret_fields(seed: &[u8]) -> Result<FieldPair, crate::Error> {
    if seed.len() != 32 {
        return Err(crate::Error::InvalidInput("seed must be 32 bytes"));
    }
    let mut hasher = Sha256::new();
    hasher.update(seed);
    hasher.update(SECRET_FIELDS_DOMAIN);
    Ok(split_digest(&hasher.finalize().into()))
}

/// Inputs known to the verifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "PublicInputsJson", into = "PublicInputsJson")]
pub struct PublicInputs {
    pub expected_did_hash: FieldPair,
    pub public_key_hash: FieldElement,
    pub nonce_hash: FieldElement,
}

impl PublicInputs {
    /// Fixed-width encoding used by proof tags: four 32-byte big-endian
    /// elements in declaration order.
    pub fn to_canonical_bytes(&self) -> [u8; 128] {
        let mut out = [0u8; 128];
        let fields = [
            self.expected_did_hash[0],
            self.expected_did_hash[1],
            self.public_key_hash,
            self.nonce_hash,
        ];
        for (chunk, f) in out.chunks_exact_mut(32).zip(fields.iter()) {
            chunk.copy_from_slice(&f.to_be_bytes());
        }
        out
    }
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PublicInputsJson {
    expected_did_hash0: FieldElement,
    expected_did_hash1: FieldElement,
    public_key_hash: FieldElement,
    nonce_hash: FieldElement,
}

impl From<PublicInputsJson> for PublicInputs {
    fn from(p: PublicInputsJson) -> Self {
        PublicInputs {
            expected_did_hash: [p.expected_did_hash0, p.expected_did_hash1],
            public_key_hash: p.public_key_hash,
            nonce_hash: p.nonce_hash,
        }
    }
}

impl From<PublicInputs> for PublicInputsJson {
    fn from(p: PublicInputs) -> Self {
        PublicInputsJson {
            expected_did_hash0: p.expected_did_hash[0],
            expected_did_hash1: p.expected_did_hash[1],
            public_key_hash: p.public_key_hash,
            nonce_hash: p.nonce_hash,
        }
    }
}

/// The prover's private inputs. Deliberately not `Serialize`.
#[derive(Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(from = "WitnessFile")]
pub struct Witness {
    pub secret_key: FieldPair,
    pub did_document_hash: FieldPair,
    pub nonce: FieldPair,
}

impl fmt::Debug for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Witness").finish_non_exhaustive()
    }
}

/// Witness file layout: each `[Field; 2]` spelled as two numbered keys.
#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WitnessFile {
    secret_key0: FieldElement,
    secret_key1: FieldElement,
    did_document_hash0: FieldElement,
    did_document_hash1: FieldElement,
    nonce0: FieldElement,
    nonce1: FieldElement,
}

impl From<WitnessFile> for Witness {
    fn from(w: WitnessFile) -> Self {
        Witness {
            secret_key: [w.secret_key0, w.secret_key1],
            did_document_hash: [w.did_document_hash0, w.did_document_hash1],
            nonce: [w.nonce0, w.nonce1],
        }
    }
}

/// A failed circuit assertion. Indices follow the constraint numbering in
/// the module docs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("constraint-violation {index}")]
pub struct ConstraintViolation {
    pub index: u8,
}

/// Runs the circuit. Returns the binding output, or the first constraint
/// that fails.
pub fn evaluate_circuit(
    public: &PublicInputs,
    witness: &Witness,
) -> Result<FieldElement, ConstraintViolation> {
    if witness.did_document_hash != public.expected_did_hash {
        return Err(ConstraintViolation { index: 1 });
    }
    if hash_pair(&witness.secret_key) != public.public_key_hash {
        return Err(ConstraintViolation { index: 2 });
    }
    if hash_pair(&witness.nonce) != public.nonce_hash {
        return Err(ConstraintViolation { index: 3 });
    }
    let sk = witness.secret_key[0] + witness.secret_key[1];
    let h = witness.did_document_hash[0] + witness.did_document_hash[1];
    Ok(sk * h + witness.nonce[0] + witness.nonce[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(v: u64) -> FieldElement {
        FieldElement::from_u64(v)
    }

    fn small_instance() -> (PublicInputs, Witness) {
        let witness = Witness {
            secret_key: [fe(1), fe(2)],
            did_document_hash: [fe(3), fe(4)],
            nonce: [fe(5), fe(6)],
        };
        let public = PublicInputs {
            expected_did_hash: [fe(3), fe(4)],
            public_key_hash: fe(5),
            nonce_hash: fe(41),
        };
        (public, witness)
    }

    #[test]
    fn hash_pair_spot_values() {
        assert_eq!(hash_pair(&[fe(0), fe(0)]), fe(0));
        assert_eq!(hash_pair(&[fe(1), fe(1)]), fe(3));
        assert_eq!(hash_pair(&[fe(2), fe(3)]), fe(11));
    }

    #[test]
    fn small_instance_binds_to_32() {
        let (public, witness) = small_instance();
        assert_eq!(evaluate_circuit(&public, &witness).unwrap(), fe(32));
    }

    #[test]
    fn reports_first_failing_constraint() {
        let (public, witness) = small_instance();
        let mut p = public;
        p.expected_did_hash = [fe(3), fe(5)];
        assert_eq!(evaluate_circuit(&p, &witness), Err(ConstraintViolation { index: 1 }));
        let mut p = public;
        p.public_key_hash = fe(6);
        assert_eq!(evaluate_circuit(&p, &witness), Err(ConstraintViolation { index: 2 }));
        let mut p = public;
        p.nonce_hash = fe(40);
        assert_eq!(evaluate_circuit(&p, &witness), Err(ConstraintViolation { index: 3 }));
        // Everything wrong: constraint 1 wins.
        let p = PublicInputs {
            expected_did_hash: [fe(0), fe(0)],
            public_key_hash: fe(0),
            nonce_hash: fe(0),
        };
        assert_eq!(evaluate_circuit(&p, &witness), Err(ConstraintViolation { index: 1 }));
    }

    #[test]
    fn split_hash_edges() {
        assert_eq!(split_hash_to_fields(&[0u8; 32]).unwrap(), [fe(0), fe(0)]);
        let mut d = [0u8; 32];
        d[15] = 1;
        d[31] = 2;
        assert_eq!(split_hash_to_fields(&d).unwrap(), [fe(1), fe(2)]);
        assert_eq!(join_fields_to_hash(&[fe(1), fe(2)]).unwrap(), d);
        assert_eq!(
            split_hash_to_fields(&[0u8; 31]).unwrap_err(),
            crate::Error::InvalidDigest(31)
        );
        let big = -FieldElement::ONE;
        assert!(join_fields_to_hash(&[big, fe(0)]).is_none());
    }

    #[test]
    fn secret_fields_zero_seed_golden() {
        // SHA-256([0; 32] ‖ "DIAP_ZKP_SK_V1") split into big-endian halves (Python hashlib).
        let pair = derive_secret_fields(&[0u8; 32]).unwrap();
        assert_eq!(pair[0].to_decimal(), "50616841952862415458479206632297344857");
        assert_eq!(pair[1].to_decimal(), "176293413660951117735808396552199772137");
        assert_eq!(pair, derive_secret_fields(&[0u8; 32]).unwrap());
        assert_ne!(pair, derive_secret_fields(&[1u8; 32]).unwrap());
        assert!(derive_secret_fields(&[0u8; 16]).is_err());
    }

    #[test]
    fn witness_json_shape() {
        let w: Witness = serde_json::from_str(
            r#"{"secretKey0":"1","secretKey1":"2","didDocumentHash0":"3",
                "didDocumentHash1":"4","nonce0":"5","nonce1":"6"}"#,
        )
        .unwrap();
        assert_eq!(w, small_instance().1);
        assert!(serde_json::from_str::<Witness>(r#"{"secretKey0":"1"}"#).is_err());
    }
}
