// SPDX-License-Identifier: Apache-2.0

//! Proofs of circuit satisfaction and the backends that produce them.
//!
//! The bundled [`EmbeddedBackend`] is a transparent evaluator. It refuses to
//! emit a proof unless the witness satisfies every constraint, and at
//! verification time it checks the integrity tag binding the public inputs
//! to the binding output. It does not hide the witness and does not stop a
//! malicious prover who skips the backend and writes a tag by hand: both
//! require a real SNARK backend plugged in through [`ProofBackend`].

use alloc::string::String;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{evaluate_circuit, ConstraintViolation, PublicInputs, Witness};
use crate::field::FieldElement;

pub const EMBEDDED_BACKEND_ID: &str = "embedded";

/// A statement that the prover knew a witness for `public_inputs`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Proof {
    pub public_inputs: PublicInputs,
    pub binding_proof: FieldElement,
    pub backend_id: String,
    #[serde(with = "hex_tag")]
    pub tag: [u8; 32],
}

impl Proof {
    /// Recomputes the tag for the current contents.
    pub fn expected_tag(&self) -> [u8; 32] {
        proof_tag(&self.backend_id, &self.public_inputs, &self.binding_proof)
    }
}

/// `SHA-256(backend_id ‖ public inputs ‖ binding_proof)`, field elements as
/// 32-byte big-endian.
pub fn proof_tag(backend_id: &str, public: &PublicInputs, binding: &FieldElement) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(backend_id.as_bytes());
    h.update(public.to_canonical_bytes());
    h.update(binding.to_be_bytes());
    h.finalize().into()
}

/// Why a proof was not accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum ProofRejection {
    #[error("public inputs mismatch")]
    PublicInputsMismatch,
    #[error("tag mismatch")]
    TagMismatch,
    #[error("backend mismatch")]
    BackendMismatch,
    #[error("rejected by backend")]
    BackendRejected,
}

/// A proving system for the ownership circuit.
pub trait ProofBackend: Send + Sync {
    fn id(&self) -> &str;

    /// Produces a proof, or refuses if the witness does not satisfy the
    /// circuit.
    fn prove(&self, public: &PublicInputs, witness: &Witness) -> Result<Proof, ConstraintViolation>;

    /// Backend-specific validity, beyond the input and tag checks that
    /// [`verify_proof`] always performs.
    fn check(&self, proof: &Proof) -> bool;
}

/// Constraint evaluator with an integrity tag. See the module docs for what
/// it does and does not guarantee.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmbeddedBackend;

impl ProofBackend for EmbeddedBackend {
    fn id(&self) -> &str {
        EMBEDDED_BACKEND_ID
    }

    fn prove(&self, public: &PublicInputs, witness: &Witness) -> Result<Proof, ConstraintViolation> {
        let binding = evaluate_circuit(public, witness)?;
        Ok(Proof {
            public_inputs: *public,
            binding_proof: binding,
            backend_id: EMBEDDED_BACKEND_ID.into(),
            tag: proof_tag(EMBEDDED_BACKEND_ID, public, &binding),
        })
    }

    fn check(&self, proof: &Proof) -> bool {
        proof.backend_id == EMBEDDED_BACKEND_ID
    }
}

pub fn generate_proof(
    public: &PublicInputs,
    witness: &Witness,
    backend: &dyn ProofBackend,
) -> Result<Proof, ConstraintViolation> {
    backend.prove(public, witness)
}

/// Like [`verify_proof`], reporting the first failed check.
pub fn check_proof(
    proof: &Proof,
    expected: &PublicInputs,
    backend: &dyn ProofBackend,
) -> Result<(), ProofRejection> {
    if proof.public_inputs != *expected {
        return Err(ProofRejection::PublicInputsMismatch);
    }
    if proof.tag != proof.expected_tag() {
        return Err(ProofRejection::TagMismatch);
    }
    if proof.backend_id != backend.id() {
        return Err(ProofRejection::BackendMismatch);
    }
    if !backend.check(proof) {
        return Err(ProofRejection::BackendRejected);
    }
    Ok(())
}

pub fn verify_proof(proof: &Proof, expected: &PublicInputs, backend: &dyn ProofBackend) -> bool {
    check_proof(proof, expected, backend).is_ok()
}

mod hex_tag {
    use alloc::string::String;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(tag: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(tag))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;

    fn fe(v: u64) -> FieldElement {
        FieldElement::from_u64(v)
    }

    fn instance() -> (PublicInputs, Witness) {
        (
            PublicInputs {
                expected_did_hash: [fe(3), fe(4)],
                public_key_hash: fe(5),
                nonce_hash: fe(41),
            },
            Witness {
                secret_key: [fe(1), fe(2)],
                did_document_hash: [fe(3), fe(4)],
                nonce: [fe(5), fe(6)],
            },
        )
    }

    #[test]
    fn honest_proof_verifies() {
        let (public, witness) = instance();
        let proof = generate_proof(&public, &witness, &EmbeddedBackend).unwrap();
        assert_eq!(proof.binding_proof, fe(32));
        assert!(verify_proof(&proof, &public, &EmbeddedBackend));
    }

    #[test]
    fn refuses_false_statements() {
        let (public, witness) = instance();
        let mut wrong_key = witness;
        wrong_key.secret_key = [fe(2), fe(2)];
        assert_eq!(
            generate_proof(&public, &wrong_key, &EmbeddedBackend).unwrap_err().index,
            2
        );
        let mut stale = witness;
        stale.nonce = [fe(7), fe(8)];
        assert_eq!(generate_proof(&public, &stale, &EmbeddedBackend).unwrap_err().index, 3);
    }

    #[test]
    fn mutations_are_rejected() {
        let (public, witness) = instance();
        let proof = generate_proof(&public, &witness, &EmbeddedBackend).unwrap();

        let mut other = public;
        other.expected_did_hash = [fe(9), fe(9)];
        assert_eq!(
            check_proof(&proof, &other, &EmbeddedBackend),
            Err(ProofRejection::PublicInputsMismatch)
        );

        let mut p = proof.clone();
        p.binding_proof = fe(33);
        assert_eq!(check_proof(&p, &public, &EmbeddedBackend), Err(ProofRejection::TagMismatch));

        let mut p = proof.clone();
        p.public_inputs.nonce_hash = fe(42);
        assert!(!verify_proof(&p, &p.public_inputs.clone(), &EmbeddedBackend));

        let mut p = proof;
        p.backend_id = "other".into();
        p.tag = p.expected_tag();
        assert_eq!(
            check_proof(&p, &public, &EmbeddedBackend),
            Err(ProofRejection::BackendMismatch)
        );
    }

    #[test]
    fn json_layout() {
        let (public, witness) = instance();
        let proof = generate_proof(&public, &witness, &EmbeddedBackend).unwrap();
        let text = canonical::to_string(&proof).unwrap();
        let expected = alloc::format!(
            concat!(
                r#"{{"backendId":"embedded","bindingProof":"32","publicInputs":"#,
                r#"{{"expectedDidHash0":"3","expectedDidHash1":"4","nonceHash":"41","publicKeyHash":"5"}},"#,
                r#""tag":"{}"}}"#
            ),
            hex::encode(proof.tag)
        );
        assert_eq!(text, expected);
        let back: Proof = serde_json::from_str(&text).unwrap();
        assert_eq!(back, proof);
    }
}
