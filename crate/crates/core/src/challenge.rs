// SPDX-License-Identifier: Apache-2.0

//! Verifier-issued nonce challenges.

use rand_core::CryptoRngCore;
use serde::{Deserialize, Serialize};

use crate::circuit::{hash_pair, split_digest, FieldPair};
use crate::field::FieldElement;

/// Default lifetime of an issued challenge, in seconds.
pub const DEFAULT_CHALLENGE_TTL_SECS: u64 = 300;

/// A single-use challenge. The raw nonce goes to the prover; the verifier
/// keys its bookkeeping on `nonce_hash`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "ChallengeJson", into = "ChallengeJson")]
pub struct NonceChallenge {
    pub nonce: FieldPair,
    pub nonce_hash: FieldElement,
    pub issued_at: u64,
}

impl NonceChallenge {
    /// 32 fresh random bytes, split into two field elements.
    pub fn generate<R: CryptoRngCore + ?Sized>(rng: &mut R, issued_at: u64) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        Self::from_nonce(split_digest(&bytes), issued_at)
    }

    pub fn from_nonce(nonce: FieldPair, issued_at: u64) -> Self {
        NonceChallenge {
            nonce,
            nonce_hash: hash_pair(&nonce),
            issued_at,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ChallengeJson {
    nonce0: FieldElement,
    nonce1: FieldElement,
    issued_at: u64,
}

impl From<ChallengeJson> for NonceChallenge {
    fn from(c: ChallengeJson) -> Self {
        NonceChallenge::from_nonce([c.nonce0, c.nonce1], c.issued_at)
    }
}

impl From<NonceChallenge> for ChallengeJson {
    fn from(c: NonceChallenge) -> Self {
        ChallengeJson {
            nonce0: c.nonce[0],
            nonce1: c.nonce[1],
            issued_at: c.issued_at,
        }
    }
}
