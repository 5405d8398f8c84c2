// SPDX-License-Identifier: Apache-2.0

//! Ed25519 key material, signatures, and the seed-derived symmetric key.

use core::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use rand_core::CryptoRngCore;
use sha2::{Digest, Sha256};
use zeroize::Zeroizing;

use crate::did_key::DidKey;
use crate::error::Error;

/// Salt for the key that encrypts an agent's own peer endpoint.
pub const PEER_ENDPOINT_SALT: &[u8] = b"DIAP_AES_KEY_V3";

/// An ed25519 keypair. The seed never leaves this type except through
/// [`KeyPair::seed`], and the `Debug` impl hides it.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn generate<R: CryptoRngCore + ?Sized>(rng: &mut R) -> Self {
        let mut seed = Zeroizing::new([0u8; 32]);
        rng.fill_bytes(seed.as_mut());
        Self::from_seed(&seed)
    }

    pub fn from_seed(seed: &[u8; 32]) -> Self {
        KeyPair {
            signing: SigningKey::from_bytes(seed),
        }
    }

    pub fn from_seed_slice(seed: &[u8]) -> Result<Self, Error> {
        let seed: &[u8; 32] = seed
            .try_into()
            .map_err(|_| Error::InvalidKey(seed.len()))?;
        Ok(Self::from_seed(seed))
    }

    pub fn seed(&self) -> &[u8; 32] {
        self.signing.as_bytes()
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn did(&self) -> DidKey {
        DidKey::from_public_key(&self.public_key())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }

    /// `SHA-256(seed ‖ salt)`.
    pub fn derive_symmetric_key(&self, salt: &[u8]) -> Result<Zeroizing<[u8; 32]>, Error> {
        if salt.is_empty() {
            return Err(Error::InvalidSalt);
        }
        let mut hasher = Sha256::new();
        hasher.update(self.seed());
        hasher.update(salt);
        Ok(Zeroizing::new(hasher.finalize().into()))
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public_key", &self.public_key())
            .finish_non_exhaustive()
    }
}

/// Raw 32-byte ed25519 public key. Not checked to be a valid curve point
/// until it is used to verify.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, Error> {
        bytes
            .try_into()
            .map(PublicKey)
            .map_err(|_| Error::InvalidKey(bytes.len()))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Strict ed25519 verification. Never panics; malformed keys or
    /// signatures simply fail.
    pub fn verify(&self, message: &[u8], sig: &Signature) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
        key.verify_strict(message, &sig).is_ok()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", bs58::encode(&self.0).into_string())
    }
}

/// Verifies `sig` over `message` under `public_key`.
pub fn verify_signature(public_key: &[u8], message: &[u8], sig: &Signature) -> bool {
    match PublicKey::from_slice(public_key) {
        Ok(pk) => pk.verify(message, sig),
        Err(_) => false,
    }
}

/// A 64-byte ed25519 signature.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);

impl Signature {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, Error> {
        bytes
            .try_into()
            .map(Signature)
            .map_err(|_| Error::InvalidSignature)
    }

    pub fn as_bytes(&self) -> &[u8; 64] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0[..8]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::OsRng;

    // RFC 8032, section 7.1, TEST 1.
    const RFC_SEED: &str = "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60";
    const RFC_PK: &str = "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a";
    const RFC_SIG: &str = "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b";

    fn rfc_keypair() -> KeyPair {
        KeyPair::from_seed_slice(&hex::decode(RFC_SEED).unwrap()).unwrap()
    }

    #[test]
    fn generated_keys_have_fixed_lengths_and_differ() {
        let a = KeyPair::generate(&mut OsRng);
        let b = KeyPair::generate(&mut OsRng);
        assert_eq!(a.seed().len(), 32);
        assert_eq!(a.public_key().as_bytes().len(), 32);
        assert_ne!(a.public_key(), b.public_key());
    }

    #[test]
    fn matches_rfc8032_vector() {
        let kp = rfc_keypair();
        assert_eq!(hex::encode(kp.public_key().0), RFC_PK);
        let sig = kp.sign(b"");
        assert_eq!(hex::encode(sig.0), RFC_SIG);
        assert!(verify_signature(&kp.public_key().0, b"", &sig));
    }

    #[test]
    fn sign_verify_negative_paths() {
        let kp = KeyPair::generate(&mut OsRng);
        let other = KeyPair::generate(&mut OsRng);
        let sig = kp.sign(b"hello");
        assert!(kp.public_key().verify(b"hello", &sig));
        assert!(!kp.public_key().verify(b"hellp", &sig));
        assert!(!other.public_key().verify(b"hello", &sig));
        assert!(!verify_signature(&[0u8; 31], b"hello", &sig));
        assert!(!verify_signature(&[0xff; 32], b"hello", &sig));
    }

    #[test]
    fn symmetric_key_golden_and_errors() {
        let kp = KeyPair::from_seed(&[0u8; 32]);
        let key = kp.derive_symmetric_key(PEER_ENDPOINT_SALT).unwrap();
        // SHA-256 of 32 zero bytes followed by "DIAP_AES_KEY_V3", computed with Python hashlib.
        assert_eq!(
            hex::encode(*key),
            "c26594ee66df081d59db30d68178eb428735fe04aeec1b974ecd64b0ca2d25e2"
        );
        assert_eq!(kp.derive_symmetric_key(b"").unwrap_err(), Error::InvalidSalt);
        let a = kp.derive_symmetric_key(b"A").unwrap();
        let b = kp.derive_symmetric_key(b"B").unwrap();
        assert_ne!(*a, *b);
        assert_eq!(*a, *kp.derive_symmetric_key(b"A").unwrap());
    }

    #[test]
    fn debug_hides_seed() {
        let kp = KeyPair::from_seed(&[7u8; 32]);
        let dbg = alloc::format!("{kp:?}");
        assert!(!dbg.contains("0707"));
        assert!(!dbg.contains("[7, 7"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn any_single_bit_flip_breaks_verification(
            seed in any::<[u8; 32]>(),
            msg in prop::collection::vec(any::<u8>(), 1..64),
            which in 0usize..3,
            bit in any::<usize>(),
        ) {
            let kp = KeyPair::from_seed(&seed);
            let sig = kp.sign(&msg);
            let pk = kp.public_key();
            prop_assert!(pk.verify(&msg, &sig));
            let (mut m, mut s, mut p) = (msg.clone(), sig, pk);
            match which {
                0 => { let i = bit % (m.len() * 8); m[i / 8] ^= 1 << (i % 8); }
                1 => { let i = bit % 512; s.0[i / 8] ^= 1 << (i % 8); }
                _ => { let i = bit % 256; p.0[i / 8] ^= 1 << (i % 8); }
            }
            prop_assert!(!p.verify(&m, &s));
        }
    }
}
