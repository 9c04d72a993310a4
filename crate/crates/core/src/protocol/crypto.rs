//! Pluggable digest and signature primitives.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::RngCore;
use sha2::{Digest as _, Sha256};

use crate::licences::Digest;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub Vec<u8>);

impl PublicKey {
    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.to_hex();
        write!(f, "PublicKey({})", &h[..h.len().min(16)])
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(pub Vec<u8>);

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature(pub Vec<u8>);

impl Signature {
    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.to_hex();
        write!(f, "Signature({})", &h[..h.len().min(16)])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

pub trait CryptoSuite: Send + Sync {
    fn name(&self) -> &'static str;

    fn digest(&self, bytes: &[u8]) -> Digest {
        Digest::of(bytes)
    }

    fn keygen(&self, rng: &mut dyn RngCore) -> KeyPair;

    fn sign(&self, secret: &SecretKey, message: &[u8]) -> Signature;

    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> bool;
}

/// Ed25519 signatures over SHA-256 digests.
#[derive(Debug, Default, Clone, Copy)]
pub struct Ed25519Suite;

impl CryptoSuite for Ed25519Suite {
    fn name(&self) -> &'static str {
        "ed25519"
    }

    fn keygen(&self, rng: &mut dyn RngCore) -> KeyPair {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let sk = SigningKey::from_bytes(&seed);
        KeyPair {
            public: PublicKey(sk.verifying_key().to_bytes().to_vec()),
            secret: SecretKey(seed.to_vec()),
        }
    }

    fn sign(&self, secret: &SecretKey, message: &[u8]) -> Signature {
        let seed: [u8; 32] = secret.0.as_slice().try_into().expect("32-byte ed25519 seed");
        Signature(SigningKey::from_bytes(&seed).sign(message).to_bytes().to_vec())
    }

    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        let Ok(pk) = <[u8; 32]>::try_from(public.0.as_slice()) else {
            return false;
        };
        let Ok(vk) = VerifyingKey::from_bytes(&pk) else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(&signature.0) else {
            return false;
        };
        vk.verify_strict(message, &sig).is_ok() && vk.verify(message, &sig).is_ok()
    }
}

/// Deterministic, fast test double. NOT a signature scheme: the public key
/// equals the secret and a "signature" is `SHA-256(key || message)`, so
/// anyone holding a public key can forge. It only detects modification.
#[derive(Debug, Default, Clone, Copy)]
pub struct HashSuite;

impl CryptoSuite for HashSuite {
    fn name(&self) -> &'static str {
        "hash-double"
    }

    fn keygen(&self, rng: &mut dyn RngCore) -> KeyPair {
        let mut k = vec![0u8; 16];
        rng.fill_bytes(&mut k);
        KeyPair {
            public: PublicKey(k.clone()),
            secret: SecretKey(k),
        }
    }

    fn sign(&self, secret: &SecretKey, message: &[u8]) -> Signature {
        let mut h = Sha256::new();
        h.update(&secret.0);
        h.update(message);
        Signature(h.finalize().to_vec())
    }

    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        self.sign(&SecretKey(public.0.clone()), message) == *signature
    }
}
