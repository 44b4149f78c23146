//! Pairwise key agreement.
//!
//! Diffie-Hellman over Curve25519. The raw shared point is hashed down to
//! a 16-byte PRG seed, so both sides of a pair derive the same seed and
//! nothing else about the exchange leaks into mask material. A shared
//! secret of all zeros (identity or small-order peer point) is rejected.

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use x25519_dalek::{PublicKey, StaticSecret};

use super::SecAggError;
use crate::secagg::prg::PRG_SEED_LEN;

pub struct KaKeyPair {
    pub secret: StaticSecret,
    pub public: PublicKey,
}

pub fn ka_gen(rng: &mut (impl RngCore + CryptoRng)) -> KaKeyPair {
    let secret = StaticSecret::random_from_rng(rng);
    let public = PublicKey::from(&secret);
    KaKeyPair { secret, public }
}

/// Derives the pairwise seed. Symmetric: agree(sk_u, pk_v) equals
/// agree(sk_v, pk_u).
pub fn ka_agree(secret: &StaticSecret, peer: &PublicKey) -> Result<[u8; PRG_SEED_LEN], SecAggError> {
    let shared = secret.diffie_hellman(peer);
    if !shared.was_contributory() {
        return Err(SecAggError::DegenerateKey);
    }
    let mut hasher = Sha256::new();
    hasher.update(b"pairwise-seed");
    hasher.update(shared.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; PRG_SEED_LEN];
    seed.copy_from_slice(&digest[..PRG_SEED_LEN]);
    Ok(seed)
}

/// Derives the share-transport cipher key for a pair. Domain-separated
/// from the mask seed so exposing one never weakens the other.
pub fn enc_key(secret: &StaticSecret, peer: &PublicKey) -> Result<[u8; 32], SecAggError> {
    let shared = secret.diffie_hellman(peer);
    if !shared.was_contributory() {
        return Err(SecAggError::DegenerateKey);
    }
    let mut hasher = Sha256::new();
    hasher.update(b"share-transport");
    hasher.update(shared.as_bytes());
    Ok(hasher.finalize().into())
}
