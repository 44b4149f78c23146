//! Mask expansion: 16-byte seed to a vector of residues mod R.
//!
//! The seed keys a stream generator through a domain-separating hash;
//! each output word is masked down to R, which is exact because R is a
//! power of two. Deterministic, so both the masking client and a
//! recovering server expand identical vectors.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub const PRG_SEED_LEN: usize = 16;

fn prg_rng(seed: &[u8; PRG_SEED_LEN]) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"mask-expand");
    hasher.update(seed);
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

#[inline]
pub(crate) fn modulus_mask(modulus_log2: u32) -> u64 {
    if modulus_log2 >= 64 {
        u64::MAX
    } else {
        (1u64 << modulus_log2) - 1
    }
}

/// Fills `out` with the expansion of `seed`. Reused buffers avoid
/// per-peer allocation in the n^2 masking loop.
pub(crate) fn prg_expand_into(seed: &[u8; PRG_SEED_LEN], modulus_log2: u32, out: &mut [u64]) {
    let mut rng = prg_rng(seed);
    let mask = modulus_mask(modulus_log2);
    for slot in out.iter_mut() {
        *slot = rng.next_u64() & mask;
    }
}

/// PRG(seed): `vec_len` residues mod 2^modulus_log2.
pub fn prg_expand(seed: &[u8; PRG_SEED_LEN], vec_len: usize, modulus_log2: u32) -> Vec<u64> {
    let mut out = vec![0u64; vec_len];
    prg_expand_into(seed, modulus_log2, &mut out);
    out
}
