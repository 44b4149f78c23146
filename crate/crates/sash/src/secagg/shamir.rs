//! Threshold secret sharing of byte strings.
//!
//! A secret is packed little-endian into 61-bit chunks; every chunk is a
//! canonical element of the sharing field, so packing never needs carry
//! handling and reconstruction is bit-exact. Each chunk gets its own
//! random degree t-1 polynomial with the chunk as constant term; a share
//! carries one evaluation of every chunk polynomial at the holder's
//! nonzero index. Any t distinct shares reconstruct by Lagrange
//! interpolation at zero; t-1 shares carry no information about the
//! secret.

use rand::{Rng, RngCore};
use thiserror::Error;

use super::field;

/// Bits of secret packed per field element.
pub const CHUNK_BITS: u32 = 61;

#[derive(Debug, Error)]
pub enum ShamirError {
    #[error("threshold must satisfy 1 < t <= n, got t={t}, n={n}")]
    BadThreshold { t: usize, n: usize },
    #[error("share index must be a nonzero field element")]
    ZeroIndex,
    #[error("duplicate share index {0}")]
    DuplicateIndex(u64),
    #[error("{got} shares below threshold {needed}")]
    TooFewShares { got: usize, needed: usize },
    #[error("shares disagree on secret length")]
    LengthMismatch,
    #[error("malformed share bytes")]
    BadEncoding,
}

/// One holder's share: evaluations of every chunk polynomial at `index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShamirShare {
    pub index: u64,
    pub byte_len: u32,
    pub values: Vec<u64>,
}

impl ShamirShare {
    /// Wire form: index u64, byte_len u32, chunk count u32, chunks u64
    /// each, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.values.len());
        out.extend_from_slice(&self.index.to_le_bytes());
        out.extend_from_slice(&self.byte_len.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ShamirError> {
        if bytes.len() < 16 {
            return Err(ShamirError::BadEncoding);
        }
        let index = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let byte_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        if bytes.len() != 16 + 8 * count {
            return Err(ShamirError::BadEncoding);
        }
        let mut values = Vec::with_capacity(count);
        for i in 0..count {
            let start = 16 + 8 * i;
            values.push(u64::from_le_bytes(
                bytes[start..start + 8].try_into().unwrap(),
            ));
        }
        Ok(ShamirShare {
            index,
            byte_len,
            values,
        })
    }
}

pub fn chunk_count(byte_len: usize) -> usize {
    (byte_len * 8).div_ceil(CHUNK_BITS as usize)
}

fn bytes_to_chunks(bytes: &[u8]) -> Vec<u64> {
    let mut chunks = Vec::with_capacity(chunk_count(bytes.len()));
    let mask = (1u128 << CHUNK_BITS) - 1;
    let mut acc: u128 = 0;
    let mut nbits = 0u32;
    for &b in bytes {
        acc |= (b as u128) << nbits;
        nbits += 8;
        if nbits >= CHUNK_BITS {
            chunks.push((acc & mask) as u64);
            acc >>= CHUNK_BITS;
            nbits -= CHUNK_BITS;
        }
    }
    if nbits > 0 {
        chunks.push(acc as u64);
    }
    chunks
}

fn chunks_to_bytes(chunks: &[u64], byte_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(byte_len);
    let mut acc: u128 = 0;
    let mut nbits = 0u32;
    for &c in chunks {
        acc |= (c as u128) << nbits;
        nbits += CHUNK_BITS;
        while nbits >= 8 && out.len() < byte_len {
            out.push((acc & 0xff) as u8);
            acc >>= 8;
            nbits -= 8;
        }
    }
    while out.len() < byte_len {
        out.push((acc & 0xff) as u8);
        acc >>= 8;
    }
    out
}

/// Shares `secret` at the given distinct nonzero indices with threshold
/// `t`. The protocol passes client ids plus one.
pub fn shamir_share_at(
    secret: &[u8],
    t: usize,
    indices: &[u64],
    rng: &mut impl RngCore,
) -> Result<Vec<ShamirShare>, ShamirError> {
    let n = indices.len();
    if t < 2 || t > n {
        return Err(ShamirError::BadThreshold { t, n });
    }
    let mut seen = std::collections::BTreeSet::new();
    for &idx in indices {
        if idx == 0 || idx >= field::P {
            return Err(ShamirError::ZeroIndex);
        }
        if !seen.insert(idx) {
            return Err(ShamirError::DuplicateIndex(idx));
        }
    }
    let chunks = bytes_to_chunks(secret);
    // One polynomial per chunk: coeffs[c][0] is the chunk itself.
    let polys: Vec<Vec<u64>> = chunks
        .iter()
        .map(|&c| {
            let mut coeffs = Vec::with_capacity(t);
            coeffs.push(c);
            for _ in 1..t {
                coeffs.push(rng.gen_range(0..field::P));
            }
            coeffs
        })
        .collect();
    let shares = indices
        .iter()
        .map(|&x| {
            let values = polys
                .iter()
                .map(|coeffs| {
                    // Horner, highest coefficient first.
                    let mut acc = 0u64;
                    for &c in coeffs.iter().rev() {
                        acc = field::add(field::mul(acc, x), c);
                    }
                    acc
                })
                .collect();
            ShamirShare {
                index: x,
                byte_len: secret.len() as u32,
                values,
            }
        })
        .collect();
    Ok(shares)
}

/// Spec-shaped convenience: n shares at indices 1..=n.
pub fn shamir_share(
    secret: &[u8],
    t: usize,
    n: usize,
    rng: &mut impl RngCore,
) -> Result<Vec<ShamirShare>, ShamirError> {
    let indices: Vec<u64> = (1..=n as u64).collect();
    shamir_share_at(secret, t, &indices, rng)
}

/// Reconstructs from at least `t` shares. Shares are sorted by index and
/// the lowest t are interpolated, so the result is deterministic in the
/// share set.
pub fn shamir_reconstruct(shares: &[ShamirShare], t: usize) -> Result<Vec<u8>, ShamirError> {
    if shares.len() < t || t < 2 {
        return Err(ShamirError::TooFewShares {
            got: shares.len(),
            needed: t.max(2),
        });
    }
    let mut sorted: Vec<&ShamirShare> = shares.iter().collect();
    sorted.sort_by_key(|s| s.index);
    for pair in sorted.windows(2) {
        if pair[0].index == pair[1].index {
            return Err(ShamirError::DuplicateIndex(pair[0].index));
        }
    }
    let picked = &sorted[..t];
    let byte_len = picked[0].byte_len;
    let n_chunks = picked[0].values.len();
    if picked
        .iter()
        .any(|s| s.byte_len != byte_len || s.values.len() != n_chunks)
    {
        return Err(ShamirError::LengthMismatch);
    }
    if n_chunks != chunk_count(byte_len as usize) {
        return Err(ShamirError::LengthMismatch);
    }
    // Lagrange basis at zero: l_i = prod_{j != i} x_j / (x_j - x_i).
    let mut lagrange = Vec::with_capacity(t);
    for (i, si) in picked.iter().enumerate() {
        let mut num = 1u64;
        let mut den = 1u64;
        for (j, sj) in picked.iter().enumerate() {
            if i == j {
                continue;
            }
            num = field::mul(num, sj.index % field::P);
            den = field::mul(den, field::sub(sj.index % field::P, si.index % field::P));
        }
        let den_inv = field::inv(den).expect("distinct indices give nonzero denominator");
        lagrange.push(field::mul(num, den_inv));
    }
    let mut chunks = Vec::with_capacity(n_chunks);
    for c in 0..n_chunks {
        let mut acc = 0u64;
        for (i, s) in picked.iter().enumerate() {
            acc = field::add(acc, field::mul(lagrange[i], s.values[c]));
        }
        chunks.push(acc);
    }
    Ok(chunks_to_bytes(&chunks, byte_len as usize))
}
