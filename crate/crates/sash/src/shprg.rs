//! Seed-homomorphic PRG built from rounded inner products.
//!
//! A public matrix `A` (mu x output_len, entries mod q) is derived from a
//! short seed. Expanding a key `k` (mu entries mod q) means computing the
//! inner product of `k` with each column of `A` and rounding the result
//! from Z_q down to Z_p. Because rounding is almost linear, the expansion
//! is almost additive: for keys k_1..k_n,
//!
//! ```text
//! sum_i eval(A, k_i)  -  eval(A, sum_i k_i)   in   [-(n-1), n-1]^output_len
//! ```
//!
//! where the difference is read centered around zero mod p. Each coordinate
//! of each eval contributes at most one unit of rounding slack, and summing
//! the keys first collapses n roundings into one.
//!
//! Both moduli are powers of two, so native wrapping arithmetic on `u64`
//! is exact mod q and rounding is a shift.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShprgError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("key has {got} entries, seed dimension is {expected}")]
    KeyLength { expected: usize, got: usize },
    #[error("empty key list")]
    EmptyKeys,
    #[error("malformed parameter record: {0}")]
    BadRecord(String),
}

/// Parameters of one PRG instance. `mu` is the seed dimension, the moduli
/// are given as exponents (q = 2^big, p = 2^small), `output_len` is the
/// number of columns of the public matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShprgParams {
    pub mu: usize,
    pub big_modulus_log2: u32,
    pub small_modulus_log2: u32,
    pub output_len: usize,
    pub matrix_seed: [u8; 32],
}

impl ShprgParams {
    /// Default instantiation: mu = 512, q = 2^64, p = 2^32.
    pub fn desk_default(output_len: usize, matrix_seed: [u8; 32]) -> Self {
        ShprgParams {
            mu: 512,
            big_modulus_log2: 64,
            small_modulus_log2: 32,
            output_len,
            matrix_seed,
        }
    }

    pub fn validate(&self) -> Result<(), ShprgError> {
        if self.mu == 0 {
            return Err(ShprgError::InvalidParams("mu must be positive"));
        }
        if self.output_len <= self.mu {
            return Err(ShprgError::InvalidParams(
                "output_len must exceed mu or expansion gains nothing",
            ));
        }
        if self.small_modulus_log2 == 0 || self.small_modulus_log2 >= self.big_modulus_log2 {
            return Err(ShprgError::InvalidParams(
                "moduli must satisfy 1 <= small < big",
            ));
        }
        if self.big_modulus_log2 > 64 {
            return Err(ShprgError::InvalidParams("big modulus exceeds u64"));
        }
        // Rounding security needs q/p >= sqrt(mu), i.e. 4^(big-small) >= mu.
        let gap = self.big_modulus_log2 - self.small_modulus_log2;
        if gap < 64 && (1u128 << (2 * gap)) < self.mu as u128 {
            return Err(ShprgError::InvalidParams(
                "modulus gap too small for seed dimension (need q/p >= sqrt(mu))",
            ));
        }
        Ok(())
    }

    /// Low-bits mask for values mod q. All-ones when q = 2^64.
    #[inline]
    pub fn q_mask(&self) -> u64 {
        mask_for(self.big_modulus_log2)
    }

    /// Low-bits mask for values mod p.
    #[inline]
    pub fn p_mask(&self) -> u64 {
        mask_for(self.small_modulus_log2)
    }

    /// p as an integer. Fits in u64 because small_modulus_log2 < 64.
    #[inline]
    pub fn small_modulus(&self) -> u64 {
        1u64 << self.small_modulus_log2
    }

    /// Flat key=value record, one pair per line. Stable export order.
    pub fn to_record(&self) -> String {
        format!(
            "mu={}\nbig_modulus_log2={}\nsmall_modulus_log2={}\noutput_len={}\nmatrix_seed={}\n",
            self.mu,
            self.big_modulus_log2,
            self.small_modulus_log2,
            self.output_len,
            hex::encode(self.matrix_seed),
        )
    }

    pub fn from_record(text: &str) -> Result<Self, ShprgError> {
        let mut mu = None;
        let mut big = None;
        let mut small = None;
        let mut output_len = None;
        let mut matrix_seed = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ShprgError::BadRecord(format!("missing '=' in line {line:?}")))?;
            let bad = |_| ShprgError::BadRecord(format!("bad value for {key}"));
            match key {
                "mu" => mu = Some(value.parse().map_err(bad)?),
                "big_modulus_log2" => big = Some(value.parse().map_err(bad)?),
                "small_modulus_log2" => small = Some(value.parse().map_err(bad)?),
                "output_len" => output_len = Some(value.parse().map_err(bad)?),
                "matrix_seed" => {
                    let bytes = hex::decode(value)
                        .map_err(|_| ShprgError::BadRecord("bad hex in matrix_seed".into()))?;
                    let arr: [u8; 32] = bytes
                        .try_into()
                        .map_err(|_| ShprgError::BadRecord("matrix_seed must be 32 bytes".into()))?;
                    matrix_seed = Some(arr);
                }
                other => return Err(ShprgError::BadRecord(format!("unknown key {other:?}"))),
            }
        }
        let params = ShprgParams {
            mu: mu.ok_or_else(|| ShprgError::BadRecord("missing mu".into()))?,
            big_modulus_log2: big
                .ok_or_else(|| ShprgError::BadRecord("missing big_modulus_log2".into()))?,
            small_modulus_log2: small
                .ok_or_else(|| ShprgError::BadRecord("missing small_modulus_log2".into()))?,
            output_len: output_len
                .ok_or_else(|| ShprgError::BadRecord("missing output_len".into()))?,
            matrix_seed: matrix_seed
                .ok_or_else(|| ShprgError::BadRecord("missing matrix_seed".into()))?,
        };
        params.validate()?;
        Ok(params)
    }
}

#[inline]
fn mask_for(log2: u32) -> u64 {
    if log2 >= 64 {
        u64::MAX
    } else {
        (1u64 << log2) - 1
    }
}

/// A PRG key: mu entries mod q. Keys add coordinate-wise mod q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskingKey(pub Vec<u64>);

impl MaskingKey {
    pub fn random(rng: &mut impl RngCore, params: &ShprgParams) -> Self {
        let mask = params.q_mask();
        MaskingKey((0..params.mu).map(|_| rng.next_u64() & mask).collect())
    }

    pub fn zero(params: &ShprgParams) -> Self {
        MaskingKey(vec![0; params.mu])
    }
}

/// One expanded mask: output_len entries mod p.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskVector(pub Vec<u64>);

/// Columns per storage block. Eight u64 lanes fill one cache line, so the
/// eval kernel runs eight inner products in lockstep with vertical adds
/// only, and the matrix is read as a single forward stream.
const LANES: usize = 8;

/// The public matrix. Columns are stored interleaved in groups of
/// [`LANES`]: within a block, a row holds that row's entry for each of the
/// block's columns. The column count is padded up to a multiple of the
/// block width with zero columns.
pub struct PublicMatrix {
    params: ShprgParams,
    entries: Vec<u64>,
}

impl PublicMatrix {
    pub fn params(&self) -> &ShprgParams {
        &self.params
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        (col / LANES) * self.params.mu * LANES + row * LANES + col % LANES
    }

    /// Entry at (row, col). Row indexes the seed dimension.
    pub fn entry(&self, row: usize, col: usize) -> u64 {
        self.entries[self.slot(row, col)]
    }

    #[cfg(test)]
    fn from_entries_unchecked(params: ShprgParams, col_major: Vec<u64>) -> Self {
        assert_eq!(col_major.len(), params.mu * params.output_len);
        let padded = params.output_len.next_multiple_of(LANES);
        let mut matrix = PublicMatrix {
            entries: vec![0; params.mu * padded],
            params,
        };
        for col in 0..matrix.params.output_len {
            for row in 0..matrix.params.mu {
                let slot = matrix.slot(row, col);
                matrix.entries[slot] = col_major[col * matrix.params.mu + row];
            }
        }
        matrix
    }
}

/// Expands the matrix seed into the full public matrix. Entries are drawn
/// from a seeded stream cipher and reduced mod q, assigned column by
/// column. Deterministic in the seed; both parties derive the same matrix.
pub fn derive_matrix(params: &ShprgParams) -> Result<PublicMatrix, ShprgError> {
    params.validate()?;
    let mut rng = ChaCha20Rng::from_seed(params.matrix_seed);
    let mask = params.q_mask();
    let padded = params.output_len.next_multiple_of(LANES);
    let mut matrix = PublicMatrix {
        entries: vec![0; params.mu * padded],
        params: params.clone(),
    };
    for col in 0..params.output_len {
        for row in 0..params.mu {
            let slot = matrix.slot(row, col);
            matrix.entries[slot] = rng.next_u64() & mask;
        }
    }
    Ok(matrix)
}

/// Rounds x from Z_q to Z_p: round(x * p / q) mod p, half rounds up.
/// With q = 2^64 the bias add wraps exactly like the modular sum it
/// represents, so the expression stays correct at the boundary.
#[inline]
pub fn round_scale(x: u64, params: &ShprgParams) -> u64 {
    let shift = params.big_modulus_log2 - params.small_modulus_log2;
    let half = 1u64 << (shift - 1);
    x.wrapping_add(half) >> shift & params.p_mask()
}

static EVAL_CALLS: AtomicU64 = AtomicU64::new(0);
static EVAL_COORDS: AtomicU64 = AtomicU64::new(0);

/// Running totals of (eval invocations, output coordinates produced) since
/// process start. Tests diff snapshots to pin down exactly how many
/// expansions a protocol run performs.
pub fn eval_stats() -> (u64, u64) {
    (
        EVAL_CALLS.load(Ordering::Relaxed),
        EVAL_COORDS.load(Ordering::Relaxed),
    )
}

/// G(k): inner product of the key with each matrix column mod q, rounded
/// to Z_p. The accumulator wraps mod 2^64 and is masked down to q at the
/// end, which is exact because q divides 2^64.
pub fn eval(matrix: &PublicMatrix, key: &MaskingKey) -> Result<MaskVector, ShprgError> {
    let params = &matrix.params;
    if key.0.len() != params.mu {
        return Err(ShprgError::KeyLength {
            expected: params.mu,
            got: key.0.len(),
        });
    }
    let q_mask = params.q_mask();
    let mut out = Vec::with_capacity(matrix.entries.len() / params.mu);
    #[cfg(target_arch = "x86_64")]
    let wide = std::is_x86_feature_detected!("avx512dq");
    #[cfg(not(target_arch = "x86_64"))]
    let wide = false;
    for block in matrix.entries.chunks_exact(params.mu * LANES) {
        let mut acc = [0u64; LANES];
        if wide {
            #[cfg(target_arch = "x86_64")]
            // Safety: avx512dq was detected above and the chunking
            // guarantees block.len() == key.len() * LANES.
            unsafe {
                block_dot_avx512(block, &key.0, &mut acc);
            }
        } else {
            block_dot_portable(block, &key.0, &mut acc);
        }
        for a in acc {
            out.push(round_scale(a & q_mask, params));
        }
    }
    out.truncate(params.output_len);
    EVAL_CALLS.fetch_add(1, Ordering::Relaxed);
    EVAL_COORDS.fetch_add(params.output_len as u64, Ordering::Relaxed);
    Ok(MaskVector(out))
}

/// Accumulates one storage block: acc[l] += sum_row key[row] * block[row
/// * LANES + l], wrapping mod 2^64.
fn block_dot_portable(block: &[u64], key: &[u64], acc: &mut [u64; LANES]) {
    for (k, cell) in key.iter().zip(block.chunks_exact(LANES)) {
        for (a, &e) in acc.iter_mut().zip(cell) {
            *a = a.wrapping_add(k.wrapping_mul(e));
        }
    }
}

/// Same contract as [`block_dot_portable`]. One 512-bit accumulator lane
/// per output column; the matrix block is consumed as a single forward
/// stream of full cache lines.
///
/// Safety: caller must ensure avx512dq is available and block.len() ==
/// key.len() * LANES.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,avx512dq")]
unsafe fn block_dot_avx512(block: &[u64], key: &[u64], acc: &mut [u64; LANES]) {
    use core::arch::x86_64::*;
    debug_assert_eq!(block.len(), key.len() * LANES);
    let mut acc0 = _mm512_loadu_si512(acc.as_ptr() as *const _);
    let mut acc1 = _mm512_setzero_si512();
    let mut acc2 = _mm512_setzero_si512();
    let mut acc3 = _mm512_setzero_si512();
    let mut ptr = block.as_ptr();
    let mut rows = key.chunks_exact(4);
    for quad in &mut rows {
        _mm_prefetch(ptr.add(64 * LANES) as *const i8, _MM_HINT_T0);
        _mm_prefetch(ptr.add(64 * LANES + 8) as *const i8, _MM_HINT_T0);
        _mm_prefetch(ptr.add(64 * LANES + 16) as *const i8, _MM_HINT_T0);
        _mm_prefetch(ptr.add(64 * LANES + 24) as *const i8, _MM_HINT_T0);
        let r0 = _mm512_loadu_si512(ptr as *const _);
        let r1 = _mm512_loadu_si512(ptr.add(LANES) as *const _);
        let r2 = _mm512_loadu_si512(ptr.add(2 * LANES) as *const _);
        let r3 = _mm512_loadu_si512(ptr.add(3 * LANES) as *const _);
        let k0 = _mm512_set1_epi64(quad[0] as i64);
        let k1 = _mm512_set1_epi64(quad[1] as i64);
        let k2 = _mm512_set1_epi64(quad[2] as i64);
        let k3 = _mm512_set1_epi64(quad[3] as i64);
        acc0 = _mm512_add_epi64(acc0, _mm512_mullo_epi64(r0, k0));
        acc1 = _mm512_add_epi64(acc1, _mm512_mullo_epi64(r1, k1));
        acc2 = _mm512_add_epi64(acc2, _mm512_mullo_epi64(r2, k2));
        acc3 = _mm512_add_epi64(acc3, _mm512_mullo_epi64(r3, k3));
        ptr = ptr.add(4 * LANES);
    }
    for &k in rows.remainder() {
        let kv = _mm512_set1_epi64(k as i64);
        let row = _mm512_loadu_si512(ptr as *const _);
        acc0 = _mm512_add_epi64(acc0, _mm512_mullo_epi64(row, kv));
        ptr = ptr.add(LANES);
    }
    acc0 = _mm512_add_epi64(acc0, acc1);
    acc2 = _mm512_add_epi64(acc2, acc3);
    acc0 = _mm512_add_epi64(acc0, acc2);
    _mm512_storeu_si512(acc.as_mut_ptr() as *mut _, acc0);
}

/// Coordinate-wise key sum mod q. The server expands the sum once instead
/// of expanding every key.
pub fn key_sum(keys: &[MaskingKey], params: &ShprgParams) -> Result<MaskingKey, ShprgError> {
    if keys.is_empty() {
        return Err(ShprgError::EmptyKeys);
    }
    let mask = params.q_mask();
    let mut acc = vec![0u64; params.mu];
    for key in keys {
        if key.0.len() != params.mu {
            return Err(ShprgError::KeyLength {
                expected: params.mu,
                got: key.0.len(),
            });
        }
        for (a, k) in acc.iter_mut().zip(key.0.iter()) {
            *a = a.wrapping_add(*k) & mask;
        }
    }
    Ok(MaskingKey(acc))
}

/// Centers a mod-p difference into (-p/2, p/2].
pub fn center(diff: u64, params: &ShprgParams) -> i64 {
    let p = params.small_modulus();
    debug_assert!(diff < p);
    if diff > p / 2 {
        diff as i64 - p as i64
    } else {
        diff as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_params() -> ShprgParams {
        ShprgParams {
            mu: 16,
            big_modulus_log2: 64,
            small_modulus_log2: 32,
            output_len: 64,
            matrix_seed: [7; 32],
        }
    }

    #[test]
    fn derive_is_deterministic() {
        let params = tiny_params();
        let a = derive_matrix(&params).unwrap();
        let b = derive_matrix(&params).unwrap();
        assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn distinct_seeds_give_distinct_matrices() {
        let mut other = tiny_params();
        other.matrix_seed = [8; 32];
        let a = derive_matrix(&tiny_params()).unwrap();
        let b = derive_matrix(&other).unwrap();
        assert_ne!(a.entries, b.entries);
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let mut p = tiny_params();
        p.output_len = 16;
        assert!(p.validate().is_err(), "output_len must exceed mu");

        let mut p = tiny_params();
        p.small_modulus_log2 = 64;
        assert!(p.validate().is_err());

        // Gap of 1 bit gives q/p = 2 < sqrt(1024).
        let mut p = tiny_params();
        p.mu = 1024;
        p.output_len = 2048;
        p.small_modulus_log2 = 63;
        assert!(p.validate().is_err());

        // sqrt(512) needs a 5 bit gap: 4^5 = 1024 >= 512, 4^4 = 256 < 512.
        let mut p = tiny_params();
        p.mu = 512;
        p.output_len = 1024;
        p.small_modulus_log2 = 59;
        assert!(p.validate().is_ok());
        p.small_modulus_log2 = 60;
        assert!(p.validate().is_err());
    }

    #[test]
    fn round_scale_known_values() {
        let params = tiny_params();
        assert_eq!(round_scale(0, &params), 0);
        // Exactly halfway between 0 and 1 in Z_p: rounds up.
        assert_eq!(round_scale(1u64 << 31, &params), 1);
        assert_eq!(round_scale(1u64 << 32, &params), 1);
        assert_eq!(round_scale((1u64 << 31) - 1, &params), 0);
        // Top of Z_q wraps to 0 mod p.
        assert_eq!(round_scale(u64::MAX, &params), 0);
    }

    #[test]
    fn round_scale_narrow_moduli() {
        let params = ShprgParams {
            mu: 4,
            big_modulus_log2: 16,
            small_modulus_log2: 8,
            output_len: 8,
            matrix_seed: [0; 32],
        };
        // x = 300: 300 * 256 / 65536 = 1.17, rounds to 1.
        assert_eq!(round_scale(300, &params), 1);
        // x = 65535: rounds to 256 which is 0 mod p.
        assert_eq!(round_scale(65535, &params), 0);
        // x = 65407 maps to 255.49.. so it stays at 255.
        assert_eq!(round_scale(65407, &params), 255);
    }

    #[test]
    fn eval_zero_key_is_zero() {
        let params = tiny_params();
        let matrix = derive_matrix(&params).unwrap();
        let out = eval(&matrix, &MaskingKey::zero(&params)).unwrap();
        assert!(out.0.iter().all(|&x| x == 0));
    }

    #[test]
    fn eval_hand_computed_single_cell() {
        // One row, one column, A = [q/2] as a bare inner product check:
        // 2 * 2^63 wraps to 0 mod q, which rounds to 0.
        let params = ShprgParams {
            mu: 1,
            big_modulus_log2: 64,
            small_modulus_log2: 32,
            output_len: 1,
            matrix_seed: [0; 32],
        };
        let matrix = PublicMatrix::from_entries_unchecked(params.clone(), vec![1u64 << 63]);
        let out = eval(&matrix, &MaskingKey(vec![2])).unwrap();
        assert_eq!(out.0, vec![0]);
        // Key 1 leaves q/2 in place, which rounds to p/2.
        let out = eval(&matrix, &MaskingKey(vec![1])).unwrap();
        assert_eq!(out.0, vec![1u64 << 31]);
    }

    #[test]
    fn eval_outputs_stay_below_p() {
        let params = tiny_params();
        let matrix = derive_matrix(&params).unwrap();
        let mut rng = ChaCha20Rng::from_seed([3; 32]);
        for _ in 0..50 {
            let key = MaskingKey::random(&mut rng, &params);
            let out = eval(&matrix, &key).unwrap();
            assert!(out.0.iter().all(|&x| x < params.small_modulus()));
        }
    }

    #[test]
    fn eval_rejects_wrong_key_length() {
        let params = tiny_params();
        let matrix = derive_matrix(&params).unwrap();
        let err = eval(&matrix, &MaskingKey(vec![0; 3])).unwrap_err();
        assert!(matches!(err, ShprgError::KeyLength { expected: 16, got: 3 }));
    }

    #[test]
    fn key_sum_matches_naive_and_handles_identity() {
        let params = tiny_params();
        let mut rng = ChaCha20Rng::from_seed([9; 32]);
        let keys: Vec<MaskingKey> = (0..5)
            .map(|_| MaskingKey::random(&mut rng, &params))
            .collect();
        let sum = key_sum(&keys, &params).unwrap();
        for i in 0..params.mu {
            let mut acc = 0u64;
            for k in &keys {
                acc = acc.wrapping_add(k.0[i]);
            }
            assert_eq!(sum.0[i], acc);
        }
        // Adding the zero key changes nothing.
        let mut with_zero = keys.clone();
        with_zero.push(MaskingKey::zero(&params));
        assert_eq!(key_sum(&with_zero, &params).unwrap(), sum);
        // Adding the negation cancels.
        let neg = MaskingKey(keys[0].0.iter().map(|&x| x.wrapping_neg()).collect());
        let pair = key_sum(&[keys[0].clone(), neg], &params).unwrap();
        assert_eq!(pair, MaskingKey::zero(&params));
        assert!(matches!(
            key_sum(&[], &params),
            Err(ShprgError::EmptyKeys)
        ));
    }

    #[test]
    fn pairwise_almost_homomorphism() {
        let params = tiny_params();
        let matrix = derive_matrix(&params).unwrap();
        let p = params.small_modulus();
        let mut rng = ChaCha20Rng::from_seed([21; 32]);
        for _ in 0..200 {
            let k1 = MaskingKey::random(&mut rng, &params);
            let k2 = MaskingKey::random(&mut rng, &params);
            let g1 = eval(&matrix, &k1).unwrap();
            let g2 = eval(&matrix, &k2).unwrap();
            let ks = key_sum(&[k1, k2], &params).unwrap();
            let gs = eval(&matrix, &ks).unwrap();
            for i in 0..params.output_len {
                let diff = (g1.0[i] + g2.0[i]) % p;
                let diff = (diff + p - gs.0[i]) % p;
                let centered = center(diff, &params);
                assert!(centered.abs() <= 1, "pair discrepancy {centered} at {i}");
            }
        }
    }

    #[test]
    fn n_way_almost_homomorphism_small() {
        let params = tiny_params();
        let matrix = derive_matrix(&params).unwrap();
        let p = params.small_modulus();
        let mut rng = ChaCha20Rng::from_seed([22; 32]);
        for n in [3usize, 7, 20] {
            let keys: Vec<MaskingKey> = (0..n)
                .map(|_| MaskingKey::random(&mut rng, &params))
                .collect();
            let evals: Vec<MaskVector> =
                keys.iter().map(|k| eval(&matrix, k).unwrap()).collect();
            let gs = eval(&matrix, &key_sum(&keys, &params).unwrap()).unwrap();
            for i in 0..params.output_len {
                let mut acc = 0u64;
                for e in &evals {
                    acc = (acc + e.0[i]) % p;
                }
                let diff = (acc + p - gs.0[i]) % p;
                let centered = center(diff, &params);
                assert!(
                    centered.unsigned_abs() <= (n - 1) as u64,
                    "n={n} discrepancy {centered} at {i}"
                );
            }
        }
    }

    #[test]
    fn eval_stats_advance_per_call() {
        let params = tiny_params();
        let matrix = derive_matrix(&params).unwrap();
        let key = MaskingKey::zero(&params);
        let (calls0, coords0) = eval_stats();
        eval(&matrix, &key).unwrap();
        eval(&matrix, &key).unwrap();
        let (calls1, coords1) = eval_stats();
        assert_eq!(calls1 - calls0, 2);
        assert_eq!(coords1 - coords0, 2 * params.output_len as u64);
    }

    #[test]
    fn record_round_trip() {
        let params = ShprgParams::desk_default(4096, [0xab; 32]);
        let text = params.to_record();
        let back = ShprgParams::from_record(&text).unwrap();
        assert_eq!(back, params);
        assert!(ShprgParams::from_record("mu=512\n").is_err());
        assert!(ShprgParams::from_record("nonsense").is_err());
    }

    #[test]
    fn matrix_derivation_is_fast_enough_at_working_size() {
        use std::time::Instant;
        let params = ShprgParams::desk_default(100_000, [1; 32]);
        let start = Instant::now();
        let matrix = derive_matrix(&params).unwrap();
        let elapsed = start.elapsed();
        assert_eq!(matrix.entries.len(), 512 * 100_000);
        assert!(
            elapsed.as_secs_f64() < 3.0,
            "matrix derivation took {elapsed:?}"
        );
    }

    #[test]
    fn random_keys_differ() {
        let params = tiny_params();
        let mut rng = ChaCha20Rng::from_seed([5; 32]);
        let a = MaskingKey::random(&mut rng, &params);
        let b = MaskingKey::random(&mut rng, &params);
        assert_ne!(a, b);
        assert_eq!(a.0.len(), params.mu);
    }
}
