//! Fixed-point quantization of real model updates.
//!
//! Masking works over Z_p, so every client maps its real-valued update
//! into w-bit levels before masking. The map is affine over a fixed public
//! range [m_min, m_max): values clip to the range, then scale to an
//! integer in [0, 2^w - 1]. Summing N quantized updates stays below
//! N * (2^w - 1), so p at least N * (2^w - 1) + 1 keeps honest sums from
//! wrapping and leaves the top of Z_p free to represent small negative
//! rounding noise.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("invalid quantizer config: {0}")]
    BadConfig(&'static str),
    #[error("update coordinate {index} is not finite")]
    NonFinite { index: usize },
    #[error("modulus 2^{p_log2} too small: need at least {required} for n_max={n_max}")]
    ModulusTooSmall {
        p_log2: u32,
        required: u128,
        n_max: usize,
    },
    #[error("coordinate {index} value {value} landed in the dead zone between valid sums and wrapped negatives")]
    DeadZone { index: usize, value: u64 },
    #[error("survivor count ({n2}) exceeds configured n_max ({n_max})")]
    TooManySurvivors { n2: usize, n_max: usize },
}

/// Public quantizer parameters shared by all parties.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantConfig {
    /// Bits per coordinate after quantization.
    pub w: u32,
    pub m_min: f64,
    pub m_max: f64,
    /// Largest survivor count the modulus must accommodate.
    pub n_max: usize,
}

impl QuantConfig {
    /// Default instantiation: w = 16 over [-1, 1).
    pub fn desk_default(n_max: usize) -> Self {
        QuantConfig {
            w: 16,
            m_min: -1.0,
            m_max: 1.0,
            n_max,
        }
    }

    pub fn validate(&self) -> Result<(), QuantError> {
        if self.w == 0 || self.w > 31 {
            return Err(QuantError::BadConfig("w must be in 1..=31"));
        }
        if !self.m_min.is_finite() || !self.m_max.is_finite() || self.m_min >= self.m_max {
            return Err(QuantError::BadConfig("need finite m_min < m_max"));
        }
        if self.n_max == 0 {
            return Err(QuantError::BadConfig("n_max must be positive"));
        }
        Ok(())
    }

    /// Number of levels, 2^w.
    #[inline]
    pub fn levels(&self) -> u64 {
        1u64 << self.w
    }

    /// Width of one quantization step.
    #[inline]
    pub fn step(&self) -> f64 {
        (self.m_max - self.m_min) / self.levels() as f64
    }

    /// Checks that p = 2^p_log2 fits n_max full-scale summands:
    /// p >= n_max * (2^w - 1) + 1.
    pub fn validate_modulus(&self, p_log2: u32) -> Result<(), QuantError> {
        self.validate()?;
        let required = self.n_max as u128 * (self.levels() as u128 - 1) + 1;
        let p = 1u128 << p_log2;
        if p < required {
            return Err(QuantError::ModulusTooSmall {
                p_log2,
                required,
                n_max: self.n_max,
            });
        }
        Ok(())
    }
}

/// One quantized update: values in [0, 2^w - 1].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedVector(pub Vec<u32>);

/// Q(m): clip each coordinate into [m_min, m_max - ulp], then map affinely
/// to an integer level. Rejects non-finite coordinates rather than
/// silently clipping them.
pub fn quantize(update: &[f64], cfg: &QuantConfig) -> Result<QuantizedVector, QuantError> {
    cfg.validate()?;
    let hi = cfg.m_max.next_down();
    let scale = cfg.levels() as f64 / (cfg.m_max - cfg.m_min);
    let top = (cfg.levels() - 1) as u32;
    let mut out = Vec::with_capacity(update.len());
    for (index, &m) in update.iter().enumerate() {
        if !m.is_finite() {
            return Err(QuantError::NonFinite { index });
        }
        let clipped = m.clamp(cfg.m_min, hi);
        // The float product can graze 2^w when clipped is one ulp under
        // m_max, so clamp the level after flooring.
        let level = ((clipped - cfg.m_min) * scale).floor() as u64;
        out.push(level.min(top as u64) as u32);
    }
    Ok(QuantizedVector(out))
}

/// Inverse map for a sum of n2 quantized updates:
/// Q^-1(x) = step * x + n2 * m_min.
pub fn dequantize_sum(sum: &[u64], n2: usize, cfg: &QuantConfig) -> Vec<f64> {
    let step = cfg.step();
    let offset = n2 as f64 * cfg.m_min;
    sum.iter().map(|&x| step * x as f64 + offset).collect()
}

/// Reinterprets a demasked sum whose coordinates may carry small signed
/// rounding noise. Valid sums live in [0, n2 * (2^w - 1)]; noise can push
/// a coordinate up to n2 - 1 above that, or below zero, where it wraps to
/// the top of Z_p. Values just under p are therefore negatives and clamp
/// to 0; values beyond both bands cannot arise from an honest run and are
/// reported as corruption.
pub fn center_correct(
    x0: &[u64],
    n2: usize,
    cfg: &QuantConfig,
    p_log2: u32,
) -> Result<Vec<u64>, QuantError> {
    cfg.validate_modulus(p_log2)?;
    if n2 > cfg.n_max {
        return Err(QuantError::TooManySurvivors {
            n2,
            n_max: cfg.n_max,
        });
    }
    let p = 1u128 << p_log2;
    // Highest honest sum plus positive noise slack.
    let pass_limit = n2 as u128 * (cfg.levels() as u128 - 1) + n2 as u128;
    // Wrapped negatives occupy [p - n2, p).
    let neg_floor = p - n2 as u128;
    let mut out = Vec::with_capacity(x0.len());
    for (index, &value) in x0.iter().enumerate() {
        let v = value as u128;
        if v <= pass_limit {
            out.push(value);
        } else if v >= neg_floor {
            out.push(0);
        } else {
            return Err(QuantError::DeadZone { index, value });
        }
    }
    Ok(out)
}
