//! Prime field for secret sharing: p = 2^64 - 2^32 + 1.
//!
//! The modulus is large enough that any 61-bit chunk of a byte string is
//! a canonical field element, which keeps secret chunking carry-free.
//! Reduction uses 2^64 = eps (mod p) and 2^96 = -1 (mod p) with
//! eps = 2^32 - 1, so a 128-bit product folds in a handful of adds.

/// The field order.
pub const P: u64 = 0xFFFF_FFFF_0000_0001;

const EPSILON: u64 = 0xFFFF_FFFF; // 2^64 mod P

#[inline]
pub fn reduce128(x: u128) -> u64 {
    let lo = x as u64;
    let hi = (x >> 64) as u64;
    let hi_lo = hi & EPSILON;
    let hi_hi = hi >> 32;
    // x = lo + eps * hi_lo - hi_hi (mod P)
    let (mut s, borrow) = lo.overflowing_sub(hi_hi);
    if borrow {
        s = s.wrapping_add(P);
    }
    let t = EPSILON * hi_lo; // < 2^64, no overflow
    let (mut r, carry) = s.overflowing_add(t);
    if carry {
        r = r.wrapping_add(EPSILON);
    }
    if r >= P {
        r -= P;
    }
    r
}

#[inline]
pub fn add(a: u64, b: u64) -> u64 {
    debug_assert!(a < P && b < P);
    let (s, carry) = a.overflowing_add(b);
    let mut r = if carry { s.wrapping_add(EPSILON) } else { s };
    if r >= P {
        r -= P;
    }
    r
}

#[inline]
pub fn sub(a: u64, b: u64) -> u64 {
    debug_assert!(a < P && b < P);
    let (d, borrow) = a.overflowing_sub(b);
    if borrow {
        d.wrapping_add(P)
    } else {
        d
    }
}

#[inline]
pub fn mul(a: u64, b: u64) -> u64 {
    debug_assert!(a < P && b < P);
    reduce128(a as u128 * b as u128)
}

pub fn pow(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul(acc, base);
        }
        base = mul(base, base);
        exp >>= 1;
    }
    acc
}

/// Multiplicative inverse by Fermat. Zero has no inverse.
pub fn inv(a: u64) -> Option<u64> {
    if a == 0 {
        return None;
    }
    Some(pow(a, P - 2))
}
