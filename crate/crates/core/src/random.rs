//! Seedable sampling helpers over a plain [`RngCore`].
//!
//! Everything in this crate takes an injected RNG so that keys, ciphertexts
//! and experiments are reproducible from a seed.

use alloc::vec::Vec;

use num_bigint::BigUint;
use rand_core::RngCore;

use crate::math;

/// Uniform draw from `[0, 1)` with 53 bits of precision.
pub fn uniform_01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    (rng.next_u64() >> 11) as f64 * SCALE
}

/// Uniform draw from `[lo, hi)`.
pub fn uniform_in<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform_01(rng)
}

/// Standard normal via the Box-Muller transform.
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let mut u1 = uniform_01(rng);
    // Keep ln() off the -inf pole.
    while u1 <= 0.0 {
        u1 = uniform_01(rng);
    }
    let u2 = uniform_01(rng);
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}

/// Unbiased uniform draw from `[0, bound)`.
///
/// Panics if `bound` is zero.
pub fn usize_below<R: RngCore + ?Sized>(rng: &mut R, bound: usize) -> usize {
    assert!(bound > 0, "empty sampling range");
    let bound = bound as u64;
    let zone = u64::MAX - u64::MAX % bound;
    loop {
        let x = rng.next_u64();
        if x < zone {
            return (x % bound) as usize;
        }
    }
}

/// `count` distinct indices from `[0, range)`, sorted ascending.
pub fn distinct_sorted_indices<R: RngCore + ?Sized>(
    rng: &mut R,
    count: usize,
    range: usize,
) -> Vec<usize> {
    assert!(count <= range, "cannot draw {count} distinct from {range}");
    // Partial Fisher-Yates over an index pool.
    let mut pool: Vec<usize> = (0..range).collect();
    let mut picked = Vec::with_capacity(count);
    for i in 0..count {
        let j = i + usize_below(rng, range - i);
        pool.swap(i, j);
        picked.push(pool[i]);
    }
    picked.sort_unstable();
    picked
}

/// Uniform residue in `[0, bound)` by rejection sampling on raw bytes.
///
/// Panics if `bound` is zero.
pub fn biguint_below<R: RngCore + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    use num_bigint::BigUint as B;
    assert!(*bound > B::from(0u8), "empty sampling range");
    let bits = bound.bits();
    let bytes = bits.div_ceil(8) as usize;
    let top_mask: u8 = if bits.is_multiple_of(8) {
        0xff
    } else {
        (1u8 << (bits % 8)) - 1
    };
    let mut buf = alloc::vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= top_mask;
        let candidate = B::from_bytes_be(&buf);
        if candidate < *bound {
            return candidate;
        }
    }
}
