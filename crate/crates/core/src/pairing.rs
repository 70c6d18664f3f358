//! Bilinear-group contract and a transparent test instantiation.
//!
//! The contract models two prime-order groups `G` and `G_T` with a
//! non-degenerate bilinear pairing `e: G × G → G_T`. Scheme code is written
//! against the trait so a pairing-friendly curve backend can slot in later;
//! the only instantiation shipped here is [`TransparentGroup`], which
//! represents `g^a` by the residue `a` itself. That makes every group law
//! exact integer arithmetic mod `p` — ideal for bit-exact correctness tests
//! and utterly insecure (the discrete log is the identity map), which is
//! the point.

use alloc::vec::Vec;
use core::cell::Cell;
use core::fmt::Debug;

use num_bigint::BigUint;
use rand_core::RngCore;

use crate::random;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PairingError {
    #[error("group order must be a prime ≥ 2")]
    NotPrime,
    #[error("encoded element has wrong width: expected {want} bytes, got {got}")]
    BadEncodingWidth { want: usize, got: usize },
    #[error("encoded element is not reduced mod p")]
    NotReduced,
}

/// Prime-order bilinear group `(G, G_T, e, g, p)`.
///
/// `g_exp(x)` is `g^x` for the fixed generator; `gt_exp(x)` is `e(g,g)^x`.
/// All scalars are taken mod the group order.
pub trait BilinearGroup {
    type G: Clone + PartialEq + Eq + Debug;
    type Gt: Clone + PartialEq + Eq + Debug;

    fn order(&self) -> &BigUint;

    /// Instantiation name, recorded in serialized material.
    fn name(&self) -> &'static str;

    fn g_exp(&self, x: &BigUint) -> Self::G;
    fn gt_exp(&self, x: &BigUint) -> Self::Gt;
    fn g_mul(&self, a: &Self::G, b: &Self::G) -> Self::G;
    fn gt_mul(&self, a: &Self::Gt, b: &Self::Gt) -> Self::Gt;
    fn g_inv(&self, a: &Self::G) -> Self::G;
    fn gt_inv(&self, a: &Self::Gt) -> Self::Gt;
    fn g_pow(&self, a: &Self::G, x: &BigUint) -> Self::G;
    fn gt_pow(&self, a: &Self::Gt, x: &BigUint) -> Self::Gt;
    fn pair(&self, a: &Self::G, b: &Self::G) -> Self::Gt;

    fn g_identity(&self) -> Self::G {
        self.g_exp(&BigUint::from(0u8))
    }

    fn gt_identity(&self) -> Self::Gt {
        self.gt_exp(&BigUint::from(0u8))
    }

    fn generator(&self) -> Self::G {
        self.g_exp(&BigUint::from(1u8))
    }

    /// Fixed-width big-endian encoding sized to the group order.
    fn g_to_bytes(&self, a: &Self::G) -> Vec<u8>;
    fn g_from_bytes(&self, bytes: &[u8]) -> Result<Self::G, PairingError>;
    fn gt_to_bytes(&self, a: &Self::Gt) -> Vec<u8>;
    fn gt_from_bytes(&self, bytes: &[u8]) -> Result<Self::Gt, PairingError>;
}

/// `G` element in the transparent instantiation: the exponent residue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GElem(BigUint);

/// `G_T` element in the transparent instantiation: the exponent residue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtElem(BigUint);

impl GElem {
    pub fn residue(&self) -> &BigUint {
        &self.0
    }
}

impl GtElem {
    pub fn residue(&self) -> &BigUint {
        &self.0
    }
}

/// The exponent-representation group. NOT SECURE — for correctness testing
/// and as the default desk-scale backend only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransparentGroup {
    order: BigUint,
    byte_len: usize,
}

impl TransparentGroup {
    /// Builds a group of the given (probable-)prime order.
    pub fn new(order: BigUint) -> Result<Self, PairingError> {
        if !is_probable_prime(&order) {
            return Err(PairingError::NotPrime);
        }
        let byte_len = (order.bits() as usize).div_ceil(8);
        Ok(TransparentGroup { order, byte_len })
    }

    /// Default test group of 64-bit prime order 2^64 − 59.
    pub fn default_64bit() -> Self {
        TransparentGroup::new(BigUint::from(18_446_744_073_709_551_557u64))
            .expect("2^64 - 59 is prime")
    }

    pub fn byte_len(&self) -> usize {
        self.byte_len
    }

    fn reduce(&self, x: &BigUint) -> BigUint {
        x % &self.order
    }

    fn encode(&self, x: &BigUint) -> Vec<u8> {
        let bytes = x.to_bytes_be();
        let mut out = alloc::vec![0u8; self.byte_len];
        out[self.byte_len - bytes.len()..].copy_from_slice(&bytes);
        out
    }

    fn decode(&self, bytes: &[u8]) -> Result<BigUint, PairingError> {
        if bytes.len() != self.byte_len {
            return Err(PairingError::BadEncodingWidth {
                want: self.byte_len,
                got: bytes.len(),
            });
        }
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.order {
            return Err(PairingError::NotReduced);
        }
        Ok(v)
    }
}

impl BilinearGroup for TransparentGroup {
    type G = GElem;
    type Gt = GtElem;

    fn order(&self) -> &BigUint {
        &self.order
    }

    fn name(&self) -> &'static str {
        "transparent"
    }

    fn g_exp(&self, x: &BigUint) -> GElem {
        GElem(self.reduce(x))
    }

    fn gt_exp(&self, x: &BigUint) -> GtElem {
        GtElem(self.reduce(x))
    }

    fn g_mul(&self, a: &GElem, b: &GElem) -> GElem {
        GElem((&a.0 + &b.0) % &self.order)
    }

    fn gt_mul(&self, a: &GtElem, b: &GtElem) -> GtElem {
        GtElem((&a.0 + &b.0) % &self.order)
    }

    fn g_inv(&self, a: &GElem) -> GElem {
        if a.0 == BigUint::from(0u8) {
            GElem(BigUint::from(0u8))
        } else {
            GElem(&self.order - &a.0)
        }
    }

    fn gt_inv(&self, a: &GtElem) -> GtElem {
        if a.0 == BigUint::from(0u8) {
            GtElem(BigUint::from(0u8))
        } else {
            GtElem(&self.order - &a.0)
        }
    }

    fn g_pow(&self, a: &GElem, x: &BigUint) -> GElem {
        GElem(&a.0 * self.reduce(x) % &self.order)
    }

    fn gt_pow(&self, a: &GtElem, x: &BigUint) -> GtElem {
        GtElem(&a.0 * self.reduce(x) % &self.order)
    }

    fn pair(&self, a: &GElem, b: &GElem) -> GtElem {
        GtElem(&a.0 * &b.0 % &self.order)
    }

    fn g_to_bytes(&self, a: &GElem) -> Vec<u8> {
        self.encode(&a.0)
    }

    fn g_from_bytes(&self, bytes: &[u8]) -> Result<GElem, PairingError> {
        self.decode(bytes).map(GElem)
    }

    fn gt_to_bytes(&self, a: &GtElem) -> Vec<u8> {
        self.encode(&a.0)
    }

    fn gt_from_bytes(&self, bytes: &[u8]) -> Result<GtElem, PairingError> {
        self.decode(bytes).map(GtElem)
    }
}

/// Uniform scalar in `[0, p)`.
pub fn random_scalar<B: BilinearGroup, R: RngCore + ?Sized>(group: &B, rng: &mut R) -> BigUint {
    random::biguint_below(rng, group.order())
}

/// Group wrapper tallying the operations the scheme's cost model cares
/// about: exponentiations in `G` and `G_T` and pairing evaluations.
/// Multiplications, inversions and encodings pass through uncounted.
pub struct CountingGroup<'a, B: BilinearGroup> {
    inner: &'a B,
    g_exps: Cell<u64>,
    gt_exps: Cell<u64>,
    pairings: Cell<u64>,
}

impl<'a, B: BilinearGroup> CountingGroup<'a, B> {
    pub fn new(inner: &'a B) -> Self {
        CountingGroup {
            inner,
            g_exps: Cell::new(0),
            gt_exps: Cell::new(0),
            pairings: Cell::new(0),
        }
    }

    pub fn g_exps(&self) -> u64 {
        self.g_exps.get()
    }

    pub fn gt_exps(&self) -> u64 {
        self.gt_exps.get()
    }

    pub fn pairings(&self) -> u64 {
        self.pairings.get()
    }

    pub fn reset(&self) {
        self.g_exps.set(0);
        self.gt_exps.set(0);
        self.pairings.set(0);
    }
}

impl<B: BilinearGroup> BilinearGroup for CountingGroup<'_, B> {
    type G = B::G;
    type Gt = B::Gt;

    fn order(&self) -> &BigUint {
        self.inner.order()
    }

    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn g_exp(&self, x: &BigUint) -> B::G {
        self.g_exps.set(self.g_exps.get() + 1);
        self.inner.g_exp(x)
    }

    fn gt_exp(&self, x: &BigUint) -> B::Gt {
        self.gt_exps.set(self.gt_exps.get() + 1);
        self.inner.gt_exp(x)
    }

    fn g_mul(&self, a: &B::G, b: &B::G) -> B::G {
        self.inner.g_mul(a, b)
    }

    fn gt_mul(&self, a: &B::Gt, b: &B::Gt) -> B::Gt {
        self.inner.gt_mul(a, b)
    }

    fn g_inv(&self, a: &B::G) -> B::G {
        self.inner.g_inv(a)
    }

    fn gt_inv(&self, a: &B::Gt) -> B::Gt {
        self.inner.gt_inv(a)
    }

    fn g_pow(&self, a: &B::G, x: &BigUint) -> B::G {
        self.g_exps.set(self.g_exps.get() + 1);
        self.inner.g_pow(a, x)
    }

    fn gt_pow(&self, a: &B::Gt, x: &BigUint) -> B::Gt {
        self.gt_exps.set(self.gt_exps.get() + 1);
        self.inner.gt_pow(a, x)
    }

    fn pair(&self, a: &B::G, b: &B::G) -> B::Gt {
        self.pairings.set(self.pairings.get() + 1);
        self.inner.pair(a, b)
    }

    fn g_identity(&self) -> B::G {
        self.inner.g_identity()
    }

    fn gt_identity(&self) -> B::Gt {
        self.inner.gt_identity()
    }

    fn generator(&self) -> B::G {
        self.inner.generator()
    }

    fn g_to_bytes(&self, a: &B::G) -> Vec<u8> {
        self.inner.g_to_bytes(a)
    }

    fn g_from_bytes(&self, bytes: &[u8]) -> Result<B::G, PairingError> {
        self.inner.g_from_bytes(bytes)
    }

    fn gt_to_bytes(&self, a: &B::Gt) -> Vec<u8> {
        self.inner.gt_to_bytes(a)
    }

    fn gt_from_bytes(&self, bytes: &[u8]) -> Result<B::Gt, PairingError> {
        self.inner.gt_from_bytes(bytes)
    }
}

/// A decisional bilinear Diffie-Hellman instance: `(g, g^φ1, g^φ2, g^φ3)`
/// plus a target that is either `e(g,g)^{φ1·φ2·φ3}` (real) or uniform
/// (random). A test fixture — the exponents stay visible so tests can
/// recompute the target.
#[derive(Debug, Clone)]
pub struct DbdhChallenge<B: BilinearGroup> {
    pub generator: B::G,
    pub commitments: [B::G; 3],
    pub target: B::Gt,
    pub exponents: [BigUint; 3],
    pub real: bool,
}

pub fn dbdh_challenge<B: BilinearGroup, R: RngCore + ?Sized>(
    group: &B,
    rng: &mut R,
    real: bool,
) -> DbdhChallenge<B> {
    let phi1 = random_scalar(group, rng);
    let phi2 = random_scalar(group, rng);
    let phi3 = random_scalar(group, rng);
    let target = if real {
        let prod = &phi1 * &phi2 % group.order() * &phi3 % group.order();
        group.gt_exp(&prod)
    } else {
        group.gt_exp(&random_scalar(group, rng))
    };
    DbdhChallenge {
        generator: group.generator(),
        commitments: [group.g_exp(&phi1), group.g_exp(&phi2), group.g_exp(&phi3)],
        target,
        exponents: [phi1, phi2, phi3],
        real,
    }
}

/// Miller-Rabin with the first twelve prime bases: deterministic for all
/// 64-bit inputs (in fact below 3.3·10^24), a strong probable-prime test
/// beyond that.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u8);
    if *n < two {
        return false;
    }
    const BASES: [u8; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for b in BASES {
        if *n == BigUint::from(b) {
            return true;
        }
    }
    if (n % 2u8) == BigUint::from(0u8) {
        return false;
    }
    let one = BigUint::from(1u8);
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'base: for b in BASES {
        let base = BigUint::from(b);
        let mut x = base.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'base;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn small_group(p: u64) -> TransparentGroup {
        TransparentGroup::new(BigUint::from(p)).unwrap()
    }

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn exponent_additivity() {
        let g = small_group(101);
        assert_eq!(g.g_mul(&g.g_exp(&big(2)), &g.g_exp(&big(3))), g.g_exp(&big(5)));
    }

    #[test]
    fn identity_inverts_to_itself() {
        let g = small_group(101);
        assert_eq!(g.g_inv(&g.g_exp(&big(0))), g.g_exp(&big(0)));
    }

    #[test]
    fn scalars_reduce_mod_p() {
        let g = small_group(7);
        assert_eq!(g.g_exp(&big(9)), g.g_exp(&big(2)));
    }

    #[test]
    fn pairing_is_bilinear_on_small_cases() {
        let g = small_group(101);
        assert_eq!(g.pair(&g.g_exp(&big(2)), &g.g_exp(&big(3))), g.gt_exp(&big(6)));
        assert_eq!(g.pair(&g.g_exp(&big(0)), &g.g_exp(&big(55))), g.gt_identity());
        // 50·50 = 2500 ≡ 76 mod 101
        assert_eq!(g.pair(&g.g_exp(&big(50)), &g.g_exp(&big(50))), g.gt_exp(&big(76)));
    }

    #[test]
    fn pairing_bilinearity_random_sweep() {
        let g = TransparentGroup::default_64bit();
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        for _ in 0..1000 {
            let a = random_scalar(&g, &mut rng);
            let b = random_scalar(&g, &mut rng);
            let prod = &a * &b % g.order();
            assert_eq!(g.pair(&g.g_exp(&a), &g.g_exp(&b)), g.gt_exp(&prod));
        }
    }

    #[test]
    fn pairing_is_non_degenerate() {
        let g = TransparentGroup::default_64bit();
        assert_ne!(g.pair(&g.generator(), &g.generator()), g.gt_identity());
    }

    #[test]
    fn encoding_round_trips_and_validates() {
        let g = TransparentGroup::default_64bit();
        let e = g.g_exp(&big(0xDEADBEEF));
        let bytes = g.g_to_bytes(&e);
        assert_eq!(bytes.len(), 8);
        assert_eq!(g.g_from_bytes(&bytes).unwrap(), e);
        assert!(matches!(
            g.g_from_bytes(&bytes[1..]),
            Err(PairingError::BadEncodingWidth { .. })
        ));
        let unreduced = [0xffu8; 8];
        assert!(matches!(
            g.g_from_bytes(&unreduced),
            Err(PairingError::NotReduced)
        ));
    }

    #[test]
    fn real_dbdh_challenge_recomputes() {
        let g = TransparentGroup::default_64bit();
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let ch = dbdh_challenge(&g, &mut rng, true);
        let partial = g.pair(&ch.commitments[0], &ch.commitments[1]);
        assert_eq!(g.gt_pow(&partial, &ch.exponents[2]), ch.target);
    }

    #[test]
    fn random_dbdh_challenge_rarely_collides() {
        let g = TransparentGroup::default_64bit();
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let mut collisions = 0;
        for _ in 0..1000 {
            let ch = dbdh_challenge(&g, &mut rng, false);
            let partial = g.pair(&ch.commitments[0], &ch.commitments[1]);
            if g.gt_pow(&partial, &ch.exponents[2]) == ch.target {
                collisions += 1;
            }
        }
        // Collision probability is 1/p ≈ 5·10^-20 per trial.
        assert_eq!(collisions, 0);
    }

    #[test]
    fn dbdh_challenge_is_seed_reproducible() {
        let g = TransparentGroup::default_64bit();
        let a = dbdh_challenge(&g, &mut ChaCha12Rng::seed_from_u64(23), true);
        let b = dbdh_challenge(&g, &mut ChaCha12Rng::seed_from_u64(23), true);
        assert_eq!(a.exponents, b.exponents);
        assert_eq!(a.target, b.target);
    }

    #[test]
    fn primality_check_agrees_with_known_values() {
        for p in [2u64, 3, 5, 7, 13, 101, 65537, 2147483647, 18_446_744_073_709_551_557] {
            assert!(is_probable_prime(&big(p)), "{p} is prime");
        }
        for c in [0u64, 1, 4, 9, 15, 561, 65535, 18_446_744_073_709_551_555] {
            assert!(!is_probable_prime(&big(c)), "{c} is composite");
        }
        assert!(TransparentGroup::new(big(91)).is_err());
    }
}
