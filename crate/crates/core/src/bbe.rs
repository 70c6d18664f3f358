//! Biometric-based encryption over a bilinear group.
//!
//! Setup commits to a quantized reference template `w`; key generation
//! binds a private key to an identification template `z`; decryption
//! recovers the message exactly when `⟨w, z⟩ ≡ 0 (mod p)`, and otherwise
//! returns the message blinded by `e(g,g)^{s·t·⟨w,z⟩}`. The preprocessing
//! step runs the orthogonal-transformation similarity test on the real
//! templates and, on acceptance, rewrites the identification vector's final
//! slot to `-D/a mod p` so the orthogonality condition holds exactly in
//! integer arithmetic. A hybrid wrapper seals arbitrary byte payloads under
//! a random session element of `G_T`.

use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use rand_core::RngCore;
use sha2::{Digest, Sha256};

use crate::matrix;
use crate::pairing::BilinearGroup;
use crate::random;
use crate::template::{
    extend_identification, extend_reference, quantize_slice, FeatureTemplate, QuantizedTemplate,
    TemplateError, TemplateRole,
};

/// Hybrid payloads are capped at 1 MiB.
pub const MAX_SEAL_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BbeError {
    #[error("template length must be at least 1")]
    EmptyTemplate,
    #[error("template is quantized for a different group order")]
    PrimeMismatch,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("template has role {got} but the operation needs {want}")]
    RoleMismatch { want: &'static str, got: &'static str },
    #[error("appended constant must be positive (a) / negative (b) and finite")]
    BadConstants,
    #[error("appended constant quantizes to a residue with no inverse mod p")]
    ConstantNotInvertible,
    #[error("payload exceeds {MAX_SEAL_BYTES} bytes")]
    PayloadTooLarge,
    #[error("authentication tag mismatch; wrong template or tampered payload")]
    TagMismatch,
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Master secret: one scalar per template slot plus the masking exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BbeMasterKey {
    pub alpha: Vec<BigUint>,
    pub beta: BigUint,
}

/// Published material: `T_i = g^{w_i}`, `g_i = g^{α_i}`, `Y = e(g,g)^β`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BbePublicParams<B: BilinearGroup> {
    /// Commitments to the reference template slots.
    pub template_points: Vec<B::G>,
    /// Commitments to the master scalars.
    pub alpha_points: Vec<B::G>,
    /// Base of the message mask.
    pub mask: B::Gt,
}

impl<B: BilinearGroup> BbePublicParams<B> {
    pub fn template_len(&self) -> usize {
        self.template_points.len()
    }

    /// Total published elements: `2n + 1`.
    pub fn element_count(&self) -> usize {
        self.template_points.len() + self.alpha_points.len() + 1
    }
}

/// Private key `(g^{β + t·Σ α_i z_i}, g^t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BbePrivateKey<B: BilinearGroup> {
    pub sk1: B::G,
    pub sk2: B::G,
}

/// Ciphertext `(C_I, C_0, C_1..C_n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BbeCiphertext<B: BilinearGroup> {
    /// `Y^r · I` — the masked message.
    pub masked: B::Gt,
    /// `g^r`.
    pub r_point: B::G,
    /// `C_i = g_i^r · T_i^s`, one per template slot.
    pub mix: Vec<B::G>,
}

impl<B: BilinearGroup> BbeCiphertext<B> {
    /// Total elements: `n + 2`.
    pub fn element_count(&self) -> usize {
        self.mix.len() + 2
    }
}

fn check_same_field<B: BilinearGroup>(
    group: &B,
    t: &QuantizedTemplate,
) -> Result<(), BbeError> {
    if t.prime() != group.order() {
        return Err(BbeError::PrimeMismatch);
    }
    Ok(())
}

/// Generates public parameters and the master key for a reference template.
pub fn setup<B: BilinearGroup, R: RngCore + ?Sized>(
    group: &B,
    w: &QuantizedTemplate,
    rng: &mut R,
) -> Result<(BbePublicParams<B>, BbeMasterKey), BbeError> {
    check_same_field(group, w)?;
    if w.is_empty() {
        return Err(BbeError::EmptyTemplate);
    }
    let alpha: Vec<BigUint> = (0..w.len())
        .map(|_| random::biguint_below(rng, group.order()))
        .collect();
    let beta = random::biguint_below(rng, group.order());
    let template_points = w.values().iter().map(|wi| group.g_exp(wi)).collect();
    let alpha_points = alpha.iter().map(|ai| group.g_exp(ai)).collect();
    let mask = group.gt_exp(&beta);
    Ok((
        BbePublicParams {
            template_points,
            alpha_points,
            mask,
        },
        BbeMasterKey { alpha, beta },
    ))
}

/// Issues a private key for an identification template with explicit
/// randomness `t`; the deterministic core of [`keygen`].
pub fn keygen_with_randomness<B: BilinearGroup>(
    group: &B,
    msk: &BbeMasterKey,
    z: &QuantizedTemplate,
    t: &BigUint,
) -> Result<BbePrivateKey<B>, BbeError> {
    check_same_field(group, z)?;
    if z.len() != msk.alpha.len() {
        return Err(BbeError::LengthMismatch {
            left: msk.alpha.len(),
            right: z.len(),
        });
    }
    let p = group.order();
    let mut inner = BigUint::from(0u8);
    for (ai, zi) in msk.alpha.iter().zip(z.values()) {
        inner = (inner + ai * zi) % p;
    }
    let exponent = (&msk.beta + (t % p) * inner) % p;
    Ok(BbePrivateKey {
        sk1: group.g_exp(&exponent),
        sk2: group.g_exp(&(t % p)),
    })
}

/// Issues a private key with fresh uniform randomness.
pub fn keygen<B: BilinearGroup, R: RngCore + ?Sized>(
    group: &B,
    msk: &BbeMasterKey,
    z: &QuantizedTemplate,
    rng: &mut R,
) -> Result<BbePrivateKey<B>, BbeError> {
    let t = random::biguint_below(rng, group.order());
    keygen_with_randomness(group, msk, z, &t)
}

/// Encrypts a `G_T` message with explicit randomness `(r, s)`; the
/// deterministic core of [`encrypt`].
pub fn encrypt_with_randomness<B: BilinearGroup>(
    group: &B,
    pp: &BbePublicParams<B>,
    message: &B::Gt,
    r: &BigUint,
    s: &BigUint,
) -> BbeCiphertext<B> {
    let masked = group.gt_mul(&group.gt_pow(&pp.mask, r), message);
    let r_point = group.g_exp(r);
    let mix = pp
        .alpha_points
        .iter()
        .zip(&pp.template_points)
        .map(|(gi, ti)| group.g_mul(&group.g_pow(gi, r), &group.g_pow(ti, s)))
        .collect();
    BbeCiphertext {
        masked,
        r_point,
        mix,
    }
}

/// Encrypts a `G_T` message under fresh uniform randomness.
pub fn encrypt<B: BilinearGroup, R: RngCore + ?Sized>(
    group: &B,
    pp: &BbePublicParams<B>,
    message: &B::Gt,
    rng: &mut R,
) -> BbeCiphertext<B> {
    let r = random::biguint_below(rng, group.order());
    let s = random::biguint_below(rng, group.order());
    encrypt_with_randomness(group, pp, message, &r, &s)
}

/// Decrypts a ciphertext with a private key bound to `z`.
///
/// Computes `e_0 = e(sk_2, Π C_i^{z_i})`, `e_1 = e(sk_1, C_0)` and returns
/// `C_I · e_1^{-1} · e_0`. The result is the original message exactly when
/// `⟨w, z⟩ ≡ 0 (mod p)`; otherwise it is blinded by
/// `e(g,g)^{s·t·⟨w,z⟩}`.
pub fn decrypt<B: BilinearGroup>(
    group: &B,
    sk: &BbePrivateKey<B>,
    ct: &BbeCiphertext<B>,
    z: &QuantizedTemplate,
) -> Result<B::Gt, BbeError> {
    check_same_field(group, z)?;
    if ct.mix.len() != z.len() {
        return Err(BbeError::LengthMismatch {
            left: ct.mix.len(),
            right: z.len(),
        });
    }
    let mut combined = group.g_identity();
    for (ci, zi) in ct.mix.iter().zip(z.values()) {
        combined = group.g_mul(&combined, &group.g_pow(ci, zi));
    }
    let e0 = group.pair(&sk.sk2, &combined);
    let e1 = group.pair(&sk.sk1, &ct.r_point);
    Ok(group.gt_mul(&group.gt_mul(&ct.masked, &group.gt_inv(&e1)), &e0))
}

/// Constants and quantization policy for [`preprocess`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessParams {
    /// Positive constant appended to the reference extension.
    pub a: f64,
    /// Negative constant appended to the identification extension; `a·b` is
    /// the matching threshold.
    pub b: f64,
    /// Power-of-two quantization scale.
    pub scale: u64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            a: 1.0,
            b: -1.0,
            scale: 1 << 16,
        }
    }
}

/// Result of the similarity-gated preprocessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreprocessOutcome {
    /// Templates judged similar; the returned pair satisfies
    /// `⟨w_ext, z_ext⟩ ≡ 0 (mod p)` exactly.
    Accepted {
        reference: QuantizedTemplate,
        identification: QuantizedTemplate,
    },
    /// Similarity test failed (`D + a·b > 0`); no key material is emitted.
    Rejected,
}

/// Extends both templates, runs the real-valued similarity test
/// `d = D + a·b`, and on acceptance quantizes into `Z_p` with the
/// identification vector's final slot recomputed as `-D·a^{-1} mod p` so
/// the quantized pair is exactly orthogonal.
pub fn preprocess(
    w: &FeatureTemplate,
    z: &FeatureTemplate,
    params: &PreprocessParams,
    prime: &BigUint,
) -> Result<PreprocessOutcome, BbeError> {
    if w.role() != TemplateRole::Reference {
        return Err(BbeError::RoleMismatch {
            want: TemplateRole::Reference.as_str(),
            got: w.role().as_str(),
        });
    }
    if z.role() != TemplateRole::Identification {
        return Err(BbeError::RoleMismatch {
            want: TemplateRole::Identification.as_str(),
            got: z.role().as_str(),
        });
    }
    if w.len() != z.len() {
        return Err(BbeError::LengthMismatch {
            left: w.len(),
            right: z.len(),
        });
    }
    if !params.a.is_finite() || params.a <= 0.0 || !params.b.is_finite() || params.b >= 0.0 {
        return Err(BbeError::BadConstants);
    }

    let mut w_ext = extend_reference(w.values());
    w_ext.push(params.a);
    let mut z_ext = extend_identification(z.values());
    z_ext.push(params.b);

    // Real-valued similarity gate: the inner product of the extended
    // vectors is D + a·b, the same quantity the orthogonal-transformation
    // matcher scores.
    let d = matrix::dot(&w_ext, &z_ext);
    if d > 0.0 {
        return Ok(PreprocessOutcome::Rejected);
    }

    let w_q = quantize_slice(&w_ext, params.scale, prime)?;
    let mut z_q = quantize_slice(&z_ext, params.scale, prime)?;

    let a_q = w_q.last().expect("extended vector is non-empty").clone();
    let a_inv = modinv(&a_q, prime).ok_or(BbeError::ConstantNotInvertible)?;

    // ⟨w_q, z_q⟩ over all but the final slot.
    let mut partial = BigUint::from(0u8);
    for (wi, zi) in w_q.iter().zip(z_q.iter()).take(w_q.len() - 1) {
        partial = (partial + wi * zi) % prime;
    }
    // Final slot: -partial / a mod p, cancelling the running sum exactly.
    let neg_partial = (prime - &partial) % prime;
    let last = z_q.len() - 1;
    z_q[last] = neg_partial * a_inv % prime;

    debug_assert_eq!(
        w_q.iter()
            .zip(&z_q)
            .fold(BigUint::from(0u8), |acc, (a, b)| (acc + a * b) % prime),
        BigUint::from(0u8)
    );

    Ok(PreprocessOutcome::Accepted {
        reference: QuantizedTemplate::from_residues(w_q, params.scale, prime.clone())?,
        identification: QuantizedTemplate::from_residues(z_q, params.scale, prime.clone())?,
    })
}

fn modinv(value: &BigUint, prime: &BigUint) -> Option<BigUint> {
    let v = BigInt::from(value.clone());
    let p = BigInt::from(prime.clone());
    let (g, x) = extended_gcd(&v, &p);
    if g != BigInt::from(1u8) {
        return None;
    }
    let p_big = BigInt::from(prime.clone());
    let reduced = ((x % &p_big) + &p_big) % &p_big;
    reduced.to_biguint()
}

/// Returns `(gcd, x)` with `a·x ≡ gcd (mod b)`.
fn extended_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt) {
    let (mut old_r, mut r) = (a.clone(), b.clone());
    let (mut old_x, mut x) = (BigInt::from(1u8), BigInt::from(0u8));
    while r != BigInt::from(0u8) {
        let q = &old_r / &r;
        let next_r = &old_r - &q * &r;
        old_r = core::mem::replace(&mut r, next_r);
        let next_x = &old_x - &q * &x;
        old_x = core::mem::replace(&mut x, next_x);
    }
    (old_r, old_x)
}

/// A byte payload sealed under a BBE-encrypted session element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedMessage<B: BilinearGroup> {
    /// BBE ciphertext of the session element `K`.
    pub key_ct: BbeCiphertext<B>,
    /// Payload XORed with the keystream derived from `K`.
    pub body: Vec<u8>,
    /// `SHA-256(0x02 ‖ K ‖ plaintext)`.
    pub tag: [u8; 32],
}

/// Seals arbitrary bytes: draws a session element `K = Y^ρ`, encrypts `K`
/// under the public parameters, and stream-encrypts the payload with a
/// hash-derived keystream.
pub fn seal_bytes<B: BilinearGroup, R: RngCore + ?Sized>(
    group: &B,
    pp: &BbePublicParams<B>,
    plaintext: &[u8],
    rng: &mut R,
) -> Result<SealedMessage<B>, BbeError> {
    if plaintext.len() > MAX_SEAL_BYTES {
        return Err(BbeError::PayloadTooLarge);
    }
    let rho = random::biguint_below(rng, group.order());
    let session = group.gt_pow(&pp.mask, &rho);
    let key_ct = encrypt(group, pp, &session, rng);
    let session_bytes = group.gt_to_bytes(&session);
    let body = xor_stream(&session_bytes, plaintext);
    let tag = payload_tag(&session_bytes, plaintext);
    Ok(SealedMessage { key_ct, body, tag })
}

/// Opens a sealed payload. Fails with [`BbeError::TagMismatch`] when the
/// recovered session element is blinded (non-orthogonal templates) or the
/// body was tampered with.
pub fn open_bytes<B: BilinearGroup>(
    group: &B,
    sk: &BbePrivateKey<B>,
    sealed: &SealedMessage<B>,
    z: &QuantizedTemplate,
) -> Result<Vec<u8>, BbeError> {
    let session = decrypt(group, sk, &sealed.key_ct, z)?;
    let session_bytes = group.gt_to_bytes(&session);
    let plaintext = xor_stream(&session_bytes, &sealed.body);
    let tag = payload_tag(&session_bytes, &plaintext);
    if tag != sealed.tag {
        return Err(BbeError::TagMismatch);
    }
    Ok(plaintext)
}

fn xor_stream(key_material: &[u8], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    for (block_index, chunk) in data.chunks(32).enumerate() {
        let mut hasher = Sha256::new();
        hasher.update([0x01]);
        hasher.update(key_material);
        hasher.update((block_index as u64).to_le_bytes());
        let block = hasher.finalize();
        out.extend(chunk.iter().zip(block.iter()).map(|(d, k)| d ^ k));
    }
    out
}

fn payload_tag(key_material: &[u8], plaintext: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update([0x02]);
    hasher.update(key_material);
    hasher.update(plaintext);
    hasher.finalize().into()
}
