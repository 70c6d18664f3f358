//! Stochastic orthogonal transformation of gait templates.
//!
//! Encryption extends a template (reference or identification form), slots
//! secret constants into fixed positions, scales by a fresh positive factor
//! and multiplies by a secret orthogonal matrix. Because the rotation
//! preserves inner products, the score of an encrypted pair equals
//! `α_r·α_s·(D + Σ a_i b_i)` where `D` is the squared Euclidean distance of
//! the underlying templates — so the match decision is just the score's
//! sign, and the key's constant products carry the matching threshold.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::math;
use crate::matrix::{self, Matrix};
use crate::random;
use crate::template::{extend_identification, extend_reference, FeatureTemplate, TemplateRole};

/// Maximum number of inserted constants.
pub const MAX_PARAMS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SotError {
    #[error("parameter count must lie in 1..={MAX_PARAMS}, got {0}")]
    BadParamCount(usize),
    #[error("template length must be at least 1")]
    BadTemplateLength,
    #[error("template has role {got} but the operation needs {want}")]
    RoleMismatch { want: &'static str, got: &'static str },
    #[error("template length {got} does not match key length {want}")]
    LengthMismatch { want: usize, got: usize },
    #[error("scaling factor must be a positive finite real")]
    BadAlpha,
    #[error("rotation matrix failed the orthogonality check")]
    NotOrthogonal,
    #[error("insertion positions must be strictly increasing and in range")]
    BadPositions,
    #[error("inserted constants must be positive (a) and negative (b)")]
    BadConstants,
    #[error("key dimensions are inconsistent")]
    BadKeyShape,
    #[error("score is not a number")]
    NotANumber,
}

/// Match verdict from the encrypted-domain score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Match,
    NoMatch,
}

impl Decision {
    pub fn is_match(&self) -> bool {
        matches!(self, Decision::Match)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Match => "match",
            Decision::NoMatch => "no-match",
        }
    }
}

/// Secret key: an orthogonal rotation plus the inserted constants and their
/// slots in the final vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SotKey {
    rotation: Matrix,
    positions: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    template_len: usize,
}

impl SotKey {
    /// Reassembles a key from parts (e.g. a key file), re-checking every
    /// invariant: `MᵀM = I` within 1e-10, positive/negative constants, and
    /// strictly increasing in-range positions.
    pub fn from_parts(
        rotation: Matrix,
        positions: Vec<usize>,
        a: Vec<f64>,
        b: Vec<f64>,
        template_len: usize,
    ) -> Result<Self, SotError> {
        let m = positions.len();
        if m == 0 || m > MAX_PARAMS {
            return Err(SotError::BadParamCount(m));
        }
        if template_len == 0 {
            return Err(SotError::BadTemplateLength);
        }
        if a.len() != m || b.len() != m {
            return Err(SotError::BadKeyShape);
        }
        let dim = template_len + 2 + m;
        if rotation.rows() != dim || rotation.cols() != dim || !rotation.is_finite() {
            return Err(SotError::BadKeyShape);
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) || positions.iter().any(|&p| p >= dim) {
            return Err(SotError::BadPositions);
        }
        if a.iter().any(|&v| !v.is_finite() || v <= 0.0)
            || b.iter().any(|&v| !v.is_finite() || v >= 0.0)
        {
            return Err(SotError::BadConstants);
        }
        if rotation.orthogonality_defect() > 1e-10 {
            return Err(SotError::NotOrthogonal);
        }
        Ok(SotKey {
            rotation,
            positions,
            a,
            b,
            template_len,
        })
    }

    pub fn rotation(&self) -> &Matrix {
        &self.rotation
    }

    /// 0-based insertion slots in the final `(n+2+m)`-vector, ascending.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Positive constants inserted into reference templates.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Negative constants inserted into identification templates.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Plain template length `n`.
    pub fn template_len(&self) -> usize {
        self.template_len
    }

    /// Parameter count `m`.
    pub fn param_count(&self) -> usize {
        self.positions.len()
    }

    /// Encrypted-vector length `n + 2 + m`.
    pub fn encrypted_len(&self) -> usize {
        self.template_len + 2 + self.positions.len()
    }

    /// `Σ a_i b_i`: the (negated) matching threshold baked into the key. A
    /// probe matches exactly when its plaintext distance `D ≤ -Σ a_i b_i`.
    pub fn threshold_sum(&self) -> f64 {
        self.a.iter().zip(&self.b).map(|(x, y)| x * y).sum()
    }
}

/// Generates a key: Haar-random rotation, uniform insertion slots,
/// `a_i ~ U(0.5, 2)` and `b_i ~ -U(0.5, 2)`.
pub fn keygen<R: RngCore + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<SotKey, SotError> {
    let (a, b) = {
        let mut a = Vec::with_capacity(m.min(MAX_PARAMS));
        let mut b = Vec::with_capacity(m.min(MAX_PARAMS));
        for _ in 0..m.min(MAX_PARAMS) {
            a.push(random::uniform_in(rng, 0.5, 2.0));
            b.push(-random::uniform_in(rng, 0.5, 2.0));
        }
        (a, b)
    };
    keygen_with_constants(n, m, a, b, rng)
}

/// Generates a key whose decision rule accepts exactly when the plaintext
/// distance is at most `threshold`: all `a_i = 1`, all `b_i = -threshold/m`.
pub fn keygen_calibrated<R: RngCore + ?Sized>(
    n: usize,
    m: usize,
    threshold: f64,
    rng: &mut R,
) -> Result<SotKey, SotError> {
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(SotError::BadConstants);
    }
    let count = if (1..=MAX_PARAMS).contains(&m) { m } else { 1 };
    let a = alloc::vec![1.0; count];
    let b = alloc::vec![-threshold / count as f64; count];
    keygen_with_constants(n, m, a, b, rng)
}

fn keygen_with_constants<R: RngCore + ?Sized>(
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    rng: &mut R,
) -> Result<SotKey, SotError> {
    if m == 0 || m > MAX_PARAMS {
        return Err(SotError::BadParamCount(m));
    }
    if n == 0 {
        return Err(SotError::BadTemplateLength);
    }
    let dim = n + 2 + m;
    let positions = random::distinct_sorted_indices(rng, m, dim);
    let rotation = matrix::haar_orthogonal(dim, rng);
    SotKey::from_parts(rotation, positions, a, b, n)
}

/// A template after extension, constant insertion, scaling and rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedTemplate {
    values: Vec<f64>,
    role: TemplateRole,
}

impl EncryptedTemplate {
    pub fn from_parts(values: Vec<f64>, role: TemplateRole) -> Result<Self, SotError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SotError::NotANumber);
        }
        Ok(EncryptedTemplate { values, role })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn role(&self) -> TemplateRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Splices `constants` into `extended` at the key's final-index slots,
/// lowest slot first.
fn insert_constants(extended: &[f64], positions: &[usize], constants: &[f64]) -> Vec<f64> {
    let dim = extended.len() + constants.len();
    let mut out = Vec::with_capacity(dim);
    let mut next_const = 0;
    let mut next_val = 0;
    for idx in 0..dim {
        if next_const < positions.len() && positions[next_const] == idx {
            out.push(constants[next_const]);
            next_const += 1;
        } else {
            out.push(extended[next_val]);
            next_val += 1;
        }
    }
    out
}

fn check_alpha(alpha: f64) -> Result<(), SotError> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(SotError::BadAlpha)
    }
}

fn check_template(key: &SotKey, t: &FeatureTemplate, want: TemplateRole) -> Result<(), SotError> {
    if t.role() != want {
        return Err(SotError::RoleMismatch {
            want: want.as_str(),
            got: t.role().as_str(),
        });
    }
    if t.len() != key.template_len {
        return Err(SotError::LengthMismatch {
            want: key.template_len,
            got: t.len(),
        });
    }
    Ok(())
}

/// Encrypts a reference template with an explicit scaling factor.
pub fn encrypt_reference_with_alpha(
    key: &SotKey,
    t: &FeatureTemplate,
    alpha: f64,
) -> Result<EncryptedTemplate, SotError> {
    check_template(key, t, TemplateRole::Reference)?;
    check_alpha(alpha)?;
    let extended = extend_reference(t.values());
    let mut inserted = insert_constants(&extended, &key.positions, &key.a);
    for v in inserted.iter_mut() {
        *v *= alpha;
    }
    Ok(EncryptedTemplate {
        values: Matrix::vecmat(&inserted, &key.rotation),
        role: TemplateRole::Reference,
    })
}

/// Encrypts a reference template with a fresh random `α ~ U(0.5, 2)`.
pub fn encrypt_reference<R: RngCore + ?Sized>(
    key: &SotKey,
    t: &FeatureTemplate,
    rng: &mut R,
) -> Result<EncryptedTemplate, SotError> {
    encrypt_reference_with_alpha(key, t, random::uniform_in(rng, 0.5, 2.0))
}

/// Encrypts an identification template with an explicit scaling factor.
pub fn encrypt_identification_with_alpha(
    key: &SotKey,
    t: &FeatureTemplate,
    alpha: f64,
) -> Result<EncryptedTemplate, SotError> {
    check_template(key, t, TemplateRole::Identification)?;
    check_alpha(alpha)?;
    let extended = extend_identification(t.values());
    let mut inserted = insert_constants(&extended, &key.positions, &key.b);
    for v in inserted.iter_mut() {
        *v *= alpha;
    }
    Ok(EncryptedTemplate {
        values: Matrix::vecmat(&inserted, &key.rotation),
        role: TemplateRole::Identification,
    })
}

/// Encrypts an identification template with a fresh random `α ~ U(0.5, 2)`.
pub fn encrypt_identification<R: RngCore + ?Sized>(
    key: &SotKey,
    t: &FeatureTemplate,
    rng: &mut R,
) -> Result<EncryptedTemplate, SotError> {
    encrypt_identification_with_alpha(key, t, random::uniform_in(rng, 0.5, 2.0))
}

/// Inner product of two encrypted templates. Under matching keys this
/// equals `α_r·α_s·(D + Σ a_i b_i)`.
pub fn match_score(
    enc_ref: &EncryptedTemplate,
    enc_idf: &EncryptedTemplate,
) -> Result<f64, SotError> {
    if enc_ref.len() != enc_idf.len() {
        return Err(SotError::LengthMismatch {
            want: enc_ref.len(),
            got: enc_idf.len(),
        });
    }
    Ok(matrix::dot(&enc_ref.values, &enc_idf.values))
}

/// Match exactly when the score is non-positive; the boundary counts as a
/// match.
pub fn decide(score: f64) -> Result<Decision, SotError> {
    if score.is_nan() {
        return Err(SotError::NotANumber);
    }
    Ok(if score <= 0.0 {
        Decision::Match
    } else {
        Decision::NoMatch
    })
}

/// Log2 of the adversary's distinguishing advantage for template length `n`
/// and security parameter `lambda`: `log2(1/(n+3)) - 2λ - 1`.
pub fn cpa_advantage_bound(n: usize, lambda: u32) -> f64 {
    -math::log2((n + 3) as f64) - 2.0 * lambda as f64 - 1.0
}
