//! Feature templates and the extended-vector encoding of their distance.
//!
//! The squared Euclidean distance between two length-`n` templates equals
//! the inner product of two `(n+2)`-length extensions: the reference side
//! carries `(x_1..x_n, 1, Σx²)` and the identification side
//! `(-2y_1..-2y_n, Σy², 1)`. That linearization is what both the
//! orthogonal-transformation matcher and the encryption preprocessing build
//! on. Quantization maps real templates onto `Z_p` so the encryption side
//! can work with exact residues.

use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::math;

/// Whether a template was captured for enrollment or for a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateRole {
    Reference,
    Identification,
}

impl TemplateRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateRole::Reference => "reference",
            TemplateRole::Identification => "identification",
        }
    }
}

/// A real-valued gait feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTemplate {
    values: Vec<f64>,
    role: TemplateRole,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template must contain at least one value")]
    Empty,
    #[error("template contains a non-finite value")]
    NonFinite,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("scale must be a power of two, got {0}")]
    ScaleNotPowerOfTwo(u64),
    #[error("scaled value at index {index} does not fit below p/2")]
    QuantizationRange { index: usize },
    #[error("residue at index {index} is not reduced mod p")]
    ResidueOutOfRange { index: usize },
}

impl FeatureTemplate {
    pub fn new(values: Vec<f64>, role: TemplateRole) -> Result<Self, TemplateError> {
        if values.is_empty() {
            return Err(TemplateError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TemplateError::NonFinite);
        }
        Ok(FeatureTemplate { values, role })
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

    /// Same values under the other role marker.
    pub fn with_role(&self, role: TemplateRole) -> FeatureTemplate {
        FeatureTemplate {
            values: self.values.clone(),
            role,
        }
    }
}

/// Squared Euclidean distance `Σ (x_i − y_i)²`.
pub fn biological_distance(x: &[f64], y: &[f64]) -> Result<f64, TemplateError> {
    if x.len() != y.len() {
        return Err(TemplateError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum())
}

/// Reference-side extension `(x_1..x_n, 1, Σx²)`.
pub fn extend_reference(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 2);
    out.extend_from_slice(x);
    out.push(1.0);
    out.push(x.iter().map(|v| v * v).sum());
    out
}

/// Identification-side extension `(-2y_1..-2y_n, Σy², 1)`.
pub fn extend_identification(y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len() + 2);
    out.extend(y.iter().map(|v| -2.0 * v));
    out.push(y.iter().map(|v| v * v).sum());
    out.push(1.0);
    out
}

/// A template mapped onto residues mod a prime, at a fixed power-of-two
/// scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedTemplate {
    values: Vec<BigUint>,
    scale: u64,
    prime: BigUint,
}

impl QuantizedTemplate {
    /// Wraps pre-reduced residues. Intended for exact small-field tests and
    /// file loading; rejects unreduced values and invalid scales.
    pub fn from_residues(
        values: Vec<BigUint>,
        scale: u64,
        prime: BigUint,
    ) -> Result<Self, TemplateError> {
        if values.is_empty() {
            return Err(TemplateError::Empty);
        }
        if !scale.is_power_of_two() {
            return Err(TemplateError::ScaleNotPowerOfTwo(scale));
        }
        for (index, v) in values.iter().enumerate() {
            if *v >= prime {
                return Err(TemplateError::ResidueOutOfRange { index });
            }
        }
        Ok(QuantizedTemplate { values, scale, prime })
    }

    pub fn values(&self) -> &[BigUint] {
        &self.values
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn prime(&self) -> &BigUint {
        &self.prime
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Centered lift back to reals: residues above `p/2` read as negatives,
    /// then divide by the scale.
    pub fn dequantize(&self) -> Vec<f64> {
        let half = &self.prime >> 1;
        self.values
            .iter()
            .map(|v| {
                if *v > half {
                    let neg = &self.prime - v;
                    -biguint_to_f64(&neg) / self.scale as f64
                } else {
                    biguint_to_f64(v) / self.scale as f64
                }
            })
            .collect()
    }
}

/// Maps each value to `round(v · scale) mod p`, negatives lifted to
/// `p − |·|`. Fails when a scaled magnitude reaches `p/2`, which would make
/// the centered lift ambiguous.
pub fn quantize(
    t: &FeatureTemplate,
    scale: u64,
    prime: &BigUint,
) -> Result<QuantizedTemplate, TemplateError> {
    let values = quantize_slice(t.values(), scale, prime)?;
    Ok(QuantizedTemplate {
        values,
        scale,
        prime: prime.clone(),
    })
}

/// Slice-level quantization; shared with the encryption preprocessing which
/// quantizes extended vectors rather than bare templates.
pub fn quantize_slice(
    values: &[f64],
    scale: u64,
    prime: &BigUint,
) -> Result<Vec<BigUint>, TemplateError> {
    if values.is_empty() {
        return Err(TemplateError::Empty);
    }
    if !scale.is_power_of_two() {
        return Err(TemplateError::ScaleNotPowerOfTwo(scale));
    }
    let mut out = Vec::with_capacity(values.len());
    for (index, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(TemplateError::NonFinite);
        }
        let scaled = math::round(v * scale as f64);
        if math::abs(scaled) >= 9.0e18 {
            return Err(TemplateError::QuantizationRange { index });
        }
        let magnitude = BigUint::from(math::abs(scaled) as u64);
        // Keep 2·|v·scale| < p so quantize/dequantize round-trips.
        if &magnitude * 2u8 >= *prime {
            return Err(TemplateError::QuantizationRange { index });
        }
        if scaled < 0.0 {
            out.push(prime - magnitude);
        } else {
            out.push(magnitude);
        }
    }
    Ok(out)
}

fn biguint_to_f64(v: &BigUint) -> f64 {
    // Adequate for quantized magnitudes, which fit u64 by construction.
    let mut acc = 0.0f64;
    for b in v.to_bytes_be() {
        acc = acc * 256.0 + b as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tmpl(values: &[f64]) -> FeatureTemplate {
        FeatureTemplate::new(values.to_vec(), TemplateRole::Reference).unwrap()
    }

    #[test]
    fn distance_of_identical_vectors_is_zero() {
        let x = [0.3, -0.7, 1.5];
        assert_eq!(biological_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn distance_hand_computed() {
        // (1-3)² + (2-1)² = 5
        assert_eq!(biological_distance(&[1.0, 2.0], &[3.0, 1.0]).unwrap(), 5.0);
        // one dimension: t²
        let t = 0.37;
        assert_eq!(biological_distance(&[0.0], &[t]).unwrap(), t * t);
    }

    #[test]
    fn distance_rejects_length_mismatch() {
        assert!(matches!(
            biological_distance(&[1.0], &[1.0, 2.0]),
            Err(TemplateError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn extend_reference_formula() {
        assert_eq!(extend_reference(&[1.0, 2.0]), vec![1.0, 2.0, 1.0, 5.0]);
        assert_eq!(extend_reference(&[3.0]), vec![3.0, 1.0, 9.0]);
        assert_eq!(extend_reference(&[0.0; 4]), vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn extend_identification_formula() {
        assert_eq!(
            extend_identification(&[3.0, 1.0]),
            vec![-6.0, -2.0, 10.0, 1.0]
        );
        assert_eq!(extend_identification(&[1.0]), vec![-2.0, 1.0, 1.0]);
        assert_eq!(
            extend_identification(&[0.0; 3]),
            vec![0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn linearization_identity_small() {
        let x = [0.25, -0.5, 0.125];
        let y = [0.75, 0.5, -0.25];
        let d = biological_distance(&x, &y).unwrap();
        let ip = crate::matrix::dot(&extend_reference(&x), &extend_identification(&y));
        assert!((d - ip).abs() < 1e-12, "D={d} ip={ip}");
    }

    #[test]
    fn quantize_exact_power_of_two() {
        let p = BigUint::from(u64::MAX); // plenty of headroom, primality irrelevant here
        let q = quantize(&tmpl(&[0.5]), 1 << 16, &p).unwrap();
        assert_eq!(q.values()[0], BigUint::from(32768u32));
    }

    #[test]
    fn quantize_negative_wraps_mod_p() {
        let p = BigUint::from(101u8);
        let q = quantize(&tmpl(&[-1.0]), 1 << 4, &p).unwrap();
        assert_eq!(q.values()[0], BigUint::from(85u8));
    }

    #[test]
    fn quantize_zero_is_zero() {
        let p = BigUint::from(101u8);
        let q = quantize(&tmpl(&[0.0, 0.0]), 1 << 8, &p);
        // 256·0 = 0 < p/2 even for small p
        let q = q.unwrap();
        assert!(q.values().iter().all(|v| *v == BigUint::from(0u8)));
    }

    #[test]
    fn quantize_rejects_overflow() {
        let p = BigUint::from(101u8);
        assert!(matches!(
            quantize(&tmpl(&[4.0]), 1 << 4, &p),
            Err(TemplateError::QuantizationRange { .. })
        ));
    }

    #[test]
    fn quantize_rejects_non_power_of_two_scale() {
        let p = BigUint::from(101u8);
        assert!(matches!(
            quantize(&tmpl(&[0.5]), 3, &p),
            Err(TemplateError::ScaleNotPowerOfTwo(3))
        ));
    }

    #[test]
    fn dequantize_round_trip_within_half_step() {
        let p = BigUint::from(2147483647u64); // 2^31 - 1
        let scale = 1u64 << 16;
        let values = [0.123456, -0.98765, 0.5, -0.0078125];
        let q = quantize(&tmpl(&values), scale, &p).unwrap();
        for (orig, back) in values.iter().zip(q.dequantize()) {
            assert!(
                (orig - back).abs() <= 0.5 / scale as f64,
                "{orig} vs {back}"
            );
        }
    }

    #[test]
    fn template_rejects_non_finite() {
        assert!(matches!(
            FeatureTemplate::new(vec![f64::NAN], TemplateRole::Reference),
            Err(TemplateError::NonFinite)
        ));
        assert!(matches!(
            FeatureTemplate::new(vec![], TemplateRole::Reference),
            Err(TemplateError::Empty)
        ));
    }
}
