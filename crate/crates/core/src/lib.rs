//! Gait-based identification and message-encryption primitives.
//!
//! The crate covers the full device-side pipeline:
//!
//! 1. [`signal`] — 6-channel IMU gait signals: wavelet denoising, dominant
//!    gait-cycle detection via the DFT magnitude spectrum, and fixed-length
//!    segmentation.
//! 2. [`ablstm`] — a toy-scale attention-BLSTM feature extractor with
//!    analytic gradients verified against finite differences.
//! 3. [`template`] — feature templates, the extended-vector encoding that
//!    turns squared Euclidean distance into an inner product, and integer
//!    quantization into `Z_p`.
//! 4. [`sot`] — the stochastic orthogonal transformation: templates are
//!    extended, padded with secret constants, scaled by a fresh positive
//!    factor and rotated by a secret orthogonal matrix; matching reduces to
//!    the sign of an inner product between ciphertexts.
//! 5. [`pairing`] — a bilinear-group contract with a transparent
//!    exponent-representation instantiation for exact testing. The
//!    transparent group is NOT secure; it exists so the encryption scheme
//!    can be verified bit-exactly.
//! 6. [`bbe`] — biometric-based encryption: an IBE-style scheme whose
//!    decryption succeeds exactly when the quantized reference and
//!    identification templates are orthogonal mod p, plus the preprocessing
//!    step that forces orthogonality for accepted probes and a byte-message
//!    wrapper.
//!
//! The crate is `no_std`-compatible (requires `alloc`); enable the `libm`
//! feature when building without `std`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("amsobe-core needs either the `std` or the `libm` feature");

pub mod ablstm;
pub mod bbe;
pub(crate) mod math;
pub mod matrix;
pub mod pairing;
pub mod random;
pub mod signal;
pub mod sot;
pub mod template;

pub use matrix::Matrix;
pub use signal::{GaitSignal, SegmentedSignal};
pub use sot::{Decision, EncryptedTemplate, SotKey};
pub use template::{FeatureTemplate, QuantizedTemplate, TemplateRole};
