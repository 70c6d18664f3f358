//! Central finite-difference verification of the analytic gradients.

use alloc::vec::Vec;

use crate::math;
use crate::signal::SegmentedSignal;

use super::{AblstmError, Network};

/// Compares analytic loss gradients against central finite differences for
/// every parameter and returns the worst relative error
/// `|g_a − g_fd| / max(1e-8, |g_a| + |g_fd|)`.
///
/// Restricted to tiny, deterministic configurations: `h ≤ 3`, `n ≤ 3`,
/// `classes ≤ 4`, dropout disabled, `epsilon ∈ [1e-7, 1e-3]`.
pub fn gradient_check(
    net: &Network,
    input: &SegmentedSignal,
    label: &[f64],
    epsilon: f64,
) -> Result<f64, AblstmError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(AblstmError::BadEpsilon);
    }
    if net.dims.hidden > 3 || net.dims.windows > 3 || net.dims.classes > 4 {
        return Err(AblstmError::ConfigTooLarge);
    }
    if net.classifier.dropout != 0.0 {
        return Err(AblstmError::DropoutActive);
    }

    let (_, analytic) = net.loss_and_gradient(input, label)?;
    let base = net.param_vector();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let mut params: Vec<f64> = base.clone();
    for idx in 0..base.len() {
        params[idx] = base[idx] + epsilon;
        probe.set_param_vector(&params)?;
        let (_, loss_plus) = probe.forward_loss(input, label)?;
        params[idx] = base[idx] - epsilon;
        probe.set_param_vector(&params)?;
        let (_, loss_minus) = probe.forward_loss(input, label)?;
        params[idx] = base[idx];

        let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        let denom = (math::abs(analytic[idx]) + math::abs(numeric)).max(1e-8);
        let rel = math::abs(analytic[idx] - numeric) / denom;
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}
