//! Analytic gradients for the full network composition.
//!
//! Evaluation-mode only (no dropout): the loss must be deterministic for
//! the finite-difference comparison to make sense.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::matrix::{dot, Matrix};
use crate::signal::{SegmentedSignal, CHANNELS};

use super::{
    classify_loss, concat_features, run_lstm, softmax, squash_channel, AblstmError, LstmParams,
    Network, StepCache,
};

pub(crate) fn loss_and_gradient(
    net: &Network,
    input: &SegmentedSignal,
    label: &[f64],
) -> Result<(f64, Vec<f64>), AblstmError> {
    net.check_input(input)?;
    let h = net.dims.hidden;
    let n = net.dims.windows;
    let d = net.dims.feature_len();

    // Forward with caches.
    let mut fwd_traces = Vec::with_capacity(CHANNELS);
    let mut bwd_traces = Vec::with_capacity(CHANNELS);
    let mut per_channel: [Vec<f64>; CHANNELS] = Default::default();
    for (c, slot) in per_channel.iter_mut().enumerate() {
        let windows = input.channel_windows(c);
        let fwd = run_lstm(&net.channels[c].fwd, windows.iter().map(|w| w.as_slice()));
        let bwd = run_lstm(
            &net.channels[c].bwd,
            windows.iter().rev().map(|w| w.as_slice()),
        );
        *slot = squash_channel(&fwd, &bwd);
        fwd_traces.push(fwd);
        bwd_traces.push(bwd);
    }
    let feature = concat_features(&per_channel)?;

    net.attention.check(d)?;
    let q = net.attention.w_query.matvec(&feature);
    let k = net.attention.w_key.matvec(&feature);
    let v = net.attention.w_value.matvec(&feature);
    let inv_sqrt = 1.0 / math::sqrt(net.attention.scale);
    let mut rows = Vec::with_capacity(d);
    let mut attended = vec![0.0; d];
    for i in 0..d {
        let scores: Vec<f64> = k.iter().map(|&kj| q[i] * kj * inv_sqrt).collect();
        let row = softmax(&scores);
        attended[i] = dot(&row, &v);
        rows.push(row);
    }

    let (yhat, loss) = classify_loss(&net.classifier, &attended, label, None)?;
    let probs = softmax(&yhat);

    // Gradient container with the same shapes.
    let mut grad = net.clone();
    grad.set_param_vector(&vec![0.0; net.param_vector().len()])?;

    // Classifier head.
    let d_logits: Vec<f64> = (0..net.classifier.classes())
        .map(|i| (probs[i] - label[i]) * yhat[i] * (1.0 - yhat[i]))
        .collect();
    grad.classifier.weight.add_outer(&d_logits, &attended);
    for (g, &dl) in grad.classifier.bias.iter_mut().zip(&d_logits) {
        *g += dl;
    }
    let d_attended = Matrix::vecmat(&d_logits, &net.classifier.weight);

    // Attention: back through f_att = softmax(q·kᵀ/√scale) · v.
    let mut d_value = vec![0.0; d];
    for (i, row) in rows.iter().enumerate() {
        let gi = d_attended[i];
        if gi == 0.0 {
            continue;
        }
        for (dv, &a) in d_value.iter_mut().zip(row) {
            *dv += a * gi;
        }
    }
    let mut d_query = vec![0.0; d];
    let mut d_key = vec![0.0; d];
    let mut d_scores = vec![0.0; d];
    for i in 0..d {
        let gi = d_attended[i];
        let row = &rows[i];
        // dA_i = g_i · v; softmax row jacobian folds to
        // dS_ij = A_ij (dA_ij − ⟨dA_i, A_i⟩).
        let inner: f64 = gi * dot(v.as_slice(), row);
        for j in 0..d {
            d_scores[j] = row[j] * (gi * v[j] - inner);
        }
        d_query[i] = inv_sqrt * dot(&d_scores, &k);
        for (dk, &ds) in d_key.iter_mut().zip(&d_scores) {
            *dk += inv_sqrt * ds * q[i];
        }
    }
    grad.attention.w_query.add_outer(&d_query, &feature);
    grad.attention.w_key.add_outer(&d_key, &feature);
    grad.attention.w_value.add_outer(&d_value, &feature);

    let mut d_feature = Matrix::vecmat(&d_query, &net.attention.w_query);
    for (df, x) in d_feature
        .iter_mut()
        .zip(Matrix::vecmat(&d_key, &net.attention.w_key))
    {
        *df += x;
    }
    for (df, x) in d_feature
        .iter_mut()
        .zip(Matrix::vecmat(&d_value, &net.attention.w_value))
    {
        *df += x;
    }

    // Split back into channels and through the squashing sigmoid.
    let span = 2 * n * h;
    for c in 0..CHANNELS {
        let slice = &d_feature[c * span..(c + 1) * span];
        let mut ext_fwd = vec![vec![0.0; h]; n];
        let mut ext_bwd = vec![vec![0.0; h]; n]; // indexed by original position
        for t in 0..n {
            for j in 0..2 * h {
                let d_sig = slice[t * 2 * h + j];
                if d_sig == 0.0 {
                    continue;
                }
                let hidden_val = if j < h {
                    fwd_traces[c][t].hidden[j]
                } else {
                    bwd_traces[c][n - 1 - t].hidden[j - h]
                };
                let s = math::sigmoid(hidden_val);
                let dz = d_sig * s * (1.0 - s);
                if j < h {
                    ext_fwd[t][j] += dz;
                } else {
                    ext_bwd[t][j - h] += dz;
                }
            }
        }
        let windows = input.channel_windows(c);
        let fwd_inputs: Vec<&[f64]> = windows.iter().map(|w| w.as_slice()).collect();
        bptt(
            &net.channels[c].fwd,
            &fwd_inputs,
            &fwd_traces[c],
            &ext_fwd,
            &mut grad.channels[c].fwd,
        );
        // The backward trace runs over reversed windows; its step u holds
        // the state for original position n-1-u.
        let bwd_inputs: Vec<&[f64]> = windows.iter().rev().map(|w| w.as_slice()).collect();
        let ext_rev: Vec<Vec<f64>> = (0..n).map(|u| ext_bwd[n - 1 - u].clone()).collect();
        bptt(
            &net.channels[c].bwd,
            &bwd_inputs,
            &bwd_traces[c],
            &ext_rev,
            &mut grad.channels[c].bwd,
        );
    }

    Ok((loss, grad.param_vector()))
}

/// Backpropagation through time for one LSTM direction. `ext[t]` is the
/// loss gradient arriving at the hidden state of step `t`.
fn bptt(
    params: &LstmParams,
    inputs: &[&[f64]],
    steps: &[StepCache],
    ext: &[Vec<f64>],
    grads: &mut LstmParams,
) {
    let h = params.hidden();
    let mut dh_carry = vec![0.0; h];
    let mut dc_carry = vec![0.0; h];
    for t in (0..steps.len()).rev() {
        let step = &steps[t];
        let dh: Vec<f64> = (0..h).map(|i| ext[t][i] + dh_carry[i]).collect();
        let dc: Vec<f64> = (0..h)
            .map(|i| {
                dc_carry[i]
                    + dh[i] * step.output_gate[i] * (1.0 - step.tanh_cell[i] * step.tanh_cell[i])
            })
            .collect();
        let d_cand_pre: Vec<f64> = (0..h)
            .map(|i| dc[i] * step.input_gate[i] * (1.0 - step.candidate[i] * step.candidate[i]))
            .collect();
        let d_input_pre: Vec<f64> = (0..h)
            .map(|i| dc[i] * step.candidate[i] * step.input_gate[i] * (1.0 - step.input_gate[i]))
            .collect();
        let d_forget_pre: Vec<f64> = (0..h)
            .map(|i| dc[i] * step.prev_cell[i] * step.forget[i] * (1.0 - step.forget[i]))
            .collect();
        let d_output_pre: Vec<f64> = (0..h)
            .map(|i| dh[i] * step.tanh_cell[i] * step.output_gate[i] * (1.0 - step.output_gate[i]))
            .collect();

        grads.w_cell.add_outer(&d_cand_pre, inputs[t]);
        grads.u_cell.add_outer(&d_cand_pre, &step.prev_hidden);
        grads.w_input.add_outer(&d_input_pre, inputs[t]);
        grads.u_input.add_outer(&d_input_pre, &step.prev_hidden);
        grads.w_forget.add_outer(&d_forget_pre, inputs[t]);
        grads.u_forget.add_outer(&d_forget_pre, &step.prev_hidden);
        grads.w_output.add_outer(&d_output_pre, inputs[t]);
        grads.u_output.add_outer(&d_output_pre, &step.prev_hidden);
        for i in 0..h {
            grads.b_cell[i] += d_cand_pre[i];
            grads.b_input[i] += d_input_pre[i];
            grads.b_forget[i] += d_forget_pre[i];
            grads.b_output[i] += d_output_pre[i];
        }

        dh_carry = Matrix::vecmat(&d_cand_pre, &params.u_cell);
        for (acc, x) in dh_carry
            .iter_mut()
            .zip(Matrix::vecmat(&d_input_pre, &params.u_input))
        {
            *acc += x;
        }
        for (acc, x) in dh_carry
            .iter_mut()
            .zip(Matrix::vecmat(&d_forget_pre, &params.u_forget))
        {
            *acc += x;
        }
        for (acc, x) in dh_carry
            .iter_mut()
            .zip(Matrix::vecmat(&d_output_pre, &params.u_output))
        {
            *acc += x;
        }
        dc_carry = (0..h).map(|i| dc[i] * step.forget[i]).collect();
    }
}
