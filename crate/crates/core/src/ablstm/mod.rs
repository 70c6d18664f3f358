//! Attention-BLSTM gait feature extractor, toy scale.
//!
//! Per channel, a forward and a backward LSTM walk the segmented windows;
//! each step's hidden states are concatenated and squashed, the six channel
//! features are concatenated into one vector, scaled dot-product attention
//! re-weights it, and a fully connected layer with sigmoid outputs feeds a
//! softmax cross-entropy loss. Analytic gradients for the whole composition
//! live in [`gradient_check`]'s backing pass and are verified against
//! central finite differences.
//!
//! Scale note: the attention scores divide by `sqrt(scale)` with
//! `scale = d` by default (the standard dot-product convention), since a
//! per-instance variance of `qᵀk` is a single scalar with no defined sample
//! distribution.

mod backprop;
mod gradcheck;

pub use gradcheck::gradient_check;

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::math;
use crate::matrix::Matrix;
use crate::random;
use crate::signal::{SegmentedSignal, CHANNELS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AblstmError {
    #[error("dimension mismatch in {0}")]
    DimensionMismatch(&'static str),
    #[error("channel carries no windows")]
    EmptyWindows,
    #[error("attention scale must be positive")]
    BadScale,
    #[error("label must be one-hot")]
    LabelNotOneHot,
    #[error("dropout rate must lie in [0, 1)")]
    BadDropout,
    #[error("gradient check requires dropout disabled")]
    DropoutActive,
    #[error("gradient check epsilon must lie in [1e-7, 1e-3]")]
    BadEpsilon,
    #[error("gradient check requires a tiny config (h ≤ 3, n ≤ 3, classes ≤ 4)")]
    ConfigTooLarge,
}

/// Shape of a network: hidden size `h`, windows per channel `n`, window
/// length `T`, class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkDims {
    pub hidden: usize,
    pub windows: usize,
    pub window_len: usize,
    pub classes: usize,
}

impl NetworkDims {
    /// Concatenated feature length `d = 12·n·h`.
    pub fn feature_len(&self) -> usize {
        2 * CHANNELS * self.windows * self.hidden
    }
}

/// Gate weights of one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_cell: Matrix,
    pub w_forget: Matrix,
    pub w_input: Matrix,
    pub w_output: Matrix,
    pub u_cell: Matrix,
    pub u_forget: Matrix,
    pub u_input: Matrix,
    pub u_output: Matrix,
    pub b_cell: Vec<f64>,
    pub b_forget: Vec<f64>,
    pub b_input: Vec<f64>,
    pub b_output: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input_len: usize) -> Self {
        LstmParams {
            w_cell: Matrix::zeros(hidden, input_len),
            w_forget: Matrix::zeros(hidden, input_len),
            w_input: Matrix::zeros(hidden, input_len),
            w_output: Matrix::zeros(hidden, input_len),
            u_cell: Matrix::zeros(hidden, hidden),
            u_forget: Matrix::zeros(hidden, hidden),
            u_input: Matrix::zeros(hidden, hidden),
            u_output: Matrix::zeros(hidden, hidden),
            b_cell: vec![0.0; hidden],
            b_forget: vec![0.0; hidden],
            b_input: vec![0.0; hidden],
            b_output: vec![0.0; hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_cell.rows()
    }

    pub fn input_len(&self) -> usize {
        self.w_cell.cols()
    }

    fn shape_consistent(&self) -> bool {
        let h = self.hidden();
        let t = self.input_len();
        let ws = [&self.w_cell, &self.w_forget, &self.w_input, &self.w_output];
        let us = [&self.u_cell, &self.u_forget, &self.u_input, &self.u_output];
        let bs = [&self.b_cell, &self.b_forget, &self.b_input, &self.b_output];
        ws.iter().all(|m| m.rows() == h && m.cols() == t)
            && us.iter().all(|m| m.rows() == h && m.cols() == h)
            && bs.iter().all(|b| b.len() == h)
    }
}

/// Hidden and cell state of one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            hidden: vec![0.0; hidden],
            cell: vec![0.0; hidden],
        }
    }
}

/// One gate-by-gate LSTM update.
pub fn lstm_step(
    params: &LstmParams,
    input: &[f64],
    prev: &LstmState,
) -> Result<LstmState, AblstmError> {
    let h = params.hidden();
    if !params.shape_consistent() {
        return Err(AblstmError::DimensionMismatch("lstm params"));
    }
    if input.len() != params.input_len() {
        return Err(AblstmError::DimensionMismatch("lstm input"));
    }
    if prev.hidden.len() != h || prev.cell.len() != h {
        return Err(AblstmError::DimensionMismatch("lstm state"));
    }
    let step = run_step(params, input, prev);
    Ok(LstmState {
        hidden: step.hidden,
        cell: step.cell,
    })
}

/// Per-step activations cached for backpropagation through time.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub candidate: Vec<f64>,
    pub forget: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub cell: Vec<f64>,
    pub tanh_cell: Vec<f64>,
    pub hidden: Vec<f64>,
    pub prev_hidden: Vec<f64>,
    pub prev_cell: Vec<f64>,
}

fn gate_preactivation(w: &Matrix, u: &Matrix, b: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = w.matvec(x);
    for (o, wu) in out.iter_mut().zip(u.matvec(h)) {
        *o += wu;
    }
    for (o, &bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    out
}

fn run_step(params: &LstmParams, x: &[f64], prev: &LstmState) -> StepCache {
    let candidate: Vec<f64> =
        gate_preactivation(&params.w_cell, &params.u_cell, &params.b_cell, x, &prev.hidden)
            .into_iter()
            .map(math::tanh)
            .collect();
    let forget: Vec<f64> =
        gate_preactivation(&params.w_forget, &params.u_forget, &params.b_forget, x, &prev.hidden)
            .into_iter()
            .map(math::sigmoid)
            .collect();
    let input_gate: Vec<f64> =
        gate_preactivation(&params.w_input, &params.u_input, &params.b_input, x, &prev.hidden)
            .into_iter()
            .map(math::sigmoid)
            .collect();
    let output_gate: Vec<f64> =
        gate_preactivation(&params.w_output, &params.u_output, &params.b_output, x, &prev.hidden)
            .into_iter()
            .map(math::sigmoid)
            .collect();
    let cell: Vec<f64> = (0..params.hidden())
        .map(|i| forget[i] * prev.cell[i] + input_gate[i] * candidate[i])
        .collect();
    let tanh_cell: Vec<f64> = cell.iter().map(|&c| math::tanh(c)).collect();
    let hidden: Vec<f64> = (0..params.hidden())
        .map(|i| output_gate[i] * tanh_cell[i])
        .collect();
    StepCache {
        candidate,
        forget,
        input_gate,
        output_gate,
        cell,
        tanh_cell,
        hidden,
        prev_hidden: prev.hidden.clone(),
        prev_cell: prev.cell.clone(),
    }
}

/// Runs one direction over a window sequence from a zero initial state,
/// caching every step.
pub(crate) fn run_lstm<'a>(
    params: &LstmParams,
    windows: impl Iterator<Item = &'a [f64]>,
) -> Vec<StepCache> {
    let mut state = LstmState::zeros(params.hidden());
    let mut steps = Vec::new();
    for x in windows {
        let step = run_step(params, x, &state);
        state = LstmState {
            hidden: step.hidden.clone(),
            cell: step.cell.clone(),
        };
        steps.push(step);
    }
    steps
}

/// Bidirectional pass over one channel: per step, squash the concatenated
/// forward/backward hidden states, then chain the steps.
pub fn blstm_channel(
    fwd: &LstmParams,
    bwd: &LstmParams,
    windows: &[Vec<f64>],
) -> Result<Vec<f64>, AblstmError> {
    if windows.is_empty() {
        return Err(AblstmError::EmptyWindows);
    }
    let input_len = fwd.input_len();
    if !fwd.shape_consistent() || !bwd.shape_consistent() {
        return Err(AblstmError::DimensionMismatch("lstm params"));
    }
    if bwd.hidden() != fwd.hidden() || bwd.input_len() != input_len {
        return Err(AblstmError::DimensionMismatch("direction params"));
    }
    if windows.iter().any(|w| w.len() != input_len) {
        return Err(AblstmError::DimensionMismatch("window length"));
    }
    let fwd_steps = run_lstm(fwd, windows.iter().map(|w| w.as_slice()));
    let bwd_steps = run_lstm(bwd, windows.iter().rev().map(|w| w.as_slice()));
    Ok(squash_channel(&fwd_steps, &bwd_steps))
}

/// `σ([h_fwd(t); h_bwd(t)])` per step, concatenated over steps.
pub(crate) fn squash_channel(fwd_steps: &[StepCache], bwd_steps: &[StepCache]) -> Vec<f64> {
    let n = fwd_steps.len();
    let mut out = Vec::with_capacity(2 * n * fwd_steps[0].hidden.len());
    for t in 0..n {
        // Backward step u processed windows n-1..t, so its state for
        // original position t sits at reversed index n-1-t.
        let back = &bwd_steps[n - 1 - t];
        out.extend(fwd_steps[t].hidden.iter().map(|&v| math::sigmoid(v)));
        out.extend(back.hidden.iter().map(|&v| math::sigmoid(v)));
    }
    out
}

/// Concatenates the six per-channel features in channel order.
pub fn concat_features(per_channel: &[Vec<f64>; CHANNELS]) -> Result<Vec<f64>, AblstmError> {
    let len = per_channel[0].len();
    if per_channel.iter().any(|f| f.len() != len) {
        return Err(AblstmError::DimensionMismatch("channel feature length"));
    }
    let mut out = Vec::with_capacity(CHANNELS * len);
    for f in per_channel {
        out.extend_from_slice(f);
    }
    Ok(out)
}

/// Scaled dot-product attention parameters; `scale` is the denominator
/// under the square root.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_query: Matrix,
    pub w_key: Matrix,
    pub w_value: Matrix,
    pub scale: f64,
}

impl AttentionParams {
    fn check(&self, feature_len: usize) -> Result<(), AblstmError> {
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(AblstmError::BadScale);
        }
        let square = |m: &Matrix| m.rows() == feature_len && m.cols() == feature_len;
        if !square(&self.w_query) || !square(&self.w_key) || !square(&self.w_value) {
            return Err(AblstmError::DimensionMismatch("attention weights"));
        }
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| math::exp(x - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Attention output plus the row-stochastic weight matrix, for callers that
/// inspect the softmax rows.
pub fn attention_with_weights(
    params: &AttentionParams,
    feature: &[f64],
) -> Result<(Vec<f64>, Matrix), AblstmError> {
    let d = feature.len();
    if d == 0 {
        return Err(AblstmError::DimensionMismatch("empty feature"));
    }
    params.check(d)?;
    let q = params.w_query.matvec(feature);
    let k = params.w_key.matvec(feature);
    let v = params.w_value.matvec(feature);
    let inv_sqrt = 1.0 / math::sqrt(params.scale);
    let mut weights = Matrix::zeros(d, d);
    let mut out = vec![0.0; d];
    for i in 0..d {
        let scores: Vec<f64> = k.iter().map(|&kj| q[i] * kj * inv_sqrt).collect();
        let row = softmax(&scores);
        out[i] = crate::matrix::dot(&row, &v);
        weights.row_mut(i).copy_from_slice(&row);
    }
    Ok((out, weights))
}

/// Scaled dot-product attention over a single feature vector: the score
/// matrix is the outer product of the query and key vectors.
pub fn attention(params: &AttentionParams, feature: &[f64]) -> Result<Vec<f64>, AblstmError> {
    attention_with_weights(params, feature).map(|(out, _)| out)
}

/// Fully connected classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub dropout: f64,
}

impl ClassifierParams {
    pub fn classes(&self) -> usize {
        self.weight.rows()
    }

    fn check(&self, feature_len: usize) -> Result<(), AblstmError> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(AblstmError::BadDropout);
        }
        if self.weight.cols() != feature_len || self.bias.len() != self.weight.rows() {
            return Err(AblstmError::DimensionMismatch("classifier weights"));
        }
        Ok(())
    }
}

fn check_one_hot(label: &[f64], classes: usize) -> Result<(), AblstmError> {
    if label.len() != classes {
        return Err(AblstmError::LabelNotOneHot);
    }
    let mut ones = 0;
    for &v in label {
        if v == 1.0 {
            ones += 1;
        } else if v != 0.0 {
            return Err(AblstmError::LabelNotOneHot);
        }
    }
    if ones != 1 {
        return Err(AblstmError::LabelNotOneHot);
    }
    Ok(())
}

/// Classifier forward: inverted dropout (when a mask is supplied), linear
/// layer, sigmoid, and softmax cross-entropy against a one-hot label.
/// Returns `(ŷ, loss)`.
pub fn classify_loss(
    params: &ClassifierParams,
    attended: &[f64],
    label: &[f64],
    dropout_mask: Option<&[bool]>,
) -> Result<(Vec<f64>, f64), AblstmError> {
    params.check(attended.len())?;
    check_one_hot(label, params.classes())?;
    let dropped;
    let fed: &[f64] = match dropout_mask {
        Some(mask) => {
            if mask.len() != attended.len() {
                return Err(AblstmError::DimensionMismatch("dropout mask"));
            }
            let keep_scale = 1.0 / (1.0 - params.dropout);
            dropped = attended
                .iter()
                .zip(mask)
                .map(|(&v, &keep)| if keep { v * keep_scale } else { 0.0 })
                .collect::<Vec<f64>>();
            &dropped
        }
        None => attended,
    };
    let mut logits = params.weight.matvec(fed);
    for (l, &b) in logits.iter_mut().zip(&params.bias) {
        *l += b;
    }
    let yhat: Vec<f64> = logits.iter().map(|&o| math::sigmoid(o)).collect();
    let probs = softmax(&yhat);
    let loss = label
        .iter()
        .zip(&probs)
        .filter(|(&y, _)| y == 1.0)
        .map(|(_, &p)| -math::ln(p))
        .sum();
    Ok((yhat, loss))
}

/// The full extractor-plus-classifier stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub channels: Vec<ChannelLstm>,
    pub attention: AttentionParams,
    pub classifier: ClassifierParams,
    pub dims: NetworkDims,
}

/// Forward and backward LSTM parameters of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLstm {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

/// Feature stages of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedFeatures {
    /// Concatenated BLSTM features (length `d`).
    pub concatenated: Vec<f64>,
    /// Attention output (length `d`), the gait template.
    pub attended: Vec<f64>,
}

impl Network {
    /// Random initialization: all weights uniform in `(-1/√h, 1/√h)`,
    /// biases zero, attention scale `d`, dropout disabled.
    pub fn random<R: RngCore + ?Sized>(dims: NetworkDims, rng: &mut R) -> Self {
        assert!(dims.hidden > 0 && dims.windows > 0 && dims.window_len > 0 && dims.classes > 0);
        let bound = 1.0 / math::sqrt(dims.hidden as f64);
        let mut mat = |rows: usize, cols: usize| {
            Matrix::from_fn(rows, cols, |_, _| random::uniform_in(rng, -bound, bound))
        };
        let d = dims.feature_len();
        let mut lstm = |t: usize, h: usize| LstmParams {
            w_cell: mat(h, t),
            w_forget: mat(h, t),
            w_input: mat(h, t),
            w_output: mat(h, t),
            u_cell: mat(h, h),
            u_forget: mat(h, h),
            u_input: mat(h, h),
            u_output: mat(h, h),
            b_cell: vec![0.0; h],
            b_forget: vec![0.0; h],
            b_input: vec![0.0; h],
            b_output: vec![0.0; h],
        };
        let channels = (0..CHANNELS)
            .map(|_| ChannelLstm {
                fwd: lstm(dims.window_len, dims.hidden),
                bwd: lstm(dims.window_len, dims.hidden),
            })
            .collect();
        let attention = AttentionParams {
            w_query: mat(d, d),
            w_key: mat(d, d),
            w_value: mat(d, d),
            scale: d as f64,
        };
        let classifier = ClassifierParams {
            weight: mat(dims.classes, d),
            bias: vec![0.0; dims.classes],
            dropout: 0.0,
        };
        Network {
            channels,
            attention,
            classifier,
            dims,
        }
    }

    fn check_input(&self, input: &SegmentedSignal) -> Result<(), AblstmError> {
        if input.window_count() != self.dims.windows || input.cycle() != self.dims.window_len {
            return Err(AblstmError::DimensionMismatch("segmented input shape"));
        }
        Ok(())
    }

    /// BLSTM + attention feature extraction; the attended vector is the
    /// gait template.
    pub fn extract(&self, input: &SegmentedSignal) -> Result<ExtractedFeatures, AblstmError> {
        self.check_input(input)?;
        let mut per_channel: [Vec<f64>; CHANNELS] = Default::default();
        for (c, slot) in per_channel.iter_mut().enumerate() {
            *slot = blstm_channel(
                &self.channels[c].fwd,
                &self.channels[c].bwd,
                input.channel_windows(c),
            )?;
        }
        let concatenated = concat_features(&per_channel)?;
        let attended = attention(&self.attention, &concatenated)?;
        Ok(ExtractedFeatures {
            concatenated,
            attended,
        })
    }

    /// Full evaluation-mode pass returning `(ŷ, loss)`.
    pub fn forward_loss(
        &self,
        input: &SegmentedSignal,
        label: &[f64],
    ) -> Result<(Vec<f64>, f64), AblstmError> {
        let features = self.extract(input)?;
        classify_loss(&self.classifier, &features.attended, label, None)
    }

    /// Evaluation-mode loss and its gradient in [`Self::param_vector`]
    /// order.
    pub fn loss_and_gradient(
        &self,
        input: &SegmentedSignal,
        label: &[f64],
    ) -> Result<(f64, Vec<f64>), AblstmError> {
        backprop::loss_and_gradient(self, input, label)
    }

    /// Trainable parameters flattened in a fixed order (gate weights per
    /// channel and direction, attention projections, classifier).
    pub fn param_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for ch in &self.channels {
            for dir in [&ch.fwd, &ch.bwd] {
                for m in [&dir.w_cell, &dir.w_forget, &dir.w_input, &dir.w_output] {
                    out.extend_from_slice(m.data());
                }
                for m in [&dir.u_cell, &dir.u_forget, &dir.u_input, &dir.u_output] {
                    out.extend_from_slice(m.data());
                }
                for b in [&dir.b_cell, &dir.b_forget, &dir.b_input, &dir.b_output] {
                    out.extend_from_slice(b);
                }
            }
        }
        for m in [
            &self.attention.w_query,
            &self.attention.w_key,
            &self.attention.w_value,
        ] {
            out.extend_from_slice(m.data());
        }
        out.extend_from_slice(self.classifier.weight.data());
        out.extend_from_slice(&self.classifier.bias);
        out
    }

    /// Writes a flattened parameter vector back; inverse of
    /// [`Self::param_vector`].
    pub fn set_param_vector(&mut self, values: &[f64]) -> Result<(), AblstmError> {
        let mut cursor = 0usize;
        let mut take = |len: usize| -> Result<&[f64], AblstmError> {
            let slice = values
                .get(cursor..cursor + len)
                .ok_or(AblstmError::DimensionMismatch("parameter vector"))?;
            cursor += len;
            Ok(slice)
        };
        for ch in &mut self.channels {
            for dir in [&mut ch.fwd, &mut ch.bwd] {
                for m in [
                    &mut dir.w_cell,
                    &mut dir.w_forget,
                    &mut dir.w_input,
                    &mut dir.w_output,
                ] {
                    let len = m.data().len();
                    m.data_mut().copy_from_slice(take(len)?);
                }
                for m in [
                    &mut dir.u_cell,
                    &mut dir.u_forget,
                    &mut dir.u_input,
                    &mut dir.u_output,
                ] {
                    let len = m.data().len();
                    m.data_mut().copy_from_slice(take(len)?);
                }
                for b in [
                    &mut dir.b_cell,
                    &mut dir.b_forget,
                    &mut dir.b_input,
                    &mut dir.b_output,
                ] {
                    let len = b.len();
                    b.copy_from_slice(take(len)?);
                }
            }
        }
        for m in [
            &mut self.attention.w_query,
            &mut self.attention.w_key,
            &mut self.attention.w_value,
        ] {
            let len = m.data().len();
            m.data_mut().copy_from_slice(take(len)?);
        }
        let len = self.classifier.weight.data().len();
        self.classifier.weight.data_mut().copy_from_slice(take(len)?);
        let len = self.classifier.bias.len();
        self.classifier.bias.copy_from_slice(take(len)?);
        if cursor != values.len() {
            return Err(AblstmError::DimensionMismatch("parameter vector"));
        }
        Ok(())
    }
}
