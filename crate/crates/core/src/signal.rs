//! 6-channel IMU gait signals: denoising, cycle detection, segmentation.
//!
//! A signal holds three acceleration and three gyroscope channels of equal
//! length. Denoising is a single-level Haar transform with soft-thresholded
//! detail coefficients. The dominant gait cycle is read off the non-DC peak
//! of the DFT magnitude spectrum, and segmentation chops each channel into
//! non-overlapping windows of that (or any requested) length.

use alloc::vec::Vec;

use crate::math;

/// Number of IMU channels: 3 accelerometer axes followed by 3 gyroscope
/// axes.
pub const CHANNELS: usize = 6;

/// Fixed operational window length. Cycle detection is a diagnostic; the
/// pipeline segments at this interval so every window spans at least one
/// full gait cycle of typical walking data.
pub const DEFAULT_CYCLE: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignalError {
    #[error("expected {CHANNELS} channels, got {0}")]
    ChannelCount(usize),
    #[error("channels must share one length ≥ 1")]
    ChannelShape,
    #[error("signal contains a non-finite sample")]
    NonFinite,
    #[error("channel too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("channel is constant; spectrum carries no non-DC peak")]
    NoDominantPeriod,
    #[error("window length {window} exceeds signal length {len}")]
    EmptySegmentation { window: usize, len: usize },
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("threshold must be finite and non-negative")]
    BadThreshold,
}

/// Raw 6-channel gait recording.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitSignal {
    channels: [Vec<f64>; CHANNELS],
}

impl GaitSignal {
    /// Validates the channel-count, equal-length and finiteness invariants.
    pub fn new(channels: [Vec<f64>; CHANNELS]) -> Result<Self, SignalError> {
        let len = channels[0].len();
        if len == 0 || channels.iter().any(|c| c.len() != len) {
            return Err(SignalError::ChannelShape);
        }
        if channels.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(SignalError::NonFinite);
        }
        Ok(GaitSignal { channels })
    }

    pub fn from_channels(channels: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        let n = channels.len();
        let arr: [Vec<f64>; CHANNELS] =
            channels.try_into().map_err(|_| SignalError::ChannelCount(n))?;
        GaitSignal::new(arr)
    }

    pub fn channels(&self) -> &[Vec<f64>; CHANNELS] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    /// Sample count per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-channel windows of a fixed length; the trailing partial window is
/// discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedSignal {
    windows: [Vec<Vec<f64>>; CHANNELS],
    cycle: usize,
}

impl SegmentedSignal {
    /// Builds directly from windows; every channel must carry the same
    /// number of windows, all of length `cycle`.
    pub fn from_windows(
        windows: [Vec<Vec<f64>>; CHANNELS],
        cycle: usize,
    ) -> Result<Self, SignalError> {
        if cycle == 0 {
            return Err(SignalError::ZeroWindow);
        }
        let count = windows[0].len();
        let ok = windows
            .iter()
            .all(|ch| ch.len() == count && ch.iter().all(|w| w.len() == cycle));
        if !ok || count == 0 {
            return Err(SignalError::ChannelShape);
        }
        Ok(SegmentedSignal { windows, cycle })
    }

    pub fn windows(&self) -> &[Vec<Vec<f64>>; CHANNELS] {
        &self.windows
    }

    pub fn channel_windows(&self, i: usize) -> &[Vec<f64>] {
        &self.windows[i]
    }

    /// Window length `T`.
    pub fn cycle(&self) -> usize {
        self.cycle
    }

    /// Windows per channel, `l = floor(L/T)`.
    pub fn window_count(&self) -> usize {
        self.windows[0].len()
    }

    /// Keeps only the first `count` windows of every channel.
    pub fn truncated(&self, count: usize) -> Result<SegmentedSignal, SignalError> {
        if count == 0 || count > self.window_count() {
            return Err(SignalError::TooShort {
                need: count,
                got: self.window_count(),
            });
        }
        let windows = self
            .windows
            .clone()
            .map(|mut ch| {
                ch.truncate(count);
                ch
            });
        Ok(SegmentedSignal {
            windows,
            cycle: self.cycle,
        })
    }
}

/// Detail-coefficient threshold selection for denoising.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// `median(|detail|)/0.6745 · sqrt(2·ln L)`, estimated per channel.
    Universal,
    /// A caller-supplied non-negative threshold.
    Fixed(f64),
}

/// Single-level Haar denoising with soft thresholding, per channel.
///
/// Analysis halves pair sums/differences and synthesis adds them back, so a
/// zero threshold reconstructs pairs exactly; an odd trailing sample is
/// passed through untouched.
pub fn denoise(signal: &GaitSignal, mode: ThresholdMode) -> Result<GaitSignal, SignalError> {
    if let ThresholdMode::Fixed(v) = mode {
        if !v.is_finite() || v < 0.0 {
            return Err(SignalError::BadThreshold);
        }
    }
    let len = signal.len();
    if len < 2 {
        return Err(SignalError::TooShort { need: 2, got: len });
    }
    let mut out: [Vec<f64>; CHANNELS] = Default::default();
    for (slot, channel) in out.iter_mut().zip(signal.channels.iter()) {
        *slot = denoise_channel(channel, mode);
    }
    Ok(GaitSignal { channels: out })
}

fn denoise_channel(channel: &[f64], mode: ThresholdMode) -> Vec<f64> {
    let pairs = channel.len() / 2;
    let mut approx = Vec::with_capacity(pairs);
    let mut detail = Vec::with_capacity(pairs);
    for p in 0..pairs {
        let a = channel[2 * p];
        let b = channel[2 * p + 1];
        approx.push((a + b) * 0.5);
        detail.push((a - b) * 0.5);
    }
    let lambda = match mode {
        ThresholdMode::Fixed(v) => v,
        ThresholdMode::Universal => {
            let sigma = median_abs(&detail) / 0.6745;
            sigma * math::sqrt(2.0 * math::ln(channel.len() as f64))
        }
    };
    for d in detail.iter_mut() {
        *d = soft_threshold(*d, lambda);
    }
    let mut out = Vec::with_capacity(channel.len());
    for p in 0..pairs {
        out.push(approx[p] + detail[p]);
        out.push(approx[p] - detail[p]);
    }
    if channel.len() % 2 == 1 {
        out.push(channel[channel.len() - 1]);
    }
    out
}

fn soft_threshold(x: f64, lambda: f64) -> f64 {
    let m = math::abs(x) - lambda;
    if m <= 0.0 {
        0.0
    } else if x < 0.0 {
        -m
    } else {
        m
    }
}

fn median_abs(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| math::abs(*v)).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Estimates the dominant period of one channel.
///
/// Computes the DFT magnitude spectrum, drops the zero-frequency bin, takes
/// the peak bin `k*` (ties resolve to the lower bin, i.e. the longer
/// period) and returns `round(len / k*)`.
pub fn dominant_cycle(channel: &[f64]) -> Result<usize, SignalError> {
    let len = channel.len();
    if len < 4 {
        return Err(SignalError::TooShort { need: 4, got: len });
    }
    if channel.iter().any(|v| !v.is_finite()) {
        return Err(SignalError::NonFinite);
    }
    let first = channel[0];
    if channel.iter().all(|&v| v == first) {
        return Err(SignalError::NoDominantPeriod);
    }
    let mut best_k = 0usize;
    let mut best_mag = 0.0f64;
    // Real input makes the spectrum symmetric, so bins above len/2 mirror
    // lower ones and can never beat them under lowest-k tie-breaking.
    for k in 1..=len / 2 {
        let mut re = 0.0;
        let mut im = 0.0;
        let w = -2.0 * core::f64::consts::PI * k as f64 / len as f64;
        for (t, &x) in channel.iter().enumerate() {
            let phase = w * t as f64;
            re += x * math::cos(phase);
            im += x * math::sin(phase);
        }
        let mag = re * re + im * im;
        if mag > best_mag {
            best_mag = mag;
            best_k = k;
        }
    }
    if best_k == 0 || best_mag == 0.0 {
        return Err(SignalError::NoDominantPeriod);
    }
    let period = math::round(len as f64 / best_k as f64) as usize;
    Ok(period.max(1))
}

/// Splits every channel into `floor(L/T)` windows of length `window`.
pub fn segment(signal: &GaitSignal, window: usize) -> Result<SegmentedSignal, SignalError> {
    if window == 0 {
        return Err(SignalError::ZeroWindow);
    }
    let len = signal.len();
    if window > len {
        return Err(SignalError::EmptySegmentation { window, len });
    }
    let count = len / window;
    let mut out: [Vec<Vec<f64>>; CHANNELS] = Default::default();
    for (slot, channel) in out.iter_mut().zip(signal.channels.iter()) {
        *slot = (0..count)
            .map(|j| channel[j * window..(j + 1) * window].to_vec())
            .collect();
    }
    Ok(SegmentedSignal {
        windows: out,
        cycle: window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn six(channel: Vec<f64>) -> GaitSignal {
        GaitSignal::new([
            channel.clone(),
            channel.clone(),
            channel.clone(),
            channel.clone(),
            channel.clone(),
            channel,
        ])
        .unwrap()
    }

    fn sinusoid(len: usize, period: f64, amplitude: f64) -> Vec<f64> {
        (0..len)
            .map(|t| amplitude * math::sin(2.0 * core::f64::consts::PI * t as f64 / period))
            .collect()
    }

    #[test]
    fn denoise_keeps_constant_channel_identical() {
        let signal = six(vec![0.5; 64]);
        for mode in [ThresholdMode::Universal, ThresholdMode::Fixed(3.0)] {
            let out = denoise(&signal, mode).unwrap();
            assert_eq!(out, signal);
        }
    }

    #[test]
    fn denoise_shrinks_an_isolated_spike() {
        // Clean sinusoid plus a single-sample spike of amplitude 10; the
        // denoised trace must sit strictly closer to the clean one.
        let len = 256;
        let clean = sinusoid(len, 32.0, 1.0);
        let mut noisy = clean.clone();
        noisy[100] += 10.0;
        let deviation = |xs: &[f64]| -> f64 {
            xs.iter()
                .zip(&clean)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let out = denoise(&six(noisy.clone()), ThresholdMode::Universal).unwrap();
        let before = deviation(&noisy);
        let after = deviation(out.channel(0));
        assert!(after < before, "before {before} after {after}");
    }

    #[test]
    fn denoise_zero_threshold_is_identity_on_pairs() {
        let signal = six(vec![0.25, 0.75]);
        let out = denoise(&signal, ThresholdMode::Fixed(0.0)).unwrap();
        assert_eq!(out, signal);
    }

    #[test]
    fn denoise_zero_threshold_reconstructs_arbitrary_data() {
        let data: Vec<f64> = (0..33).map(|i| math::sin(i as f64 * 0.7) * 3.1 + 0.2).collect();
        let signal = six(data.clone());
        let out = denoise(&signal, ThresholdMode::Fixed(0.0)).unwrap();
        for (a, b) in out.channel(0).iter().zip(&data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn denoise_preserves_shape() {
        let signal = six(sinusoid(101, 13.0, 2.0));
        let out = denoise(&signal, ThresholdMode::Universal).unwrap();
        assert_eq!(out.len(), signal.len());
    }

    #[test]
    fn denoise_rejects_single_sample() {
        let signal = six(vec![1.0]);
        assert!(matches!(
            denoise(&signal, ThresholdMode::Universal),
            Err(SignalError::TooShort { .. })
        ));
    }

    #[test]
    fn dominant_cycle_pure_sinusoid() {
        let channel = sinusoid(600, 50.0, 1.0);
        assert_eq!(dominant_cycle(&channel).unwrap(), 50);
    }

    #[test]
    fn dominant_cycle_picks_stronger_component() {
        let mut channel = sinusoid(600, 100.0, 2.0);
        for (x, y) in channel.iter_mut().zip(sinusoid(600, 25.0, 1.0)) {
            *x += y;
        }
        assert_eq!(dominant_cycle(&channel).unwrap(), 100);
    }

    #[test]
    fn dominant_cycle_rejects_constant() {
        assert!(matches!(
            dominant_cycle(&[2.5; 64]),
            Err(SignalError::NoDominantPeriod)
        ));
    }

    #[test]
    fn dominant_cycle_is_amplitude_invariant() {
        let channel = sinusoid(240, 30.0, 1.0);
        let base = dominant_cycle(&channel).unwrap();
        for scale in [0.001, 0.5, 7.0, 1e6] {
            let scaled: Vec<f64> = channel.iter().map(|v| v * scale).collect();
            assert_eq!(dominant_cycle(&scaled).unwrap(), base);
        }
    }

    #[test]
    fn segment_table_dimensions() {
        let signal = six(sinusoid(600, 50.0, 1.0));
        let seg = segment(&signal, 100).unwrap();
        assert_eq!(seg.window_count(), 6);
        assert_eq!(seg.cycle(), 100);
    }

    #[test]
    fn segment_whole_channel_is_identity() {
        let data = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let seg = segment(&six(data.clone()), 5).unwrap();
        assert_eq!(seg.window_count(), 1);
        assert_eq!(seg.channel_windows(0)[0], data);
    }

    #[test]
    fn segment_drops_trailing_partial_window() {
        let data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let seg = segment(&six(data), 3).unwrap();
        assert_eq!(seg.window_count(), 2);
        assert_eq!(seg.channel_windows(0)[1], vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn segment_rejects_oversized_window() {
        let signal = six(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            segment(&signal, 4),
            Err(SignalError::EmptySegmentation { .. })
        ));
    }

    #[test]
    fn segment_concatenation_reproduces_prefix() {
        let data: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let seg = segment(&six(data.clone()), 6).unwrap();
        let rebuilt: Vec<f64> = seg.channel_windows(0).concat();
        assert_eq!(rebuilt, data[..18].to_vec());
    }

    #[test]
    fn gait_signal_rejects_bad_shapes() {
        assert!(GaitSignal::from_channels(vec![vec![1.0]; 5]).is_err());
        let mut chans = vec![vec![1.0, 2.0]; 6];
        chans[3] = vec![1.0];
        assert!(GaitSignal::from_channels(chans).is_err());
        let mut chans = vec![vec![1.0, 2.0]; 6];
        chans[0][1] = f64::INFINITY;
        assert!(matches!(
            GaitSignal::from_channels(chans),
            Err(SignalError::NonFinite)
        ));
    }
}
