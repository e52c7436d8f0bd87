//! Backscatter detection and trace segmentation.
//!
//! Two independent detectors locate the backscatter-bearing region of a
//! trace and their landmarks are fused by midpoint:
//!
//! * a decoder smooths the amplitude, slices it into on/off states and finds
//!   the longest run of state transitions spaced one bit period apart
//!   (landmarks `eta1`, `eta2`);
//! * an energy-envelope detector finds where the variance of the sliding
//!   mean energy rises above a threshold (landmarks `eta3`, `eta4`).
//!
//! The fused start/end are `eta_s = (eta1+eta3)/2`, `eta_e = (eta2+eta4)/2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{SceneConfig, TagSchedule, Trace};
use crate::error::{Error, Result};

/// How the variance threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdMode {
    /// Square of the weakest tag's modulation depth, as recovered by the
    /// decoder's amplitude slicer.
    Auto,
    /// Caller-supplied absolute threshold on the envelope variance.
    Fixed(f64),
}

/// Tuning knobs for the segmenter.
///
/// The window sizes control smoothing and envelope statistics; the bit
/// period, tag count and per-tag duration describe the schedule the AP
/// itself commanded, which the receiver side therefore knows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    /// Moving-average window for the decoder (samples).
    pub smooth_window: usize,
    /// Sliding window N for the energy envelope (samples).
    pub energy_window: usize,
    /// Window for the envelope variance; conventionally equal to
    /// `energy_window`.
    pub variance_window: usize,
    pub threshold_mode: ThresholdMode,
    /// Samples per tag bit.
    pub bit_period: usize,
    /// Number of tag slots expected in the backscatter region.
    pub tag_count: usize,
    /// Samples per tag slot.
    pub per_tag_duration: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            smooth_window: 50,
            energy_window: 50,
            variance_window: 50,
            threshold_mode: ThresholdMode::Auto,
            bit_period: 100,
            tag_count: 3,
            per_tag_duration: 10_000,
        }
    }
}

impl SegmenterConfig {
    /// Segmenter matching the schedule a scene's AP commanded.
    pub fn for_scene(scene: &SceneConfig, schedule: &TagSchedule) -> Self {
        SegmenterConfig {
            bit_period: scene.bit_period(),
            tag_count: scene.tag_count,
            per_tag_duration: schedule.per_tag_duration,
            ..SegmenterConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.smooth_window < 2 || self.energy_window < 2 || self.variance_window < 2 {
            return Err(Error::invalid("all segmenter windows must be at least 2"));
        }
        if self.bit_period < 2 || self.tag_count == 0 || self.per_tag_duration < self.bit_period {
            return Err(Error::invalid("segmenter schedule geometry is degenerate"));
        }
        if let ThresholdMode::Fixed(t) = self.threshold_mode {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::invalid("fixed threshold must be positive"));
            }
        }
        Ok(())
    }
}

/// A delimited backscatter region with all intermediate landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Decoder start/end landmarks.
    pub eta1: usize,
    pub eta2: usize,
    /// Envelope-variance start/end landmarks.
    pub eta3: usize,
    pub eta4: usize,
    /// Fused start (inclusive) and end (exclusive) in trace coordinates.
    pub eta_s: usize,
    pub eta_e: usize,
    /// The sub-sequence `[eta_s, eta_e)` of the source trace.
    pub samples: Vec<Complex64>,
    /// Mean energy per tag slot, in activation order.
    pub per_tag_energy: Vec<f64>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Result of the decoding pass.
#[derive(Debug, Clone)]
pub struct DecodedRun {
    /// First sample of the decodable run.
    pub eta1: usize,
    /// Last transition of the decodable run.
    pub eta2: usize,
    /// Bit decisions at `bit_period` granularity across `[eta1, eta2)`.
    pub bits: Vec<bool>,
    /// Mean `|x|^2` per tag slot within `[eta1, eta2)`.
    pub per_tag_energy: Vec<f64>,
    /// Per-slot separation between the slicer's on and off amplitude levels;
    /// the weakest entry drives the automatic variance threshold.
    pub per_tag_depth: Vec<f64>,
}

/// Centered moving average with shrinking edge windows.
pub(crate) fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    let half = (window - 1) / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (lo + window).min(n);
            let lo = hi.saturating_sub(window);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Two-level clustering of the smoothed amplitude. Returns (low mean, high
/// mean) or `None` when the series is flat.
fn two_level_means(x: &[f64]) -> Option<(f64, f64)> {
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return None;
    }
    let mut threshold = (min + max) / 2.0;
    for _ in 0..32 {
        let (mut lo_sum, mut lo_n, mut hi_sum, mut hi_n) = (0.0, 0usize, 0.0, 0usize);
        for &v in x {
            if v < threshold {
                lo_sum += v;
                lo_n += 1;
            } else {
                hi_sum += v;
                hi_n += 1;
            }
        }
        if lo_n == 0 || hi_n == 0 {
            return None;
        }
        let next = (lo_sum / lo_n as f64 + hi_sum / hi_n as f64) / 2.0;
        if (next - threshold).abs() < 1e-12 {
            threshold = next;
            break;
        }
        threshold = next;
    }
    let (mut lo_sum, mut lo_n, mut hi_sum, mut hi_n) = (0.0, 0usize, 0.0, 0usize);
    for &v in x {
        if v < threshold {
            lo_sum += v;
            lo_n += 1;
        } else {
            hi_sum += v;
            hi_n += 1;
        }
    }
    if lo_n == 0 || hi_n == 0 {
        return None;
    }
    Some((lo_sum / lo_n as f64, hi_sum / hi_n as f64))
}

/// Slice the smoothed amplitude into a binary on/off state sequence.
///
/// A quarter-separation hysteresis band around the slicer midpoint keeps
/// noise near the threshold from producing spurious transitions.
fn binarize(smoothed: &[f64], lo_mean: f64, hi_mean: f64) -> Vec<bool> {
    let mid = (lo_mean + hi_mean) / 2.0;
    let band = (hi_mean - lo_mean) / 4.0;
    let (up, down) = (mid + band, mid - band);
    let mut state = smoothed[0] >= mid;
    smoothed
        .iter()
        .map(|&v| {
            if state && v <= down {
                state = false;
            } else if !state && v >= up {
                state = true;
            }
            state
        })
        .collect()
}

/// Locate the backscatter region by decoding the on/off keying.
///
/// Transitions of the sliced state must arrive one bit period apart (with
/// ±50% jitter tolerance); the longest such run delimits the region.
pub fn decode_landmarks(trace: &Trace, cfg: &SegmenterConfig) -> Result<DecodedRun> {
    cfg.validate()?;
    trace.validate()?;
    if trace.len() <= 4 * cfg.smooth_window {
        return Err(Error::domain(format!(
            "trace of {} samples is too short for smooth_window {}",
            trace.len(),
            cfg.smooth_window
        )));
    }

    let amplitude = trace.amplitudes();
    let smoothed = moving_average(&amplitude, cfg.smooth_window);
    let (lo_mean, hi_mean) = two_level_means(&smoothed).ok_or(Error::NoBackscatterDetected)?;
    let binary = binarize(&smoothed, lo_mean, hi_mean);

    let transitions: Vec<usize> = (1..binary.len())
        .filter(|&i| binary[i] != binary[i - 1])
        .collect();
    if transitions.len() < 2 {
        return Err(Error::NoBackscatterDetected);
    }

    // Longest chain of transitions whose spacing stays within the jitter
    // tolerance of one bit period.
    let p = cfg.bit_period as f64;
    let (gap_lo, gap_hi) = (p / 2.0, 1.5 * p);
    let mut best: Option<(usize, usize)> = None; // (first index, last index) into transitions
    let mut run_start = 0usize;
    for i in 1..=transitions.len() {
        let chain_broke = i == transitions.len() || {
            let gap = (transitions[i] - transitions[i - 1]) as f64;
            gap < gap_lo || gap > gap_hi
        };
        if chain_broke {
            let span = transitions[i - 1] - transitions[run_start];
            if best.is_none_or(|(s, e)| span > transitions[e] - transitions[s]) {
                best = Some((run_start, i - 1));
            }
            run_start = i;
        }
    }
    let (first, last) = best.ok_or(Error::NoBackscatterDetected)?;
    let (eta1, eta2) = (transitions[first], transitions[last]);
    if eta2 - eta1 < 2 * cfg.bit_period {
        return Err(Error::NoBackscatterDetected);
    }

    let bit_count = (eta2 - eta1) / cfg.bit_period;
    let bits: Vec<bool> = (0..bit_count)
        .map(|b| binary[eta1 + b * cfg.bit_period + cfg.bit_period / 2])
        .collect();

    let mut per_tag_energy = Vec::with_capacity(cfg.tag_count);
    let mut per_tag_depth = Vec::with_capacity(cfg.tag_count);
    for k in 0..cfg.tag_count {
        let lo = eta1 + k * cfg.per_tag_duration;
        let mut hi = (lo + cfg.per_tag_duration).min(eta2);
        if lo >= hi {
            // The decoded run stops short of this slot (a tag can go dark
            // when reflections cancel); fall back to the nominal window.
            hi = (lo + cfg.per_tag_duration).min(trace.len());
        }
        if lo >= hi {
            per_tag_energy.push(0.0);
            per_tag_depth.push(0.0);
            continue;
        }
        let energy = trace.samples[lo..hi]
            .iter()
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            / (hi - lo) as f64;
        per_tag_energy.push(energy);

        let (mut on_sum, mut on_n, mut off_sum, mut off_n) = (0.0, 0usize, 0.0, 0usize);
        for i in lo..hi {
            if binary[i] {
                on_sum += smoothed[i];
                on_n += 1;
            } else {
                off_sum += smoothed[i];
                off_n += 1;
            }
        }
        let depth = if on_n > 0 && off_n > 0 {
            (on_sum / on_n as f64 - off_sum / off_n as f64).abs()
        } else {
            0.0
        };
        per_tag_depth.push(depth);
    }

    Ok(DecodedRun {
        eta1,
        eta2,
        bits,
        per_tag_energy,
        per_tag_depth,
    })
}

/// Sliding mean energy `E(i) = (1/N) Σ_{k=i}^{i+N-1} |x(k)|^2`.
///
/// Output index `i` covers the window starting at trace sample `i`; the
/// output has `len - N + 1` entries.
pub fn energy_envelope(trace: &Trace, n: usize) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::domain("energy window must be at least 1"));
    }
    if trace.len() < n {
        return Err(Error::domain(format!(
            "trace of {} samples is shorter than energy window {}",
            trace.len(),
            n
        )));
    }
    let mut prefix = Vec::with_capacity(trace.len() + 1);
    prefix.push(0.0);
    for x in &trace.samples {
        prefix.push(prefix.last().unwrap() + x.norm_sqr());
    }
    Ok((0..=trace.len() - n)
        .map(|i| (prefix[i + n] - prefix[i]) / n as f64)
        .collect())
}

/// Find the envelope-variance landmarks.
///
/// `V(j)` is the population variance of `envelope[j..j+n]`. `eta3` is the
/// first `j` (from the left) with `V(j) <= t` and `V(j+1) > t`; `eta4` is the
/// last `j` with `V(j) > t` and `V(j+1) <= t`. Indices are in envelope
/// coordinates; callers that built the envelope from trace sample 0 can use
/// them as trace coordinates directly.
pub fn variance_landmarks(envelope: &[f64], n: usize, t: f64) -> Result<(usize, usize)> {
    if n < 2 {
        return Err(Error::domain("variance window must be at least 2"));
    }
    if envelope.len() <= 2 * n {
        return Err(Error::domain(format!(
            "envelope of {} values is too short for variance window {}",
            envelope.len(),
            n
        )));
    }
    let mut sum = Vec::with_capacity(envelope.len() + 1);
    let mut sum_sq = Vec::with_capacity(envelope.len() + 1);
    sum.push(0.0);
    sum_sq.push(0.0);
    for &e in envelope {
        sum.push(sum.last().unwrap() + e);
        sum_sq.push(sum_sq.last().unwrap() + e * e);
    }
    let nf = n as f64;
    let variance: Vec<f64> = (0..=envelope.len() - n)
        .map(|j| {
            let mean = (sum[j + n] - sum[j]) / nf;
            ((sum_sq[j + n] - sum_sq[j]) / nf - mean * mean).max(0.0)
        })
        .collect();

    let eta3 = (0..variance.len() - 1)
        .find(|&j| variance[j] <= t && variance[j + 1] > t)
        .ok_or(Error::NoBackscatterDetected)?;
    let eta4 = (0..variance.len() - 1)
        .rev()
        .find(|&j| variance[j] > t && variance[j + 1] <= t)
        .ok_or(Error::NoBackscatterDetected)?;
    Ok((eta3, eta4))
}

/// Variance threshold from the decoder's per-tag levels: the square of the
/// smallest entry, floored at a tiny epsilon so a silent scene cannot yield
/// a degenerate all-above threshold.
pub fn auto_threshold(per_tag: &[f64]) -> Result<f64> {
    if per_tag.is_empty() {
        return Err(Error::domain("auto_threshold needs a non-empty list"));
    }
    if per_tag.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::domain(
            "auto_threshold entries must be finite and non-negative",
        ));
    }
    let min = per_tag.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((min * min).max(1e-12))
}

/// Fuse decoder and envelope landmarks by midpoint.
pub fn fuse_landmarks(eta1: usize, eta3: usize, eta2: usize, eta4: usize) -> (usize, usize) {
    ((eta1 + eta3) / 2, (eta2 + eta4) / 2)
}

/// Full segmentation: decode, envelope, threshold, variance, fuse.
pub fn segment(trace: &Trace, cfg: &SegmenterConfig) -> Result<Segment> {
    let decoded = decode_landmarks(trace, cfg)?;
    let envelope = energy_envelope(trace, cfg.energy_window)?;
    let threshold = match cfg.threshold_mode {
        ThresholdMode::Auto => auto_threshold(&decoded.per_tag_depth)?,
        ThresholdMode::Fixed(t) => t,
    };
    let (eta3, eta4) = variance_landmarks(&envelope, cfg.variance_window, threshold)?;
    let (eta_s, eta_e) = fuse_landmarks(decoded.eta1, eta3, decoded.eta2, eta4);
    if eta_s >= eta_e || eta_e > trace.len() {
        return Err(Error::NoBackscatterDetected);
    }
    Ok(Segment {
        eta1: decoded.eta1,
        eta2: decoded.eta2,
        eta3,
        eta4,
        eta_s,
        eta_e,
        samples: trace.samples[eta_s..eta_e].to_vec(),
        per_tag_energy: decoded.per_tag_energy,
    })
}
