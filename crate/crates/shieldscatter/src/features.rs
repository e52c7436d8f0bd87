//! Amplitude-derived feature series extracted from a segment.
//!
//! Six series describe one segment: the raw amplitude, its moving average,
//! and four block statistics (mean energy, variance, maximum, minimum)
//! computed over non-overlapping 50-sample blocks. Trailing samples that do
//! not fill a block are dropped rather than padded.

use crate::error::{Error, Result};
use crate::segment::{moving_average, Segment};

/// Samples per feature block and per smoothing window.
pub const FEATURE_BLOCK: usize = 50;

/// Minimum number of blocks a segment must provide so the profile stage can
/// split every block feature into its 58 chunks.
pub const MIN_BLOCKS: usize = 58;

/// The six feature series of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    /// Raw amplitude `|x|` over the segment.
    pub original: Vec<f64>,
    /// Centered moving average of `original` (window [`FEATURE_BLOCK`]).
    pub smoothed: Vec<f64>,
    /// Mean energy `|x|^2` per block.
    pub envelope: Vec<f64>,
    /// Population variance of the amplitude per block.
    pub variance: Vec<f64>,
    /// Amplitude maximum per block.
    pub maximum: Vec<f64>,
    /// Amplitude minimum per block.
    pub minimum: Vec<f64>,
}

impl FeatureSet {
    /// Number of complete blocks.
    pub fn block_count(&self) -> usize {
        self.envelope.len()
    }
}

/// Extract all six feature series from a segment.
///
/// The segment must contain at least `FEATURE_BLOCK * MIN_BLOCKS` samples so
/// that downstream chunking is well-defined.
pub fn extract_features(segment: &Segment) -> Result<FeatureSet> {
    let required = FEATURE_BLOCK * MIN_BLOCKS;
    if segment.len() < required {
        return Err(Error::SegmentTooShort {
            required,
            actual: segment.len(),
        });
    }

    let original: Vec<f64> = segment.samples.iter().map(|x| x.norm()).collect();
    let smoothed = moving_average(&original, FEATURE_BLOCK);

    let blocks = original.len() / FEATURE_BLOCK;
    let mut envelope = Vec::with_capacity(blocks);
    let mut variance = Vec::with_capacity(blocks);
    let mut maximum = Vec::with_capacity(blocks);
    let mut minimum = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let block = &original[b * FEATURE_BLOCK..(b + 1) * FEATURE_BLOCK];
        let n = block.len() as f64;
        let mean = block.iter().sum::<f64>() / n;
        let energy = block.iter().map(|a| a * a).sum::<f64>() / n;
        envelope.push(energy);
        variance.push((energy - mean * mean).max(0.0));
        maximum.push(block.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        minimum.push(block.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    Ok(FeatureSet {
        original,
        smoothed,
        envelope,
        variance,
        maximum,
        minimum,
    })
}
