//! Chunked dynamic-time-warping comparison of two feature sets.
//!
//! Misaligned segmentation shifts feature series against each other, so they
//! are compared with DTW rather than a fixed-lag correlation. To keep the
//! cost bounded and the output dimension fixed, each series is split into a
//! fixed number of chunks and DTW runs within corresponding chunk pairs:
//! 128 chunks for the two sample-rate series (original, smoothed) and 58 for
//! the four block series, giving a 488-value propagation profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;

/// Chunks per sample-rate series (original, smoothed).
pub const SAMPLE_SERIES_CHUNKS: usize = 128;
/// Chunks per block series (envelope, variance, maximum, minimum).
pub const BLOCK_SERIES_CHUNKS: usize = 58;
/// Total profile length: `2*128 + 4*58`.
pub const PROFILE_LEN: usize = 2 * SAMPLE_SERIES_CHUNKS + 4 * BLOCK_SERIES_CHUNKS;

/// Half-open index ranges of each feature inside a profile vector.
pub mod layout {
    use super::{BLOCK_SERIES_CHUNKS as B, SAMPLE_SERIES_CHUNKS as S};
    use std::ops::Range;

    pub const ORIGINAL: Range<usize> = 0..S;
    pub const SMOOTHED: Range<usize> = S..2 * S;
    pub const ENVELOPE: Range<usize> = 2 * S..2 * S + B;
    pub const VARIANCE: Range<usize> = 2 * S + B..2 * S + 2 * B;
    pub const MAXIMUM: Range<usize> = 2 * S + 2 * B..2 * S + 3 * B;
    pub const MINIMUM: Range<usize> = 2 * S + 3 * B..2 * S + 4 * B;
}

/// Training label of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Legitimate,
    Attack,
}

/// The 488 per-chunk DTW distances comparing two messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileVector {
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

impl ProfileVector {
    pub fn new(values: Vec<f64>, label: Option<Label>) -> Result<Self> {
        if values.len() != PROFILE_LEN {
            return Err(Error::DimensionMismatch {
                expected: PROFILE_LEN,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain(
                "profile values must be finite and non-negative",
            ));
        }
        Ok(ProfileVector { values, label })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Minimum cumulative cost of a monotone alignment between two series.
///
/// Costs are `w(i,j) = |X(i) - Y(j)|`; admissible steps are right, up and
/// diagonal; the path runs from `(0,0)` to `(m-1,n-1)`. Computed by dynamic
/// programming over a rolling pair of rows.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::domain("dtw_distance requires non-empty series"));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::domain("dtw_distance requires finite inputs"));
    }
    let n = y.len();
    let mut prev = vec![0.0f64; n];
    let mut curr = vec![0.0f64; n];

    prev[0] = (x[0] - y[0]).abs();
    for j in 1..n {
        prev[j] = prev[j - 1] + (x[0] - y[j]).abs();
    }
    for &xi in x.iter().skip(1) {
        curr[0] = prev[0] + (xi - y[0]).abs();
        for j in 1..n {
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = best + (xi - y[j]).abs();
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[n - 1])
}

/// Split a series into `chunk_count` contiguous chunks with floor-boundary
/// arithmetic: chunk `k` covers `[floor(k·L/C), floor((k+1)·L/C))`. Every
/// chunk is non-empty and the chunks partition the input.
pub fn chunk_series(series: &[f64], chunk_count: usize) -> Result<Vec<&[f64]>> {
    if chunk_count == 0 {
        return Err(Error::domain("chunk_count must be positive"));
    }
    if series.len() < chunk_count {
        return Err(Error::domain(format!(
            "series of {} elements cannot form {} chunks",
            series.len(),
            chunk_count
        )));
    }
    let l = series.len();
    Ok((0..chunk_count)
        .map(|k| &series[k * l / chunk_count..(k + 1) * l / chunk_count])
        .collect())
}

/// Options for profile construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProfileOptions {
    /// Z-score each series before chunked DTW. Off by default: the absolute
    /// amplitude levels are the signature being compared.
    pub normalize: bool,
}

fn zscore(series: &[f64]) -> Vec<f64> {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // treat numerically constant series as constant: summation noise alone
    // must not masquerade as structure
    let magnitude = series.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if std <= 1e-12 * magnitude {
        return vec![0.0; series.len()];
    }
    series.iter().map(|v| (v - mean) / std).collect()
}

fn profile_part(
    a: &[f64],
    b: &[f64],
    chunk_count: usize,
    opts: ProfileOptions,
    out: &mut Vec<f64>,
) -> Result<()> {
    let (na, nb);
    let (a, b) = if opts.normalize {
        na = zscore(a);
        nb = zscore(b);
        (na.as_slice(), nb.as_slice())
    } else {
        (a, b)
    };
    let ca = chunk_series(a, chunk_count).map_err(|_| Error::SegmentTooShort {
        required: chunk_count,
        actual: a.len(),
    })?;
    let cb = chunk_series(b, chunk_count).map_err(|_| Error::SegmentTooShort {
        required: chunk_count,
        actual: b.len(),
    })?;
    for (xa, xb) in ca.iter().zip(cb.iter()) {
        out.push(dtw_distance(xa, xb)?);
    }
    Ok(())
}

/// Assemble the 488-value propagation profile comparing two feature sets.
pub fn build_profile(a: &FeatureSet, b: &FeatureSet) -> Result<ProfileVector> {
    build_profile_with(a, b, ProfileOptions::default())
}

/// [`build_profile`] with explicit options.
pub fn build_profile_with(
    a: &FeatureSet,
    b: &FeatureSet,
    opts: ProfileOptions,
) -> Result<ProfileVector> {
    let mut values = Vec::with_capacity(PROFILE_LEN);
    profile_part(&a.original, &b.original, SAMPLE_SERIES_CHUNKS, opts, &mut values)?;
    profile_part(&a.smoothed, &b.smoothed, SAMPLE_SERIES_CHUNKS, opts, &mut values)?;
    profile_part(&a.envelope, &b.envelope, BLOCK_SERIES_CHUNKS, opts, &mut values)?;
    profile_part(&a.variance, &b.variance, BLOCK_SERIES_CHUNKS, opts, &mut values)?;
    profile_part(&a.maximum, &b.maximum, BLOCK_SERIES_CHUNKS, opts, &mut values)?;
    profile_part(&a.minimum, &b.minimum, BLOCK_SERIES_CHUNKS, opts, &mut values)?;
    ProfileVector::new(values, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive minimum path cost over all monotone paths; exponential,
    /// only usable for tiny inputs. Kept independent of the DP implementation.
    fn brute_force_dtw(x: &[f64], y: &[f64]) -> f64 {
        fn go(x: &[f64], y: &[f64], i: usize, j: usize) -> f64 {
            let w = (x[i] - y[j]).abs();
            if i == x.len() - 1 && j == y.len() - 1 {
                return w;
            }
            let mut best = f64::INFINITY;
            if i + 1 < x.len() {
                best = best.min(go(x, y, i + 1, j));
            }
            if j + 1 < y.len() {
                best = best.min(go(x, y, i, j + 1));
            }
            if i + 1 < x.len() && j + 1 < y.len() {
                best = best.min(go(x, y, i + 1, j + 1));
            }
            w + best
        }
        go(x, y, 0, 0)
    }

    #[test]
    fn identical_series_have_zero_distance() {
        let x = vec![0.4, 1.9, -2.0, 3.3, 0.0];
        assert_eq!(dtw_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn small_example_matches_brute_force() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 3.0, 4.0];
        assert_eq!(brute_force_dtw(&x, &y), 2.0);
        assert_eq!(dtw_distance(&x, &y).unwrap(), 2.0);
    }

    #[test]
    fn single_element_path_is_forced() {
        assert_eq!(dtw_distance(&[5.0], &[1.0, 2.0]).unwrap(), 7.0);
    }

    #[test]
    fn rejects_empty_series() {
        assert!(dtw_distance(&[], &[1.0]).is_err());
        assert!(dtw_distance(&[1.0], &[]).is_err());
    }

    #[test]
    fn dtw_never_exceeds_aligned_l1() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3 + 0.4).sin()).collect();
        let l1: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        assert!(dtw_distance(&x, &y).unwrap() <= l1 + 1e-12);
    }

    #[test]
    fn chunking_divides_evenly_when_possible() {
        let series: Vec<f64> = (0..12_800).map(|i| i as f64).collect();
        let chunks = chunk_series(&series, 128).unwrap();
        assert_eq!(chunks.len(), 128);
        assert!(chunks.iter().all(|c| c.len() == 100));
    }

    #[test]
    fn chunking_uneven_lengths() {
        let series: Vec<f64> = (0..59).map(|i| i as f64).collect();
        let chunks = chunk_series(&series, 58).unwrap();
        assert_eq!(chunks.len(), 58);
        let ones = chunks.iter().filter(|c| c.len() == 1).count();
        let twos = chunks.iter().filter(|c| c.len() == 2).count();
        assert_eq!((ones, twos), (57, 1));
    }

    #[test]
    fn chunks_partition_the_series() {
        let series: Vec<f64> = (0..307).map(|i| (i as f64).cos()).collect();
        for c in [1, 2, 57, 128, 307] {
            let chunks = chunk_series(&series, c).unwrap();
            let rebuilt: Vec<f64> = chunks.iter().flat_map(|c| c.iter().cloned()).collect();
            assert_eq!(rebuilt, series);
            assert!(chunks.iter().all(|c| !c.is_empty()));
        }
    }

    #[test]
    fn chunking_rejects_short_series() {
        assert!(chunk_series(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn single_chunk_equals_whole_series_dtw() {
        let x: Vec<f64> = (0..31).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..27).map(|i| (i as f64 * 0.5).cos()).collect();
        let whole = dtw_distance(&x, &y).unwrap();
        let cx = chunk_series(&x, 1).unwrap();
        let cy = chunk_series(&y, 1).unwrap();
        assert_eq!(dtw_distance(cx[0], cy[0]).unwrap(), whole);
    }

    fn synthetic_features(scale: f64, blocks: usize) -> FeatureSet {
        let len = blocks * 50;
        let original: Vec<f64> = (0..len)
            .map(|i| scale * (1.0 + 0.5 * ((i / 100) % 2) as f64))
            .collect();
        let smoothed = original.clone();
        let per_block = |f: &dyn Fn(usize) -> f64| (0..blocks).map(f).collect::<Vec<f64>>();
        FeatureSet {
            envelope: per_block(&|b| scale * (b % 3) as f64 + 1.0),
            variance: per_block(&|b| scale * 0.1 * (b % 5) as f64),
            maximum: per_block(&|b| scale * (1.5 + (b % 2) as f64)),
            minimum: per_block(&|_| scale),
            original,
            smoothed,
        }
    }

    #[test]
    fn profile_of_identical_features_is_zero() {
        let f = synthetic_features(1.0, 58);
        let p = build_profile(&f, &f).unwrap();
        assert_eq!(p.len(), PROFILE_LEN);
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn profile_is_symmetric() {
        let a = synthetic_features(1.0, 60);
        let b = synthetic_features(1.3, 60);
        let ab = build_profile(&a, &b).unwrap();
        let ba = build_profile(&b, &a).unwrap();
        assert_eq!(ab.values, ba.values);
    }

    #[test]
    fn perturbing_variance_touches_only_its_layout_range() {
        let a = synthetic_features(1.0, 58);
        let mut b = synthetic_features(1.0, 58);
        for v in b.variance.iter_mut() {
            *v += 1.0;
        }
        let p = build_profile(&a, &b).unwrap();
        for (i, &v) in p.values.iter().enumerate() {
            if layout::VARIANCE.contains(&i) {
                assert!(v > 0.0, "index {i} inside variance range should differ");
            } else {
                assert_eq!(v, 0.0, "index {i} outside variance range changed");
            }
        }
        assert_eq!(layout::VARIANCE, 314..372);
    }

    #[test]
    fn zscore_option_makes_profiles_scale_invariant() {
        let a = synthetic_features(1.0, 58);
        let mut b = synthetic_features(1.7, 58);
        b.variance.reverse();
        let plain = build_profile(&a, &b).unwrap();
        let opts = ProfileOptions { normalize: true };
        let normalized = build_profile_with(&a, &b, opts).unwrap();
        assert_ne!(plain.values, normalized.values);
        assert!(normalized.values[layout::VARIANCE].iter().any(|&v| v > 0.0));
        // scaling both inputs is invisible after per-series z-scoring
        let a2 = synthetic_features(3.0, 58);
        let mut b2 = synthetic_features(3.0 * 1.7, 58);
        b2.variance.reverse();
        let normalized_scaled = build_profile_with(&a2, &b2, opts).unwrap();
        for (x, y) in normalized.values.iter().zip(&normalized_scaled.values) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn profile_rejects_underlength_features() {
        let f = synthetic_features(1.0, 30); // 30 blocks < 58
        match build_profile(&f, &f) {
            Err(Error::SegmentTooShort { .. }) => {}
            other => panic!("expected SegmentTooShort, got {other:?}"),
        }
    }

    #[test]
    fn brute_force_agreement_on_random_small_series() {
        // deterministic xorshift so the test needs no rng dependency here
        let mut state = 0x2545_F491_4F6C_DD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 8.0 - 4.0
        };
        for _ in 0..300 {
            let m = 1 + (next().abs() as usize) % 6;
            let n = 1 + (next().abs() as usize) % 6;
            let x: Vec<f64> = (0..m).map(|_| next()).collect();
            let y: Vec<f64> = (0..n).map(|_| next()).collect();
            let fast = dtw_distance(&x, &y).unwrap();
            let slow = brute_force_dtw(&x, &y);
            assert!(
                (fast - slow).abs() < 1e-12,
                "dp {fast} != brute force {slow} for {x:?} vs {y:?}"
            );
        }
    }
}
