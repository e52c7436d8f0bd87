//! Property-based invariants for the numeric kernels.

use num_complex::Complex64;
use proptest::prelude::*;

use shieldscatter::channel::Trace;
use shieldscatter::dtw::{build_profile, chunk_series, dtw_distance};
use shieldscatter::features::{extract_features, FeatureSet};
use shieldscatter::ocsvm::gaussian_kernel;
use shieldscatter::segment::{auto_threshold, energy_envelope, Segment};

/// Exhaustive DTW over all monotone paths; usable only for tiny series.
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

fn trace_from(re_im: Vec<(f64, f64)>) -> Trace {
    Trace {
        samples: re_im
            .into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect(),
        sample_rate: 1.0e6,
        truth: None,
    }
}

fn segment_from(amplitudes: &[f64]) -> Segment {
    let samples: Vec<Complex64> = amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    let n = samples.len();
    Segment {
        eta1: 0,
        eta2: n,
        eta3: 0,
        eta4: n,
        eta_s: 0,
        eta_e: n,
        samples,
        per_tag_energy: vec![],
    }
}

proptest! {
    #[test]
    fn dtw_matches_exhaustive_enumeration(
        x in prop::collection::vec(-10.0..10.0f64, 1..=6),
        y in prop::collection::vec(-10.0..10.0f64, 1..=6),
    ) {
        let fast = dtw_distance(&x, &y).unwrap();
        let slow = brute_force_dtw(&x, &y);
        prop_assert!((fast - slow).abs() < 1e-12, "dp {fast} vs enumeration {slow}");
    }

    #[test]
    fn dtw_is_symmetric_and_bounded_by_l1(
        x in prop::collection::vec(-5.0..5.0f64, 1..40),
        y in prop::collection::vec(-5.0..5.0f64, 1..40),
    ) {
        let xy = dtw_distance(&x, &y).unwrap();
        let yx = dtw_distance(&y, &x).unwrap();
        prop_assert!((xy - yx).abs() < 1e-12);
        if x.len() == y.len() {
            let l1: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(xy <= l1 + 1e-12);
        }
    }

    #[test]
    fn chunks_partition_and_stay_nonempty(
        series in prop::collection::vec(-100.0..100.0f64, 1..300),
        chunks in 1usize..60,
    ) {
        prop_assume!(series.len() >= chunks);
        let parts = chunk_series(&series, chunks).unwrap();
        prop_assert_eq!(parts.len(), chunks);
        prop_assert!(parts.iter().all(|p| !p.is_empty()));
        let rebuilt: Vec<f64> = parts.iter().flat_map(|p| p.iter().cloned()).collect();
        prop_assert_eq!(rebuilt, series);
    }

    #[test]
    fn envelope_is_phase_invariant_and_quadratic(
        samples in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 60..200),
        phase in 0.0..std::f64::consts::TAU,
        scale in 0.1..4.0f64,
    ) {
        let trace = trace_from(samples.clone());
        let env = energy_envelope(&trace, 16).unwrap();

        let rot = Complex64::from_polar(1.0, phase);
        let rotated = Trace {
            samples: trace.samples.iter().map(|x| x * rot).collect(),
            sample_rate: trace.sample_rate,
            truth: None,
        };
        let env_rot = energy_envelope(&rotated, 16).unwrap();
        for (a, b) in env.iter().zip(&env_rot) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }

        let scaled = Trace {
            samples: trace.samples.iter().map(|x| x * scale).collect(),
            sample_rate: trace.sample_rate,
            truth: None,
        };
        let env_scaled = energy_envelope(&scaled, 16).unwrap();
        for (a, b) in env.iter().zip(&env_scaled) {
            prop_assert!((a * scale * scale - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn auto_threshold_is_order_free(
        mut levels in prop::collection::vec(0.0..10.0f64, 1..12),
    ) {
        let t = auto_threshold(&levels).unwrap();
        levels.reverse();
        prop_assert_eq!(auto_threshold(&levels).unwrap(), t);
    }

    #[test]
    fn feature_extraction_is_homogeneous(
        amplitudes in prop::collection::vec(0.0..5.0f64, 2900..3100),
        scale in 0.25..3.0f64,
    ) {
        let f1 = extract_features(&segment_from(&amplitudes)).unwrap();
        let scaled: Vec<f64> = amplitudes.iter().map(|a| a * scale).collect();
        let f2 = extract_features(&segment_from(&scaled)).unwrap();
        for (a, b) in f1.maximum.iter().zip(&f2.maximum) {
            prop_assert!((a * scale - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        for (a, b) in f1.envelope.iter().zip(&f2.envelope) {
            prop_assert!((a * scale * scale - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        for (a, b) in f1.variance.iter().zip(&f2.variance) {
            prop_assert!((a * scale * scale - b).abs() < 1e-7 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn concatenating_block_aligned_segments_concatenates_block_features(
        a in prop::collection::vec(0.0..5.0f64, 1..4),
        b in prop::collection::vec(0.0..5.0f64, 1..4),
    ) {
        // lengths are multiples of the 50-sample block
        let left: Vec<f64> = a.iter().flat_map(|&v| std::iter::repeat_n(v, 50 * 60)).collect();
        let right: Vec<f64> = b.iter().flat_map(|&v| std::iter::repeat_n(v, 50 * 60)).collect();
        let joined: Vec<f64> = left.iter().chain(right.iter()).cloned().collect();
        let fl = extract_features(&segment_from(&left)).unwrap();
        let fr = extract_features(&segment_from(&right)).unwrap();
        let fj = extract_features(&segment_from(&joined)).unwrap();
        let cat: Vec<f64> = fl.envelope.iter().chain(fr.envelope.iter()).cloned().collect();
        prop_assert_eq!(fj.envelope, cat);
        let cat: Vec<f64> = fl.maximum.iter().chain(fr.maximum.iter()).cloned().collect();
        prop_assert_eq!(fj.maximum, cat);
    }

    #[test]
    fn gaussian_kernel_is_symmetric_and_unit_bounded(
        a in prop::collection::vec(-10.0..10.0f64, 4),
        b in prop::collection::vec(-10.0..10.0f64, 4),
        sigma in 0.1..5.0f64,
    ) {
        let kab = gaussian_kernel(&a, &b, sigma).unwrap();
        let kba = gaussian_kernel(&b, &a, sigma).unwrap();
        prop_assert_eq!(kab, kba);
        prop_assert!((0.0..=1.0).contains(&kab));
        let exponent: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
            / (2.0 * sigma * sigma);
        if exponent < 700.0 {
            prop_assert!(kab > 0.0, "kernel underflowed with representable exponent");
        }
    }

    #[test]
    fn profile_symmetry_on_synthetic_features(
        seed_a in 0u64..1000,
        seed_b in 0u64..1000,
    ) {
        let make = |seed: u64| {
            let wave = |i: usize| ((i as f64 + seed as f64) * 0.37).sin().abs() + 0.5;
            let original: Vec<f64> = (0..3000).map(wave).collect();
            FeatureSet {
                smoothed: original.clone(),
                envelope: (0..60).map(|b| wave(b * 50) * wave(b * 50)).collect(),
                variance: (0..60).map(|b| wave(b * 13) * 0.1).collect(),
                maximum: (0..60).map(|b| wave(b * 7) + 1.0).collect(),
                minimum: (0..60).map(|b| wave(b * 7) * 0.5).collect(),
                original,
            }
        };
        let (fa, fb) = (make(seed_a), make(seed_b));
        let ab = build_profile(&fa, &fb).unwrap();
        let ba = build_profile(&fb, &fa).unwrap();
        prop_assert_eq!(ab.values, ba.values);
    }
}
