//! Reference-solver checks for the one-class dual: a dense projected-gradient
//! QP solver, independent of the working-set implementation, must agree with
//! it on small instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use shieldscatter::ocsvm::{gaussian_kernel, train_vectors, OcsvmConfig, SigmaMode};

/// Euclidean projection onto `{α : Σα = 1, 0 ≤ α ≤ cap}` by bisecting the
/// shift τ in `α_i = clamp(v_i − τ, 0, cap)`.
fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let sum_at = |tau: f64| -> f64 {
        v.iter().map(|&x| (x - tau).clamp(0.0, cap)).sum()
    };
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - tau).clamp(0.0, cap)).collect()
}

/// Dense projected-gradient descent on ½αᵀKα over the capped simplex.
fn pgd_reference(kernel: &[Vec<f64>], cap: f64, tolerance: f64) -> Vec<f64> {
    let l = kernel.len();
    // Lipschitz bound on the gradient: the max row sum dominates the
    // spectral norm of a PSD matrix.
    let lipschitz = kernel
        .iter()
        .map(|row| row.iter().map(|k| k.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let step = 1.0 / lipschitz;

    let mut alpha = project_capped_simplex(&vec![1.0 / l as f64; l], cap);
    for _ in 0..500_000 {
        let grad: Vec<f64> = (0..l)
            .map(|i| {
                kernel[i]
                    .iter()
                    .zip(&alpha)
                    .map(|(k, a)| k * a)
                    .sum::<f64>()
            })
            .collect();
        let proposal: Vec<f64> = alpha
            .iter()
            .zip(&grad)
            .map(|(a, g)| a - step * g)
            .collect();
        let next = project_capped_simplex(&proposal, cap);
        let shift = next
            .iter()
            .zip(&alpha)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        alpha = next;
        if shift < tolerance {
            break;
        }
    }
    alpha
}

fn objective(kernel: &[Vec<f64>], alpha: &[f64]) -> f64 {
    let mut obj = 0.0;
    for (i, row) in kernel.iter().enumerate() {
        for (j, k) in row.iter().enumerate() {
            obj += alpha[i] * alpha[j] * k;
        }
    }
    0.5 * obj
}

fn gaussian_cloud(l: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..l)
        .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
        .collect()
}

fn kernel_matrix(data: &[Vec<f64>], sigma: f64) -> Vec<Vec<f64>> {
    data.iter()
        .map(|a| {
            data.iter()
                .map(|b| gaussian_kernel(a, b, sigma).unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn projection_oracle_is_feasible_and_idempotent() {
    let v = vec![0.9, -0.3, 0.5, 0.2, 0.05];
    let cap = 0.4;
    let p = project_capped_simplex(&v, cap);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert!(p.iter().all(|&a| (-1e-12..=cap + 1e-12).contains(&a)));
    let p2 = project_capped_simplex(&p, cap);
    for (a, b) in p.iter().zip(&p2) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn solver_matches_reference_on_thirty_point_plane() {
    let data = gaussian_cloud(30, 2, 11);
    let sigma = 1.5;
    let nu = 0.2;
    let cfg = OcsvmConfig {
        nu,
        sigma: SigmaMode::Fixed(sigma),
        solver_tolerance: 1e-9,
        max_iterations: 2_000_000,
    };
    let model = train_vectors(&data, &cfg).unwrap();

    let kernel = kernel_matrix(&data, sigma);
    let cap = 1.0 / (nu * data.len() as f64);
    let reference = pgd_reference(&kernel, cap, 1e-11);

    // compare dual objectives; the coefficients themselves may differ when
    // the optimum is degenerate, the objective may not
    let mut alpha_full = vec![0.0; data.len()];
    for (sv, &a) in model.support_vectors.iter().zip(&model.alphas) {
        let idx = data.iter().position(|d| d == sv).unwrap();
        alpha_full[idx] += a;
    }
    let ours = objective(&kernel, &alpha_full);
    let theirs = objective(&kernel, &reference);
    assert!(
        (ours - theirs).abs() < 1e-4,
        "objective {ours} vs reference {theirs}"
    );
}

#[test]
fn solver_objective_never_exceeds_reference_on_small_instances() {
    for seed in 0..6u64 {
        let l = 10 + (seed as usize * 7) % 31; // 10..40
        let dim = 2 + (seed as usize) % 5;
        let nu = [0.15, 0.3, 0.6][(seed as usize) % 3];
        let data = gaussian_cloud(l, dim, 100 + seed);
        let sigma = 2.0;
        let cfg = OcsvmConfig {
            nu,
            sigma: SigmaMode::Fixed(sigma),
            solver_tolerance: 1e-9,
            max_iterations: 2_000_000,
        };
        let model = train_vectors(&data, &cfg).unwrap();

        let kernel = kernel_matrix(&data, sigma);
        let cap = 1.0 / (nu * l as f64);
        let reference = pgd_reference(&kernel, cap, 1e-11);

        let mut alpha_full = vec![0.0; l];
        for (sv, &a) in model.support_vectors.iter().zip(&model.alphas) {
            let idx = data.iter().position(|d| d == sv).unwrap();
            alpha_full[idx] += a;
        }
        assert!((alpha_full.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(alpha_full.iter().all(|&a| a <= cap + 1e-6));

        let ours = objective(&kernel, &alpha_full);
        let theirs = objective(&kernel, &reference);
        assert!(
            ours <= theirs + 1e-6,
            "seed {seed}: objective {ours} above reference {theirs}"
        );
    }
}
