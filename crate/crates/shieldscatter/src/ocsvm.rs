//! ν one-class SVM over propagation profiles.
//!
//! Legitimate profiles cluster tightly in the 488-dimensional DTW-distance
//! space, so novelty detection with a Gaussian kernel separates them from
//! attack profiles without ever training on attacks. The dual problem
//!
//! ```text
//!   min_α  (1/2) Σ_ij α_i α_j K(x_i, x_j)
//!   s.t.   0 ≤ α_i ≤ 1/(νl),   Σ_i α_i = 1
//! ```
//!
//! is solved by two-coordinate working-set descent: the equality constraint
//! makes a transfer of mass between the maximal violating pair the smallest
//! feasible move, and each transfer has a closed-form optimum. ν upper-bounds
//! the fraction of training outliers and lower-bounds the fraction of
//! support vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dtw::{Label, ProfileVector};
use crate::error::{Error, Result};

/// Kernel width selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaMode {
    /// Median pairwise distance over the training set.
    Auto,
    Fixed(f64),
}

/// Training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcsvmConfig {
    /// Outlier-fraction bound ν in (0, 1].
    pub nu: f64,
    pub sigma: SigmaMode,
    /// Maximal tolerated KKT violation at convergence.
    pub solver_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OcsvmConfig {
    fn default() -> Self {
        OcsvmConfig {
            nu: 0.16,
            sigma: SigmaMode::Auto,
            solver_tolerance: 1e-6,
            max_iterations: 200_000,
        }
    }
}

impl OcsvmConfig {
    fn validate(&self) -> Result<()> {
        if self.nu.is_nan() || self.nu <= 0.0 || self.nu > 1.0 {
            return Err(Error::invalid("nu must lie in (0, 1]"));
        }
        if let SigmaMode::Fixed(s) = self.sigma {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::invalid("sigma must be positive and finite"));
            }
        }
        if self.solver_tolerance.is_nan() || self.solver_tolerance <= 0.0 {
            return Err(Error::invalid("solver_tolerance must be positive"));
        }
        Ok(())
    }
}

/// A trained one-class model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcsvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub sigma: f64,
    pub nu: f64,
    /// Number of training points the model was fit on.
    pub training_size: usize,
}

impl OcsvmModel {
    /// Dimension of the profile space this model judges.
    pub fn dimension(&self) -> usize {
        self.support_vectors.first().map_or(0, |v| v.len())
    }

    /// Check the dual feasibility invariants of the stored coefficients.
    pub fn validate(&self) -> Result<()> {
        let bound = 1.0 / (self.nu * self.training_size as f64);
        let tol = 1e-6;
        for &a in &self.alphas {
            if a < -tol || a > bound + tol {
                return Err(Error::domain(format!(
                    "coefficient {a} outside [0, {bound}]"
                )));
            }
        }
        let sum: f64 = self.alphas.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::domain(format!("coefficients sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Gaussian kernel `exp(-||a-b||^2 / (2σ^2))`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], sigma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::domain("sigma must be positive"));
    }
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((-sq / (2.0 * sigma * sigma)).exp())
}

// Fixed seed for the pairwise-distance subsample so auto_sigma is a pure
// function of its input.
const SIGMA_SAMPLE_SEED: u64 = 0x5ca1_ab1e;
const SIGMA_SAMPLE_PAIRS: usize = 1000;

/// Median pairwise Euclidean distance over (a sample of) the training set.
///
/// Returns 1 when every point coincides.
pub fn auto_sigma(training: &[Vec<f64>]) -> Result<f64> {
    if training.len() < 2 {
        return Err(Error::domain("auto_sigma needs at least 2 vectors"));
    }
    let l = training.len();
    let mut distances: Vec<f64> = Vec::new();
    let all_pairs = l * (l - 1) / 2;
    if all_pairs <= SIGMA_SAMPLE_PAIRS {
        for i in 0..l {
            for j in (i + 1)..l {
                distances.push(euclidean(&training[i], &training[j]));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(SIGMA_SAMPLE_SEED);
        for _ in 0..SIGMA_SAMPLE_PAIRS {
            let i = rng.random_range(0..l);
            let mut j = rng.random_range(0..l - 1);
            if j >= i {
                j += 1;
            }
            distances.push(euclidean(&training[i], &training[j]));
        }
    }
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = distances.len() / 2;
    let median = if distances.len() % 2 == 1 {
        distances[mid]
    } else {
        (distances[mid - 1] + distances[mid]) / 2.0
    };
    if median > 0.0 {
        Ok(median)
    } else {
        // degenerate cloud: all sampled points identical
        let nonzero: Vec<f64> = distances.iter().cloned().filter(|&d| d > 0.0).collect();
        if nonzero.is_empty() {
            Ok(1.0)
        } else {
            Ok(nonzero.iter().sum::<f64>() / nonzero.len() as f64)
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Train on profile vectors. Attack-labeled profiles are excluded: the
/// one-class dual has no negative-label term, so negatives only ever inform
/// model selection, never the solver itself.
pub fn train(profiles: &[ProfileVector], cfg: &OcsvmConfig) -> Result<OcsvmModel> {
    let data: Vec<Vec<f64>> = profiles
        .iter()
        .filter(|p| p.label != Some(Label::Attack))
        .map(|p| p.values.clone())
        .collect();
    train_vectors(&data, cfg)
}

/// Train on raw vectors of any (consistent) dimension.
pub fn train_vectors(data: &[Vec<f64>], cfg: &OcsvmConfig) -> Result<OcsvmModel> {
    cfg.validate()?;
    let l = data.len();
    if l < 2 {
        return Err(Error::invalid("training needs at least 2 points"));
    }
    let dim = data[0].len();
    if data.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("training vectors have mixed dimensions"));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training vectors must be finite"));
    }

    let sigma = match cfg.sigma {
        SigmaMode::Fixed(s) => s,
        SigmaMode::Auto => auto_sigma(data)?,
    };

    // Dense kernel matrix; training sets here are at most a few thousand
    // points, so l^2 doubles are fine.
    let mut kernel = vec![0.0f64; l * l];
    for i in 0..l {
        kernel[i * l + i] = 1.0;
        for j in (i + 1)..l {
            let k = gaussian_kernel(&data[i], &data[j], sigma)?;
            kernel[i * l + j] = k;
            kernel[j * l + i] = k;
        }
    }

    let bound = 1.0 / (cfg.nu * l as f64);
    let mut alpha = vec![0.0f64; l];
    // Feasible start: the first floor(νl) points take the full box bound and
    // the next point absorbs the fractional remainder, so Σα = 1.
    let full = (cfg.nu * l as f64).floor() as usize;
    for a in alpha.iter_mut().take(full.min(l)) {
        *a = bound;
    }
    if full < l {
        alpha[full] = 1.0 - full as f64 * bound;
    }

    // gradient of the dual objective: g = K α
    let mut grad = vec![0.0f64; l];
    for (j, &aj) in alpha.iter().enumerate() {
        if aj > 0.0 {
            let row = &kernel[j * l..(j + 1) * l];
            for (g, &k) in grad.iter_mut().zip(row) {
                *g += aj * k;
            }
        }
    }

    let eps = bound * 1e-12;
    let mut iterations = 0usize;
    let mut violation = f64::INFINITY;
    while iterations < cfg.max_iterations {
        // maximal violating pair: mass flows from the highest gradient held
        // by a positive coefficient to the lowest gradient with box room
        let mut up: Option<usize> = None; // receiver (α < C)
        let mut down: Option<usize> = None; // donor (α > 0)
        for i in 0..l {
            if alpha[i] < bound - eps && up.is_none_or(|u| grad[i] < grad[u]) {
                up = Some(i);
            }
            if alpha[i] > eps && down.is_none_or(|d| grad[i] > grad[d]) {
                down = Some(i);
            }
        }
        let (i, j) = match (up, down) {
            (Some(i), Some(j)) => (i, j),
            _ => break,
        };
        violation = grad[j] - grad[i];
        if violation <= cfg.solver_tolerance {
            break;
        }

        let curvature = kernel[i * l + i] + kernel[j * l + j] - 2.0 * kernel[i * l + j];
        let room = (bound - alpha[i]).min(alpha[j]);
        let step = if curvature > 1e-14 {
            (violation / curvature).min(room)
        } else {
            room
        };
        alpha[i] += step;
        alpha[j] -= step;
        let (ri, rj) = (&kernel[i * l..(i + 1) * l], &kernel[j * l..(j + 1) * l]);
        for ((g, &ki), &kj) in grad.iter_mut().zip(ri).zip(rj) {
            *g += step * (ki - kj);
        }
        iterations += 1;
    }
    if iterations >= cfg.max_iterations && violation > cfg.solver_tolerance {
        return Err(Error::SolverFailure {
            iterations,
            violation,
        });
    }

    // Bias: average decision value over unbounded support vectors; when none
    // exist, midpoint between the bounded-SV maximum and the zero-α minimum.
    let sv_eps = bound * 1e-9;
    let unbounded: Vec<usize> = (0..l)
        .filter(|&i| alpha[i] > sv_eps && alpha[i] < bound - sv_eps)
        .collect();
    let rho = if !unbounded.is_empty() {
        unbounded.iter().map(|&i| grad[i]).sum::<f64>() / unbounded.len() as f64
    } else {
        let lo = (0..l)
            .filter(|&i| alpha[i] >= bound - sv_eps)
            .map(|i| grad[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = (0..l)
            .filter(|&i| alpha[i] <= sv_eps)
            .map(|i| grad[i])
            .fold(f64::INFINITY, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo + hi) / 2.0,
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => return Err(Error::domain("no support vectors after training")),
        }
    };

    let mut support_vectors = Vec::new();
    let mut alphas = Vec::new();
    for i in 0..l {
        if alpha[i] > sv_eps {
            support_vectors.push(data[i].clone());
            alphas.push(alpha[i]);
        }
    }

    let model = OcsvmModel {
        support_vectors,
        alphas,
        rho,
        sigma,
        nu: cfg.nu,
        training_size: l,
    };
    model.validate()?;
    Ok(model)
}

/// Score a sample and classify it.
///
/// `score = Σ_i α_i K(x_i, x) - ρ`; a non-negative score (the boundary
/// included) is legitimate.
pub fn decide(model: &OcsvmModel, x: &[f64]) -> Result<(f64, Label)> {
    if x.len() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            actual: x.len(),
        });
    }
    let mut score = 0.0;
    for (sv, &a) in model.support_vectors.iter().zip(&model.alphas) {
        score += a * gaussian_kernel(sv, x, model.sigma)?;
    }
    score -= model.rho;
    let label = if score >= 0.0 {
        Label::Legitimate
    } else {
        Label::Attack
    };
    Ok((score, label))
}

/// Dual objective value `(1/2) Σ_ij α_i α_j K(x_i,x_j)` of a trained model,
/// recomputed from its stored support vectors.
pub fn dual_objective(model: &OcsvmModel) -> f64 {
    let mut obj = 0.0;
    for (i, (svi, &ai)) in model
        .support_vectors
        .iter()
        .zip(&model.alphas)
        .enumerate()
    {
        for (svj, &aj) in model.support_vectors.iter().zip(&model.alphas).skip(i + 1) {
            obj += ai * aj * gaussian_kernel(svi, svj, model.sigma).unwrap();
        }
    }
    obj + 0.5 * model.alphas.iter().map(|a| a * a).sum::<f64>()
}
