//! Analytic empirical variational Bayesian matrix factorization (EVBMF).
//!
//! For an `L x M` matrix (oriented so that `L <= M`) the global analytic
//! solution retains every singular value above
//! `sqrt(M * sigma2 * (1 + tau) * (1 + alpha / tau))` with `alpha = L / M` and
//! `tau = 2.5129 * sqrt(alpha)`, and shrinks each retained value toward zero.
//! When the noise variance is unknown it is chosen by minimizing the
//! empirical-Bayes free energy over a bracket derived from the spectrum.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimize::bounded_brent;
use crate::tensor::UnfoldedMatrix;

const TAU_COEF: f64 = 2.5129;
const MINIMIZER_REL_TOL: f64 = 1e-9;
const MINIMIZER_MAX_ITER: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationResult {
    pub rank: usize,
    pub shrunk_singular_values: Vec<f64>,
    pub raw_singular_values: Vec<f64>,
    pub noise_variance: f64,
    /// Shape after orientation normalization (`rows <= cols`).
    pub rows: usize,
    pub cols: usize,
    pub threshold: f64,
    pub noise_estimated: bool,
    /// The estimation bracket collapsed and the upper bound was returned.
    pub degenerate_bounds: bool,
}

impl FactorizationResult {
    pub fn is_empty(&self) -> bool {
        self.rank == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseEstimate {
    pub sigma2: f64,
    pub lower: f64,
    pub upper: f64,
    pub degenerate_bounds: bool,
    pub iterations: usize,
}

fn tau_bar(l: usize, m: usize) -> f64 {
    TAU_COEF * (l as f64 / m as f64).sqrt()
}

/// Normalized threshold `x̄ = (1 + τ̄)(1 + α/τ̄)` on `γ² / (M σ²)`.
pub fn normalized_threshold(l: usize, m: usize) -> f64 {
    let alpha = l as f64 / m as f64;
    let tau = tau_bar(l, m);
    (1.0 + tau) * (1.0 + alpha / tau)
}

pub fn vb_threshold(l: usize, m: usize, sigma2: f64) -> f64 {
    (m as f64 * sigma2 * normalized_threshold(l, m)).sqrt()
}

/// Posterior mean of a retained singular value `gamma`.
pub fn shrink(gamma: f64, l: usize, m: usize, sigma2: f64) -> f64 {
    let (l, m) = (l as f64, m as f64);
    let g2 = gamma * gamma;
    let base = 1.0 - (l + m) * sigma2 / g2;
    let disc = (base * base - 4.0 * l * m * sigma2 * sigma2 / (g2 * g2)).max(0.0);
    0.5 * gamma * (base + disc.sqrt())
}

fn tau(x: f64, alpha: f64) -> f64 {
    let b = x - (1.0 + alpha);
    0.5 * (b + (b * b - 4.0 * alpha).max(0.0).sqrt())
}

/// Free energy `F(σ²)` evaluated on squared singular values.
///
/// Exactly-zero singular values contribute only their `σ²`-dependent part
/// (`log(M σ²)`); the dropped `-log 0` term is constant in `σ²`.
pub fn free_energy_sq(sigma2: f64, gamma_sq: &[f64], l: usize, m: usize, residual: f64) -> f64 {
    let alpha = l as f64 / m as f64;
    let xbar = normalized_threshold(l, m);
    let scale = m as f64 * sigma2;
    let log_scale = scale.ln();
    let mut total = 0.0;
    for &g2 in gamma_sq {
        let x = g2 / scale;
        if x > xbar {
            let t = tau(x, alpha);
            total += x - t + ((t + 1.0) / x).ln() + alpha * (t / alpha + 1.0).ln();
        } else if g2 > 0.0 {
            total += x - (g2.ln() - log_scale);
        } else {
            total += log_scale;
        }
    }
    let h = gamma_sq.len();
    total + residual / scale + (l - h) as f64 * sigma2.ln()
}

pub fn free_energy(sigma2: f64, singular_values: &[f64], l: usize, m: usize, residual: f64) -> f64 {
    let sq: Vec<f64> = singular_values.iter().map(|g| g * g).collect();
    free_energy_sq(sigma2, &sq, l, m, residual)
}

/// Bracket `[lower, upper]` searched for the noise variance.
pub fn noise_bounds(singular_values: &[f64], l: usize, m: usize, residual: f64) -> (f64, f64) {
    let xbar = normalized_threshold(l, m);
    let alpha = l as f64 / m as f64;
    let total: f64 = singular_values.iter().map(|g| g * g).sum();
    let upper = (total + residual) / (l * m) as f64;
    let k = ((l as f64 / (1.0 + alpha)).ceil() as usize).saturating_sub(1).min(l - 1);
    let tail = &singular_values[k..];
    let tail_mean = tail.iter().map(|g| g * g).sum::<f64>() / tail.len() as f64;
    let lower = (singular_values[k].powi(2) / (m as f64 * xbar)).max(tail_mean / m as f64);
    (lower, upper)
}

pub fn estimate_noise_variance(
    singular_values: &[f64],
    l: usize,
    m: usize,
    residual: f64,
) -> Result<NoiseEstimate> {
    if l == 0 || l > m || singular_values.len() != l {
        return Err(Error::Validation(format!(
            "noise estimation needs L <= M and L singular values (L={l}, M={m}, got {})",
            singular_values.len()
        )));
    }
    if singular_values.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Validation("singular values must be descending".into()));
    }
    if !(singular_values[0] > 0.0) || !residual.is_finite() || residual < 0.0 {
        return Err(Error::Validation(
            "noise estimation needs a positive leading singular value and a finite residual".into(),
        ));
    }
    let (mut lower, upper) = noise_bounds(singular_values, l, m, residual);
    if lower >= upper {
        log::debug!("degenerate noise-variance bracket [{lower:e}, {upper:e}]; using upper bound");
        return Ok(NoiseEstimate {
            sigma2: upper,
            lower,
            upper,
            degenerate_bounds: true,
            iterations: 0,
        });
    }
    if lower <= 0.0 {
        lower = upper * f64::EPSILON;
    }

    // Rescale so the bracket starts at 1.
    let gamma_sq: Vec<f64> = singular_values.iter().map(|g| g * g / lower).collect();
    let scaled_residual = residual / lower;
    let objective = |s: f64| free_energy_sq(s, &gamma_sq, l, m, scaled_residual);
    let min = bounded_brent(objective, 1.0, upper / lower, MINIMIZER_REL_TOL, MINIMIZER_MAX_ITER);
    if !min.fx.is_finite() {
        return Err(Error::Numerical(format!(
            "free energy not finite on bracket [{lower:e}, {upper:e}] (value {} at {:e})",
            min.fx,
            min.x * lower
        )));
    }
    if !min.converged {
        log::warn!(
            "noise-variance minimizer hit {MINIMIZER_MAX_ITER} iterations on [{lower:e}, {upper:e}]"
        );
    }
    Ok(NoiseEstimate {
        sigma2: min.x * lower,
        lower,
        upper,
        degenerate_bounds: false,
        iterations: min.iterations,
    })
}

/// Singular values in descending order. Values below the round-off level
/// `s_max * max(rows, cols) * eps` are reported as exactly zero.
pub fn singular_values(matrix: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = matrix.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let floor = s.first().copied().unwrap_or(0.0) * matrix.nrows().max(matrix.ncols()) as f64 * f64::EPSILON;
    for v in &mut s {
        if *v <= floor {
            *v = 0.0;
        }
    }
    s
}

/// Factorizes a spectrum already oriented so that `l <= m`.
pub fn evbmf_spectrum(
    singular_values: &[f64],
    l: usize,
    m: usize,
    noise_variance: Option<f64>,
) -> Result<FactorizationResult> {
    if let Some(s2) = noise_variance {
        if !(s2 > 0.0 && s2.is_finite()) {
            return Err(Error::Validation(format!(
                "noise variance must be positive and finite, got {s2}"
            )));
        }
    }
    let all_zero = singular_values.iter().all(|&g| g == 0.0);
    let (sigma2, estimated, degenerate) = match noise_variance {
        Some(s2) => (s2, false, false),
        None if all_zero => (f64::MIN_POSITIVE, true, false),
        None => {
            let est = estimate_noise_variance(singular_values, l, m, 0.0)?;
            (est.sigma2, true, est.degenerate_bounds)
        }
    };
    let threshold = vb_threshold(l, m, sigma2);
    let shrunk: Vec<f64> = singular_values
        .iter()
        .take_while(|&&g| g > threshold)
        .map(|&g| shrink(g, l, m, sigma2))
        .collect();
    Ok(FactorizationResult {
        rank: shrunk.len(),
        shrunk_singular_values: shrunk,
        raw_singular_values: singular_values.to_vec(),
        noise_variance: sigma2,
        rows: l,
        cols: m,
        threshold,
        noise_estimated: estimated,
        degenerate_bounds: degenerate,
    })
}

pub fn evbmf_matrix(matrix: &DMatrix<f64>, noise_variance: Option<f64>) -> Result<FactorizationResult> {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Err(Error::Validation("cannot factorize an empty matrix".into()));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("matrix contains non-finite entries".into()));
    }
    let oriented;
    let view = if matrix.nrows() > matrix.ncols() {
        oriented = matrix.transpose();
        &oriented
    } else {
        matrix
    };
    let (l, m) = (view.nrows(), view.ncols());
    evbmf_spectrum(&singular_values(view), l, m, noise_variance)
}

pub fn evbmf(matrix: &UnfoldedMatrix, noise_variance: Option<f64>) -> Result<FactorizationResult> {
    evbmf_matrix(matrix.matrix(), noise_variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, sd: f64, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
    }

    #[test]
    fn zero_matrix_has_empty_structure() {
        let z = DMatrix::zeros(8, 8);
        let r = evbmf_matrix(&z, Some(1.0)).unwrap();
        assert_eq!(r.rank, 0);
        assert!(r.shrunk_singular_values.is_empty());

        let r = evbmf_matrix(&z, None).unwrap();
        assert_eq!(r.rank, 0);
        assert_eq!(r.noise_variance, f64::MIN_POSITIVE);
    }

    #[test]
    fn rejects_bad_noise_and_entries() {
        let m = gaussian(4, 6, 1.0, 1);
        assert!(evbmf_matrix(&m, Some(0.0)).is_err());
        assert!(evbmf_matrix(&m, Some(f64::NAN)).is_err());
        let mut bad = m.clone();
        bad[(0, 0)] = f64::INFINITY;
        assert!(evbmf_matrix(&bad, None).is_err());
    }

    #[test]
    fn single_row_bracket_is_degenerate() {
        let m = gaussian(1, 40, 1.0, 3);
        let r = evbmf_matrix(&m, None).unwrap();
        assert!(r.degenerate_bounds);
        assert_eq!(r.rank, 0);
        let est = estimate_noise_variance(&r.raw_singular_values, 1, 40, 0.0).unwrap();
        assert!(est.degenerate_bounds);
        assert_eq!(est.sigma2, est.upper);
    }

    #[test]
    fn estimate_preconditions() {
        assert!(estimate_noise_variance(&[1.0, 2.0], 2, 4, 0.0).is_err());
        assert!(estimate_noise_variance(&[0.0, 0.0], 2, 4, 0.0).is_err());
        assert!(estimate_noise_variance(&[2.0, 1.0], 3, 4, 0.0).is_err());
    }

    #[test]
    fn constant_matrix_keeps_one_component() {
        let m = DMatrix::from_element(8, 9, 0.3);
        let r = evbmf_matrix(&m, None).unwrap();
        assert!(r.rank <= 1, "{r:?}");
    }

    #[test]
    fn shrinkage_is_strict() {
        let m = gaussian(30, 60, 0.05, 9) + DMatrix::from_fn(30, 60, |i, j| ((i + 2 * j) % 7) as f64);
        let r = evbmf_matrix(&m, None).unwrap();
        assert!(r.rank >= 1);
        for (d, g) in r.shrunk_singular_values.iter().zip(&r.raw_singular_values) {
            assert!(*d > 0.0 && d < g);
        }
        for (i, g) in r.raw_singular_values.iter().enumerate() {
            assert_eq!(*g > r.threshold, i < r.rank);
        }
    }

    #[test]
    fn transposed_input_matches() {
        let m = gaussian(12, 30, 1.0, 4) + DMatrix::from_fn(12, 30, |i, j| (i as f64 - 5.0) * (j as f64 * 0.1));
        let a = evbmf_matrix(&m, None).unwrap();
        let b = evbmf_matrix(&m.transpose(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn threshold_tie_discards() {
        let (l, m, s2) = (4, 10, 0.5);
        let t = vb_threshold(l, m, s2);
        let r = evbmf_spectrum(&[t, t * 0.5, 0.1, 0.0], l, m, Some(s2)).unwrap();
        assert_eq!(r.rank, 0);
        let r = evbmf_spectrum(&[t * (1.0 + 1e-12), 0.1, 0.0, 0.0], l, m, Some(s2)).unwrap();
        assert_eq!(r.rank, 1);
    }
}
