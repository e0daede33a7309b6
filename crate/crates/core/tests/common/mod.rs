//! Independent oracles shared by the integration tests. Nothing here calls the
//! library code it is used to check.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, sigma: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    DMatrix::from_fn(rows, cols, |_, _| n.sample(&mut r))
}

fn random_orthonormal(rows: usize, k: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(rows, k, |_, _| StandardNormal.sample(r));
    // modified Gram-Schmidt
    let mut q = a.clone();
    for j in 0..k {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            let qi = q.column(i).clone_owned();
            let mut cj = q.column_mut(j);
            cj -= qi * proj;
        }
        let norm = q.column(j).norm();
        let mut cj = q.column_mut(j);
        cj /= norm;
    }
    q
}

/// `U diag(s) V^T + N(0, sigma^2)` with random orthonormal `U`, `V`.
pub fn planted(rows: usize, cols: usize, s: &[f64], sigma: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let u = random_orthonormal(rows, s.len(), &mut r);
    let v = random_orthonormal(cols, s.len(), &mut r);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(s));
    let n = Normal::new(0.0, sigma).unwrap();
    &u * d * v.transpose() + DMatrix::from_fn(rows, cols, |_, _| n.sample(&mut r))
}

/// Singular values by one-sided Jacobi rotations, descending.
pub fn jacobi_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut a = if m.nrows() >= m.ncols() { m.clone() } else { m.transpose() };
    let n = a.ncols();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..a.nrows() {
                    let ap = a[(i, p)];
                    let aq = a[(i, q)];
                    a[(i, p)] = c * ap - s * aq;
                    a[(i, q)] = s * ap + c * aq;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut s: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub const TAU_COEF: f64 = 2.5129;

pub fn xbar(l: usize, m: usize) -> f64 {
    let alpha = l as f64 / m as f64;
    let tau = TAU_COEF * alpha.sqrt();
    (1.0 + tau) * (1.0 + alpha / tau)
}

/// Threshold and shrinkage written out from the closed form.
pub fn threshold(l: usize, m: usize, sigma2: f64) -> f64 {
    (m as f64 * sigma2 * xbar(l, m)).sqrt()
}

pub fn shrunk(gamma: f64, l: usize, m: usize, sigma2: f64) -> f64 {
    let (lf, mf) = (l as f64, m as f64);
    let a = 1.0 - (lf + mf) * sigma2 / (gamma * gamma);
    gamma / 2.0 * (a + (a * a - 4.0 * lf * mf * sigma2 * sigma2 / gamma.powi(4)).sqrt())
}

/// Free energy of the empirical-VB solution at noise level `sigma2`.
pub fn free_energy(sigma2: f64, s: &[f64], l: usize, m: usize) -> f64 {
    let alpha = l as f64 / m as f64;
    let xb = xbar(l, m);
    let mut f = 0.0;
    let mut kept = 0;
    for &g in s {
        let x = g * g / (m as f64 * sigma2);
        if x <= xb {
            if x > 0.0 {
                f += x - x.ln();
            } else {
                f += (m as f64 * sigma2).ln();
            }
        } else {
            kept += 1;
            let b = x - (1.0 + alpha);
            let tau = 0.5 * (b + (b * b - 4.0 * alpha).sqrt());
            f += x - tau + ((tau + 1.0) / x).ln() + alpha * (tau / alpha + 1.0).ln();
        }
    }
    let _ = kept;
    f + (l as f64 - s.len() as f64) * sigma2.ln()
}

/// `[lo, hi]` search interval for the noise variance.
pub fn noise_interval(s: &[f64], l: usize, m: usize) -> (f64, f64) {
    let alpha = l as f64 / m as f64;
    let g2: Vec<f64> = s.iter().map(|g| g * g).collect();
    let hi = g2.iter().sum::<f64>() / (l * m) as f64;
    let k = ((l as f64 / (1.0 + alpha)).ceil() as usize).saturating_sub(1);
    let tail = &g2[k..];
    let lo = (g2[k] / (m as f64 * xbar(l, m))).max(tail.iter().sum::<f64>() / tail.len() as f64 / m as f64);
    (lo, hi)
}

/// Minimizer of the free energy over `n` log-spaced points in `[lo, hi]`,
/// with the grid spacing ratio.
pub fn grid_minimizer(s: &[f64], l: usize, m: usize, n: usize) -> (f64, f64, f64) {
    let (lo, hi) = noise_interval(s, l, m);
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut best = (lo, f64::INFINITY);
    for i in 0..n {
        let x = lo * ratio.powi(i as i32);
        let f = free_energy(x, s, l, m);
        if f < best.1 {
            best = (x, f);
        }
    }
    (best.0, best.1, ratio)
}

/// Logistic drop in log10 space centred on `center` (slope 4).
pub fn sigmoid(x: f64, center: f64) -> f64 {
    1.0 / (1.0 + (4.0 * (x.log10() - center.log10())).exp())
}

/// Plateau inception found by sweeping `f` over a wide lattice: from the
/// steepest lattice step onward, the first point whose forward change is
/// below `eps`.
pub fn swept_inception(f: impl Fn(f64) -> f64, anchor: f64, alpha: f64, eps: f64) -> f64 {
    let ks: Vec<i32> = (-80..60).collect();
    let zs: Vec<f64> = ks.iter().map(|&k| f(anchor * alpha.powi(k))).collect();
    let d: Vec<f64> = zs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let steep = (0..d.len()).fold(0, |b, i| if d[i] > d[b] { i } else { b });
    let i = (steep..d.len()).find(|&i| d[i] < eps).expect("surface flattens");
    anchor * alpha.powi(ks[i])
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn uniform_seeds(n: usize, seed: u64) -> Vec<u64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen()).collect()
}

pub mod cases;

/// Eight distinct sample indices below `n`, drawn from `seed`.
pub fn random_batch(n: usize, seed: u64) -> Vec<usize> {
    rand::seq::index::sample(&mut rng(seed ^ 0xba7c), n, 8).into_vec()
}
