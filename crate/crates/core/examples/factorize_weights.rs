//! Recover the rank of a noisy low-rank matrix with EVBMF.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use autohyper::evbmf::evbmf_matrix;

fn main() -> autohyper::Result<()> {
    let (l, m) = (50, 100);
    let signal = [20.0, 18.0, 16.0, 14.0, 12.0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut normal = |scale: f64| -> f64 { scale * Distribution::<f64>::sample(&StandardNormal, &mut rng) };

    let mut y = DMatrix::<f64>::from_fn(l, m, |_, _| normal(0.1));
    for &s in &signal {
        // unit directions scaled so the planted singular value is s
        let u = DMatrix::from_fn(l, 1, |_, _| normal(1.0)).normalize();
        let v = DMatrix::from_fn(m, 1, |_, _| normal(1.0)).normalize();
        y += s * &u * v.transpose();
    }

    let fit = evbmf_matrix(&y, None)?;
    println!("estimated noise variance {:.5} (true 0.01)", fit.noise_variance);
    println!("threshold {:.3}, rank {}", fit.threshold, fit.rank);
    for (d, s) in fit.shrunk_singular_values.iter().zip(signal) {
        println!("  planted {s:5.1}  shrunk {d:7.3}");
    }

    let noise = DMatrix::<f64>::from_fn(64, 256, |_, _| normal(1.0));
    println!("pure noise 64x256: rank {}", evbmf_matrix(&noise, Some(1.0))?.rank);
    Ok(())
}
