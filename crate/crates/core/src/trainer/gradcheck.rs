use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::MiniConvNet;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamSubset {
    All,
    /// Only the linear head; convs stay fixed.
    HeadOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    /// Largest `|g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8)` over the checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose `+/- h` stencil crossed a ReLU or max-pool switch.
    /// Finite differences do not estimate the derivative there.
    pub skipped_kinks: usize,
}

/// Compares analytic gradients with central differences on up to `coords`
/// randomly ordered parameters of `subset`. A coordinate is replaced by the
/// next candidate when perturbing it changes the activation pattern.
pub fn gradient_check(
    net: &MiniConvNet<f64>,
    x: &[f64],
    labels: &[usize],
    coords: usize,
    subset: ParamSubset,
    seed: u64,
) -> GradCheck {
    let batch = labels.len();
    let classes = net.spec().classes;
    let mut grad = vec![0.0; net.param_count()];
    net.loss_and_grad(x, labels, &mut grad);
    let mut candidates: Vec<usize> = match subset {
        ParamSubset::All => (0..net.param_count()).collect(),
        ParamSubset::HeadOnly => {
            let (w, b) = net.head_blocks();
            w.range().chain(b.range()).collect()
        }
    };
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = net.activation_pattern(x, batch);
    let mut probe = net.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for i in candidates {
        if out.checked == coords {
            break;
        }
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + FD_STEP;
        let up = probe.logits(x, batch);
        let smooth_up = probe.activation_pattern(x, batch) == base;
        probe.params_mut()[i] = orig - FD_STEP;
        let down = probe.logits(x, batch);
        let smooth_down = probe.activation_pattern(x, batch) == base;
        probe.params_mut()[i] = orig;
        if !(smooth_up && smooth_down) {
            out.skipped_kinks += 1;
            continue;
        }
        let fd = loss_difference(&up, &down, labels, classes) / (2.0 * FD_STEP);
        let ga = grad[i];
        let err = (ga - fd).abs() / ga.abs().max(fd.abs()).max(1e-8);
        out.max_rel_error = out.max_rel_error.max(err);
        out.checked += 1;
    }
    out
}

/// `L(plus) - L(minus)` for mean cross-entropy, formed from logit differences
/// so the result is not quantized to the rounding unit of `L` itself.
fn loss_difference(plus: &[f64], minus: &[f64], labels: &[usize], classes: usize) -> f64 {
    let mut acc = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        let p = &plus[b * classes..(b + 1) * classes];
        let m = &minus[b * classes..(b + 1) * classes];
        let top = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = m.iter().map(|v| (v - top).exp()).sum();
        let delta: f64 = m.iter().zip(p).map(|(a, q)| (a - top).exp() * (q - a).exp_m1()).sum();
        acc += (delta / sum).ln_1p() - (p[y] - m[y]);
    }
    acc / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_ce(z: &[f64], labels: &[usize], c: usize) -> f64 {
        let mut acc = 0.0;
        for (b, &y) in labels.iter().enumerate() {
            let row = &z[b * c..(b + 1) * c];
            acc += row.iter().map(|v| v.exp()).sum::<f64>().ln() - row[y];
        }
        acc / labels.len() as f64
    }

    #[test]
    fn loss_difference_matches_direct_subtraction() {
        let plus = [0.3, -1.2, 2.0, 0.1, 0.5, 0.4];
        let minus = [0.1, -1.0, 1.5, 0.3, 0.2, 0.9];
        let labels = [2, 0];
        let direct = mean_ce(&plus, &labels, 3) - mean_ce(&minus, &labels, 3);
        assert!((loss_difference(&plus, &minus, &labels, 3) - direct).abs() < 1e-15);
    }
}
