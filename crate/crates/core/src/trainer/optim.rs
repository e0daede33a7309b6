use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const MOMENTUM: f64 = 0.9;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
    Adagrad,
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SgdMomentum => "sgd_momentum",
            Self::Adam => "adam",
            Self::Adagrad => "adagrad",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Coupled L2 penalty: `weight_decay * theta` is added to every gradient.
    pub weight_decay: f64,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64) -> Result<Self> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::Validation(format!("learning rate {lr} must be finite and >= 0")));
        }
        if !(weight_decay.is_finite() && weight_decay >= 0.0) {
            return Err(Error::Validation(format!("weight decay {weight_decay} must be finite and >= 0")));
        }
        Ok(Self { kind, lr, weight_decay })
    }
}

/// Per-parameter accumulators of one optimizer.
#[derive(Clone, Debug)]
pub struct OptimizerState<T: Scalar> {
    config: OptimizerConfig,
    step: u64,
    // momentum buffer, Adam first moment
    m: Vec<T>,
    // Adam second moment, AdaGrad squared-gradient sum
    v: Vec<T>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(config: OptimizerConfig, params: usize) -> Self {
        let (m, v) = match config.kind {
            OptimizerKind::SgdMomentum => (vec![T::zero(); params], Vec::new()),
            OptimizerKind::Adam => (vec![T::zero(); params], vec![T::zero(); params]),
            OptimizerKind::Adagrad => (Vec::new(), vec![T::zero(); params]),
        };
        Self { config, step: 0, m, v }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. `grad` is taken as the loss gradient; decay is added here.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        assert_eq!(params.len(), grad.len());
        self.step += 1;
        let lr = T::of(self.config.lr);
        let wd = T::of(self.config.weight_decay);
        match self.config.kind {
            OptimizerKind::SgdMomentum => {
                let mu = T::of(MOMENTUM);
                for ((p, &g), m) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    let g = g + wd * *p;
                    *m = mu * *m + g;
                    *p = *p - lr * *m;
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (T::of(ADAM_BETA1), T::of(ADAM_BETA2));
                let c1 = T::of(1.0 - ADAM_BETA1.powi(self.step as i32));
                let c2 = T::of(1.0 - ADAM_BETA2.powi(self.step as i32));
                let eps = T::of(ADAM_EPS);
                for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    let g = g + wd * *p;
                    *m = b1 * *m + (T::one() - b1) * g;
                    *v = b2 * *v + (T::one() - b2) * g * g;
                    let mh = *m / c1;
                    let vh = *v / c2;
                    *p = *p - lr * mh / (vh.sqrt() + eps);
                }
            }
            OptimizerKind::Adagrad => {
                let eps = T::of(ADAGRAD_EPS);
                for ((p, &g), v) in params.iter_mut().zip(grad).zip(&mut self.v) {
                    let g = g + wd * *p;
                    *v = *v + g * g;
                    *p = *p - lr * g / (v.sqrt() + eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(kind: OptimizerKind, wd: f64, grads: &[f64]) -> f64 {
        let mut st = OptimizerState::<f64>::new(OptimizerConfig::new(kind, 0.1, wd).unwrap(), 1);
        let mut p = [1.0];
        for &g in grads {
            st.step(&mut p, &[g]);
        }
        p[0]
    }

    #[test]
    fn sgd_momentum_by_hand() {
        // buf1 = 1, p = 0.9; buf2 = 0.9 + 1 = 1.9, p = 0.71
        assert!((run(OptimizerKind::SgdMomentum, 0.0, &[1.0, 1.0]) - 0.71).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_sign_step() {
        let p = run(OptimizerKind::Adam, 0.0, &[3.0]);
        assert!((p - (1.0 - 0.1 * 3.0 / (3.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn adagrad_by_hand() {
        // v = 4, p = 1 - 0.1*2/2; v = 8, p -= 0.1*2/sqrt(8)
        let want = 1.0 - 0.2 / (2.0 + 1e-10) - 0.2 / (8f64.sqrt() + 1e-10);
        assert!((run(OptimizerKind::Adagrad, 0.0, &[2.0, 2.0]) - want).abs() < 1e-15);
    }

    #[test]
    fn decay_is_coupled() {
        // zero loss gradient, decay alone moves the parameter toward 0
        assert!((run(OptimizerKind::SgdMomentum, 0.5, &[0.0]) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(OptimizerConfig::new(OptimizerKind::Adam, -1.0, 0.0).is_err());
        assert!(OptimizerConfig::new(OptimizerKind::Adam, f64::NAN, 0.0).is_err());
        assert!(OptimizerConfig::new(OptimizerKind::Adam, 1e-3, -1e-4).is_err());
    }
}
