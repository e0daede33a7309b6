use serde::{Deserialize, Serialize};

use super::lattice::HpValues;
use crate::error::Result;
use crate::metrics::{global_stable_rank, zero_rank_fractions, RankProbe};

/// Training epochs per evaluated configuration.
pub const DEFAULT_EPOCHS: usize = 5;

/// Outcome of training (or replaying) one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub z: f64,
    pub z_per_epoch: Vec<f64>,
    /// Training accuracy after the last epoch, when the evaluator trains.
    pub accuracy: Option<f64>,
    pub divergent: bool,
    #[serde(skip)]
    pub probe: Option<RankProbe>,
}

impl Evaluation {
    pub fn from_z(z: f64) -> Self {
        Self {
            z,
            z_per_epoch: Vec::new(),
            accuracy: None,
            divergent: false,
            probe: None,
        }
    }

    /// Maximally rank-deficient score for a trial that blew up.
    pub fn divergent() -> Self {
        Self {
            z: 1.0,
            z_per_epoch: Vec::new(),
            accuracy: None,
            divergent: true,
            probe: None,
        }
    }

    pub fn from_probe(probe: RankProbe) -> Result<Self> {
        let z_per_epoch = zero_rank_fractions(&probe)?;
        let z = global_stable_rank(&probe)?;
        Ok(Self {
            z,
            z_per_epoch,
            accuracy: None,
            divergent: false,
            probe: Some(probe),
        })
    }

    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = Some(accuracy);
        self
    }
}

/// Maps a hyper-parameter setting to its response. Must be a pure function of
/// the setting (and whatever seed the evaluator was built with).
pub trait Evaluator {
    fn evaluate(&self, hp: &HpValues) -> Result<Evaluation>;

    /// Epochs charged to the budget for each distinct configuration.
    fn epochs(&self) -> usize {
        DEFAULT_EPOCHS
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(&self, hp: &HpValues) -> Result<Evaluation> {
        (**self).evaluate(hp)
    }

    fn epochs(&self) -> usize {
        (**self).epochs()
    }
}

/// Evaluator backed by a closed-form surface `Z(lambda)`; trains nothing.
pub struct ClosedForm<F> {
    surface: F,
}

impl<F: Fn(&HpValues) -> f64> ClosedForm<F> {
    pub fn new(surface: F) -> Self {
        Self { surface }
    }
}

impl<F: Fn(&HpValues) -> f64> Evaluator for ClosedForm<F> {
    fn evaluate(&self, hp: &HpValues) -> Result<Evaluation> {
        let z = (self.surface)(hp);
        Ok(Evaluation {
            z,
            z_per_epoch: vec![z; DEFAULT_EPOCHS],
            accuracy: None,
            divergent: false,
            probe: None,
        })
    }
}

/// Evaluator reporting only a training accuracy, for baseline tests.
pub struct AccuracyOracle<F> {
    accuracy: F,
}

impl<F: Fn(&HpValues) -> f64> AccuracyOracle<F> {
    pub fn new(accuracy: F) -> Self {
        Self { accuracy }
    }
}

impl<F: Fn(&HpValues) -> f64> Evaluator for AccuracyOracle<F> {
    fn evaluate(&self, hp: &HpValues) -> Result<Evaluation> {
        Ok(Evaluation::from_z(f64::NAN).with_accuracy((self.accuracy)(hp)))
    }
}

/// Logistic step in `log10(x)` falling from 1 to 0 around `center`.
pub fn log_sigmoid(x: f64, center: f64, slope: f64) -> f64 {
    1.0 / (1.0 + (slope * (x.log10() - center.log10())).exp())
}
