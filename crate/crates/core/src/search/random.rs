use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::evaluator::Evaluator;
use super::lattice::HpValues;
use crate::error::{Error, Result};

/// Per-parameter `[lo, hi]` bounds sampled uniformly in log space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogUniformSpace {
    names: Vec<String>,
    bounds: Vec<(f64, f64)>,
}

impl LogUniformSpace {
    pub fn new(names: Vec<String>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if names.is_empty() || names.len() != bounds.len() {
            return Err(Error::Validation(format!(
                "{} names for {} bounds",
                names.len(),
                bounds.len()
            )));
        }
        for &(lo, hi) in &bounds {
            if !(lo > 0.0 && hi.is_finite() && lo < hi) {
                return Err(Error::Validation(format!("bad log-uniform bounds [{lo}, {hi}]")));
            }
        }
        Ok(Self { names, bounds })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HpValues {
        let values = self
            .bounds
            .iter()
            .map(|&(lo, hi)| sample_log_uniform(rng, lo, hi))
            .collect();
        HpValues::new(self.names.clone(), values)
    }
}

pub fn sample_log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    (a + (b - a) * rng.gen::<f64>()).exp().clamp(lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomTrial {
    pub values: HpValues,
    /// Final training accuracy, `None` when the trial failed or diverged.
    pub accuracy: Option<f64>,
    pub divergent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSearchResult {
    pub trials: Vec<RandomTrial>,
    /// Index of the winning trial.
    pub best: usize,
    pub epoch_budget: usize,
}

impl RandomSearchResult {
    pub fn best_trial(&self) -> &RandomTrial {
        &self.trials[self.best]
    }
}

/// Trains `budget_epochs / epochs` log-uniform samples and keeps the one with
/// the highest final training accuracy (earliest wins ties).
pub fn random_search<E: Evaluator + ?Sized>(
    space: &LogUniformSpace,
    budget_epochs: usize,
    evaluator: &E,
    seed: u64,
) -> Result<RandomSearchResult> {
    let epochs = evaluator.epochs();
    if epochs == 0 {
        return Err(Error::Validation("evaluator trains zero epochs".into()));
    }
    let samples = budget_epochs / epochs;
    if samples == 0 {
        return Err(Error::Validation(format!(
            "budget of {budget_epochs} epochs buys no {epochs}-epoch trial"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(samples);
    let mut best: Option<(usize, f64)> = None;
    for i in 0..samples {
        let values = space.sample(&mut rng);
        let trial = match evaluator.evaluate(&values) {
            Ok(e) if !e.divergent => {
                let acc = e.accuracy.ok_or_else(|| {
                    Error::Evaluation("random search needs an evaluator that reports accuracy".into())
                })?;
                RandomTrial {
                    values,
                    accuracy: Some(acc),
                    divergent: false,
                }
            }
            Ok(_) => RandomTrial {
                values,
                accuracy: None,
                divergent: true,
            },
            Err(e) => {
                warn!("random trial {values} failed: {e}");
                RandomTrial {
                    values,
                    accuracy: None,
                    divergent: true,
                }
            }
        };
        if let Some(acc) = trial.accuracy {
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((i, acc));
            }
        }
        trials.push(trial);
    }
    Ok(RandomSearchResult {
        best: best.map_or(0, |(i, _)| i),
        epoch_budget: samples * epochs,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::evaluator::AccuracyOracle;

    fn lr_space() -> LogUniformSpace {
        LogUniformSpace::new(vec!["lr".into()], vec![(1e-4, 0.1)]).unwrap()
    }

    #[test]
    fn budget_sets_sample_count() {
        let oracle = AccuracyOracle::new(|_| 0.5);
        let r = random_search(&lr_space(), 15, &oracle, 1).unwrap();
        assert_eq!(r.trials.len(), 3);
        assert_eq!(r.epoch_budget, 15);
        assert_eq!(random_search(&lr_space(), 19, &oracle, 1).unwrap().trials.len(), 3);
        assert!(random_search(&lr_space(), 4, &oracle, 1).is_err());
    }

    #[test]
    fn ties_go_to_earliest() {
        let r = random_search(&lr_space(), 50, &AccuracyOracle::new(|_| 0.5), 3).unwrap();
        assert_eq!(r.best, 0);
    }

    #[test]
    fn winner_is_closest_to_peak() {
        let oracle = AccuracyOracle::new(|hp| -(hp.values[0].log10() + 3.0).abs());
        let r = random_search(&lr_space(), 100, &oracle, 7).unwrap();
        let dist = |t: &RandomTrial| (t.values.values[0].log10() + 3.0).abs();
        let min = r.trials.iter().map(dist).fold(f64::INFINITY, f64::min);
        assert_eq!(dist(r.best_trial()), min);
    }

    #[test]
    fn bad_bounds() {
        assert!(LogUniformSpace::new(vec!["lr".into()], vec![(0.0, 1.0)]).is_err());
        assert!(LogUniformSpace::new(vec!["lr".into()], vec![(1.0, 1.0)]).is_err());
        assert!(LogUniformSpace::new(vec!["lr".into()], vec![]).is_err());
    }
}
