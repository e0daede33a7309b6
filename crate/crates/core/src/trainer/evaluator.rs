use std::sync::Arc;

use super::data::Dataset;
use super::net::NetSpec;
use super::optim::{OptimizerConfig, OptimizerKind};
use super::snapshot::to_tensors;
use super::train::{train_epochs, TrainConfig, TrainingRun};
use crate::error::{Error, Result};
use crate::metrics::RankProbe;
use crate::search::{Evaluation, Evaluator, HpValues, DEFAULT_EPOCHS};

/// Default learning rate when the search space does not include `lr`.
pub const DEFAULT_LR: f64 = 1e-3;
/// Default weight decay when the search space does not include `weight_decay`.
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-5;

/// Trains the built-in network for each configuration and probes its conv weights.
///
/// Recognized hyper-parameter names are `lr` and `weight_decay`; absent ones
/// take the evaluator's fixed values.
#[derive(Clone, Debug)]
pub struct TrainerEvaluator {
    spec: NetSpec,
    data: Arc<Dataset>,
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
}

impl TrainerEvaluator {
    pub fn new(data: Arc<Dataset>, kind: OptimizerKind, seed: u64) -> Self {
        let spec = NetSpec::mini(data.channels(), data.height(), data.width(), data.classes());
        Self {
            spec,
            data,
            kind,
            lr: DEFAULT_LR,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            epochs: DEFAULT_EPOCHS,
            batch_size: 128,
            seed,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_fixed(mut self, lr: f64, weight_decay: f64) -> Self {
        self.lr = lr;
        self.weight_decay = weight_decay;
        self
    }

    pub fn with_spec(mut self, spec: NetSpec) -> Self {
        self.spec = spec;
        self
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn optimizer(&self) -> OptimizerKind {
        self.kind
    }

    pub fn train_config(&self, hp: &HpValues, epochs: usize) -> Result<TrainConfig> {
        let mut lr = self.lr;
        let mut wd = self.weight_decay;
        for (name, &v) in hp.names.iter().zip(&hp.values) {
            match name.as_str() {
                "lr" => lr = v,
                "weight_decay" => wd = v,
                other => return Err(Error::Validation(format!("unknown hyper-parameter {other}"))),
            }
        }
        let mut cfg = TrainConfig::new(OptimizerConfig::new(self.kind, lr, wd)?, epochs, self.seed);
        cfg.batch_size = self.batch_size;
        Ok(cfg)
    }

    /// Plain training run for `hp`, e.g. a longer final evaluation.
    pub fn train(&self, hp: &HpValues, epochs: usize) -> Result<TrainingRun> {
        train_epochs(&self.spec, &self.data, &self.train_config(hp, epochs)?)
    }
}

impl Evaluator for TrainerEvaluator {
    fn evaluate(&self, hp: &HpValues) -> Result<Evaluation> {
        let run = self.train(hp, self.epochs)?;
        if run.divergent {
            log::warn!("training diverged for {hp}");
            return Ok(Evaluation::divergent());
        }
        let epochs: Vec<_> = run.snapshots.iter().map(|s| to_tensors(s)).collect::<Result<_>>()?;
        let probe = RankProbe::from_snapshots(hp.to_string(), &epochs)?;
        let acc = run.final_accuracy().expect("at least one epoch");
        Ok(Evaluation::from_probe(probe)?.with_accuracy(acc))
    }

    fn epochs(&self) -> usize {
        self.epochs
    }
}
