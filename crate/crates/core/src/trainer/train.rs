use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::net::{MiniConvNet, NetSpec};
use super::optim::{OptimizerConfig, OptimizerState};
use super::snapshot::SnapshotLayer;
use crate::error::{Error, Result};

/// Batch loss above which a trial counts as divergent.
pub const DIVERGENCE_LOSS: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds both the initialization and the batch order.
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(optimizer: OptimizerConfig, epochs: usize, seed: u64) -> Self {
        Self {
            optimizer,
            epochs,
            batch_size: 128,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainingRun {
    /// Conv weights after each completed epoch.
    pub snapshots: Vec<Vec<SnapshotLayer>>,
    /// Running training accuracy of each completed epoch.
    pub accuracy: Vec<f64>,
    pub loss: Vec<f64>,
    /// Training stopped early on a non-finite or exploding loss or parameter.
    pub divergent: bool,
    pub net: MiniConvNet<f32>,
}

impl TrainingRun {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.accuracy.last().copied()
    }
}

/// Sample order for one epoch; a fixed permutation per `(seed, epoch)`.
pub fn batch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

pub fn train_epochs(spec: &NetSpec, data: &Dataset, config: &TrainConfig) -> Result<TrainingRun> {
    let net = MiniConvNet::<f32>::new(spec.clone(), config.seed)?;
    train_from(net, data, config)
}

/// Trains an existing network for `config.epochs` epochs.
pub fn train_from(mut net: MiniConvNet<f32>, data: &Dataset, config: &TrainConfig) -> Result<TrainingRun> {
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Validation("epochs and batch size must be at least 1".into()));
    }
    check_fits(net.spec(), data)?;
    let mut opt = OptimizerState::new(config.optimizer, net.param_count());
    let mut grad = vec![0f32; net.param_count()];
    let mut run = TrainingRun {
        snapshots: Vec::with_capacity(config.epochs),
        accuracy: Vec::with_capacity(config.epochs),
        loss: Vec::with_capacity(config.epochs),
        divergent: false,
        net: net.clone(),
    };
    'epochs: for epoch in 0..config.epochs {
        let order = batch_order(data.len(), config.seed, epoch);
        let (mut correct, mut loss_sum) = (0usize, 0.0);
        for idx in order.chunks(config.batch_size) {
            let (x, y) = data.gather::<f32>(idx);
            let stats = net.loss_and_grad(&x, &y, &mut grad);
            if !stats.loss.is_finite() || stats.loss > DIVERGENCE_LOSS {
                run.divergent = true;
                break 'epochs;
            }
            opt.step(net.params_mut(), &grad);
            if !net.is_finite() {
                run.divergent = true;
                break 'epochs;
            }
            correct += stats.correct;
            loss_sum += stats.loss * idx.len() as f64;
        }
        run.snapshots.push(net.conv_snapshot());
        run.accuracy.push(correct as f64 / data.len() as f64);
        run.loss.push(loss_sum / data.len() as f64);
    }
    run.net = net;
    Ok(run)
}

fn check_fits(spec: &NetSpec, data: &Dataset) -> Result<()> {
    if data.is_empty()
        || spec.input_channels != data.channels()
        || spec.height != data.height()
        || spec.width != data.width()
        || spec.classes < data.classes()
    {
        return Err(Error::Validation(format!(
            "network expects {}x{}x{} inputs and {} classes, dataset has {} images of {}x{}x{} and {} classes",
            spec.input_channels,
            spec.height,
            spec.width,
            spec.classes,
            data.len(),
            data.channels(),
            data.height(),
            data.width(),
            data.classes()
        )));
    }
    Ok(())
}

/// Fraction of `data` the network classifies correctly.
pub fn evaluate_accuracy(net: &MiniConvNet<f32>, data: &Dataset) -> Result<f64> {
    check_fits(net.spec(), data)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0;
    for idx in all.chunks(256) {
        let (x, y) = data.gather::<f32>(idx);
        correct += net.predict(&x, idx.len()).iter().zip(&y).filter(|(p, t)| p == t).count();
    }
    Ok(correct as f64 / data.len() as f64)
}
