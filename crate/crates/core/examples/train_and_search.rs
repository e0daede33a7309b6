//! Pick a learning rate for the small CNN from early-epoch rank, then train.

use std::sync::Arc;

use autohyper::search::{autohyper, HpConfig, Lattice, SearchOptions};
use autohyper::trainer::{synthetic_shapes, OptimizerKind, TrainerEvaluator};

fn main() -> autohyper::Result<()> {
    let data = Arc::new(synthetic_shapes(2048, 0, 0.2)?);
    let evaluator = TrainerEvaluator::new(data, OptimizerKind::Adam, 0);
    let lattice = Lattice::with_default_alpha(&["lr"], &[1e-3])?;

    let run = autohyper(&HpConfig::origin(&lattice), &evaluator, &SearchOptions::default())?;
    for e in run.evaluations() {
        println!("lr {:.3e}  Z {:.3}", e.config.values()[0], e.evaluation.z);
    }
    let chosen = run.selected().unwrap();
    println!("{:?} at lr {:.3e}, {} epochs spent", run.verdict(), chosen.values()[0], run.epoch_budget());

    let trained = evaluator.train(&chosen.hp_values(), 30)?;
    println!("30-epoch training accuracy {:.4}", trained.final_accuracy().unwrap_or(0.0));
    Ok(())
}
