//! Log-uniform random search given the same epoch budget as autohyper.

use std::sync::Arc;

use autohyper::search::{random_search, LogUniformSpace};
use autohyper::trainer::{synthetic_shapes, OptimizerKind, TrainerEvaluator};

fn main() -> autohyper::Result<()> {
    let data = Arc::new(synthetic_shapes(1024, 0, 0.2)?);
    let evaluator = TrainerEvaluator::new(data, OptimizerKind::SgdMomentum, 1);
    let space = LogUniformSpace::new(vec!["lr".into()], vec![(1e-4, 0.1)])?;

    let result = random_search(&space, 30, &evaluator, 1)?;
    for t in &result.trials {
        println!("lr {:.3e}  accuracy {:?}", t.values.values[0], t.accuracy);
    }
    let best = result.best_trial();
    println!("best lr {:.3e} using {} epochs", best.values.values[0], result.epoch_budget);
    Ok(())
}
