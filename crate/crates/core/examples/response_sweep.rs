//! Z across a range of lattice learning rates, written as CSV.

use std::sync::Arc;

use autohyper::search::{lattice_grid, sweep, Lattice};
use autohyper::trainer::{synthetic_shapes, OptimizerKind, TrainerEvaluator};

fn main() -> autohyper::Result<()> {
    let data = Arc::new(synthetic_shapes(512, 0, 0.2)?);
    let evaluator = TrainerEvaluator::new(data, OptimizerKind::Adagrad, 0);
    let lattice = Lattice::with_default_alpha(&["lr"], &[1e-3])?;

    let grid = lattice_grid(&lattice, &[-4..=8])?;
    let (table, _) = sweep(&grid, &evaluator)?;
    table.write_csv(std::io::stdout().lock())?;
    Ok(())
}
