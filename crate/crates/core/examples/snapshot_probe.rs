//! Write per-epoch AHSN snapshots and probe them from disk.

use std::sync::Arc;

use autohyper::harness::probe_snapshots;
use autohyper::metrics::write_probe_csv;
use autohyper::search::{Evaluator, HpValues};
use autohyper::trainer::{synthetic_shapes, write_snapshot_dir, OptimizerKind, TrainerEvaluator};

fn main() -> autohyper::Result<()> {
    let data = Arc::new(synthetic_shapes(512, 0, 0.2)?);
    let evaluator = TrainerEvaluator::new(data, OptimizerKind::Adam, 0);
    let hp = HpValues::new(vec!["lr".into()], vec![3e-3]);

    let dir = tempfile::tempdir().expect("temp dir");
    write_snapshot_dir(dir.path(), &evaluator.train(&hp, 5)?.snapshots)?;
    for entry in std::fs::read_dir(dir.path()).expect("readable") {
        let entry = entry.expect("entry");
        println!("{} ({} bytes)", entry.file_name().to_string_lossy(), entry.metadata().unwrap().len());
    }

    let outcome = probe_snapshots(dir.path())?;
    write_probe_csv(std::io::stdout().lock(), [&outcome.probe])?;
    println!("Z from files {:.6}, in process {:.6}", outcome.z, evaluator.evaluate(&hp)?.z);
    Ok(())
}
