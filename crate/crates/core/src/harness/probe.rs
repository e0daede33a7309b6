use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};
use crate::metrics::{global_stable_rank, zero_rank_fractions, RankProbe};
use crate::search::{Evaluation, Evaluator, HpValues};
use crate::tensor::WeightTensor4D;
use crate::trainer::{read_snapshot, snapshot_file_name, to_tensors};

/// Probe of one directory of `epoch_NNN.snap` files.
#[derive(Clone, Debug)]
pub struct ProbeOutcome {
    pub probe: RankProbe,
    pub z: f64,
    pub z_per_epoch: Vec<f64>,
    /// Every weight in every snapshot was zero.
    pub all_zero: bool,
}

fn epoch_index(name: &str) -> Option<usize> {
    name.strip_prefix("epoch_")?.strip_suffix(".snap")?.parse().ok()
}

/// Epoch files `1..=T` of a directory, failing on any gap.
pub fn snapshot_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(i) = entry.file_name().to_str().and_then(epoch_index) {
            found.push(i);
        }
    }
    found.sort_unstable();
    let Some(&last) = found.last() else {
        return Err(Error::IncompleteProbe(format!("no epoch_NNN.snap files in {}", dir.display())));
    };
    for epoch in 1..=last {
        if found.binary_search(&epoch).is_err() {
            return Err(Error::IncompleteProbe(format!(
                "missing epoch {epoch} ({}) in {}",
                snapshot_file_name(epoch),
                dir.display()
            )));
        }
    }
    Ok((1..=last).map(|e| dir.join(snapshot_file_name(e))).collect())
}

pub fn load_snapshot_dir(dir: &Path) -> Result<Vec<Vec<WeightTensor4D>>> {
    snapshot_files(dir)?
        .iter()
        .map(|p| read_snapshot(p).and_then(|l| to_tensors(&l)))
        .collect()
}

/// Stable ranks, per-epoch zero fractions and Z for a snapshot directory.
pub fn probe_snapshots(dir: impl AsRef<Path>) -> Result<ProbeOutcome> {
    let dir = dir.as_ref();
    let epochs = load_snapshot_dir(dir)?;
    let all_zero = epochs.iter().flatten().all(|t| t.data().iter().all(|&v| v == 0.0));
    if all_zero {
        warn!("{}: every snapshot weight is zero; Z is 1 by construction", dir.display());
    }
    let id = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    let probe = RankProbe::from_snapshots(id, &epochs)?;
    Ok(ProbeOutcome {
        z: global_stable_rank(&probe)?,
        z_per_epoch: zero_rank_fractions(&probe)?,
        probe,
        all_zero,
    })
}

/// Evaluator over pre-recorded runs: configuration `hp` is read from the
/// subdirectory named by its display form, e.g. `lr=1.0000e-3`.
#[derive(Clone, Debug)]
pub struct SnapshotReplay {
    root: PathBuf,
    epochs: usize,
}

impl SnapshotReplay {
    pub fn new(root: impl Into<PathBuf>, epochs: usize) -> Self {
        Self {
            root: root.into(),
            epochs,
        }
    }

    pub fn dir_for(&self, hp: &HpValues) -> PathBuf {
        self.root.join(hp.to_string())
    }
}

impl Evaluator for SnapshotReplay {
    fn evaluate(&self, hp: &HpValues) -> Result<Evaluation> {
        let out = probe_snapshots(self.dir_for(hp))?;
        if out.probe.epochs() != self.epochs {
            return Err(Error::IncompleteProbe(format!(
                "{hp}: found {} epochs, expected {}",
                out.probe.epochs(),
                self.epochs
            )));
        }
        Evaluation::from_probe(out.probe)
    }

    fn epochs(&self) -> usize {
        self.epochs
    }
}
