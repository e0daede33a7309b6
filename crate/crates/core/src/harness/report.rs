use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Mode;
use crate::error::{Error, Result};
use crate::search::Verdict;
use crate::trainer::OptimizerKind;

/// Selected hyper-parameters, with lattice exponents when they came from the lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub values: Vec<f64>,
    pub exponents: Option<Vec<i32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub verdict: Option<Verdict>,
    pub selected: Option<Selection>,
    /// Training epochs spent selecting (epochs per evaluation x distinct evaluations).
    pub epoch_budget: usize,
    pub distinct_evaluations: usize,
    pub steps: usize,
    pub rank_history: Vec<f64>,
    pub stabilized: Vec<f64>,
    /// Random search: training accuracy of the winner after its short run.
    pub winner_accuracy: Option<f64>,
    /// Snapshot probe: Z of the directory.
    pub z: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub final_test_accuracy: Option<f64>,
    pub final_divergent: bool,
}

impl SeedReport {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            verdict: None,
            selected: None,
            epoch_budget: 0,
            distinct_evaluations: 0,
            steps: 0,
            rank_history: Vec::new(),
            stabilized: Vec::new(),
            winner_accuracy: None,
            z: None,
            final_accuracy: None,
            final_test_accuracy: None,
            final_divergent: false,
        }
    }
}

/// Wall-clock data, kept apart so the rest of the report is reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_secs: u64,
    pub seconds_per_seed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub header: String,
    pub mode: Mode,
    pub optimizer: Option<OptimizerKind>,
    pub dataset: Option<String>,
    pub hp_names: Vec<String>,
    pub epochs_per_eval: usize,
    pub final_eval_epochs: usize,
    pub seeds: Vec<SeedReport>,
    pub timing: Timing,
}

impl RunReport {
    /// True unless some search ended without converging.
    pub fn all_converged(&self) -> bool {
        self.seeds
            .iter()
            .all(|s| s.verdict.is_none_or(|v| v == Verdict::Converged))
    }

    pub fn seed(&self, seed: u64) -> Option<&SeedReport> {
        self.seeds.iter().find(|s| s.seed == seed)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
