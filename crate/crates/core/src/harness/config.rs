use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{HpConfig, Lattice, LogUniformSpace, SearchOptions, DEFAULT_ALPHA, DEFAULT_EPOCHS};
use crate::trainer::{DatasetSpec, OptimizerKind, DEFAULT_LR, DEFAULT_WEIGHT_DECAY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Autohyper,
    RandomSearch,
    Sweep,
    ProbeSnapshots,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Autohyper => "autohyper",
            Mode::RandomSearch => "random_search",
            Mode::Sweep => "sweep",
            Mode::ProbeSnapshots => "probe_snapshots",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpSection {
    pub names: Vec<String>,
    /// Start point of the search; defaults to lr = 1e-3, weight_decay = 1e-5.
    #[serde(default)]
    pub anchors: Vec<f64>,
    #[serde(default)]
    pub alphas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorSection {
    Builtin {
        optimizer: OptimizerKind,
        #[serde(default)]
        dataset: DatasetSpec,
        /// Values used for hyper-parameters outside the search space.
        #[serde(default = "default_lr")]
        lr: f64,
        #[serde(default = "default_wd")]
        weight_decay: f64,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
    /// Replays pre-recorded weights; see [`super::SnapshotReplay`].
    Snapshots { directory: PathBuf },
}

fn default_lr() -> f64 {
    DEFAULT_LR
}

fn default_wd() -> f64 {
    DEFAULT_WEIGHT_DECAY
}

fn default_batch() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default = "default_eps")]
    pub plateau_tolerance: f64,
    #[serde(default = "default_steps")]
    pub max_steps: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_threshold: f64,
}

fn default_eps() -> f64 {
    SearchOptions::default().plateau_tolerance
}

fn default_steps() -> usize {
    SearchOptions::default().max_steps
}

fn default_bootstrap() -> f64 {
    SearchOptions::default().bootstrap_threshold
}

impl Default for SearchSection {
    fn default() -> Self {
        let o = SearchOptions::default();
        Self {
            plateau_tolerance: o.plateau_tolerance,
            max_steps: o.max_steps,
            bootstrap_threshold: o.bootstrap_threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSearchSection {
    /// Per-HP `[lo, hi]`, sampled log-uniformly.
    pub bounds: Vec<[f64; 2]>,
    pub budget_epochs: Option<usize>,
    /// Take each seed's budget from a previous autohyper report.
    pub budget_from: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Inclusive exponent range per HP on the search lattice.
    pub ranges: Vec<[i32; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalEvalSection {
    #[serde(default = "default_final_epochs")]
    pub epochs: usize,
}

fn default_final_epochs() -> usize {
    30
}

impl Default for FinalEvalSection {
    fn default() -> Self {
        Self {
            epochs: default_final_epochs(),
        }
    }
}

/// One experiment, parsed from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Training epochs per evaluated configuration.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    pub hp: Option<HpSection>,
    pub evaluator: EvaluatorSection,
    #[serde(default)]
    pub search: SearchSection,
    pub random_search: Option<RandomSearchSection>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub final_eval: FinalEvalSection,
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.evaluator {
            EvaluatorSection::Snapshots { directory } => fix(directory),
            EvaluatorSection::Builtin {
                dataset: DatasetSpec::IdxFiles {
                    images,
                    labels,
                    test_images,
                    test_labels,
                },
                ..
            } => {
                fix(images);
                fix(labels);
                test_images.iter_mut().for_each(fix);
                test_labels.iter_mut().for_each(fix);
            }
            EvaluatorSection::Builtin { .. } => {}
        }
        if let Some(rs) = &mut self.random_search {
            rs.budget_from.iter_mut().for_each(fix);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if let EvaluatorSection::Builtin { batch_size: 0, .. } = self.evaluator {
            return bad("batch_size must be at least 1".into());
        }
        if let EvaluatorSection::Snapshots { directory } = &self.evaluator {
            if !directory.is_dir() {
                return bad(format!("snapshot directory {} does not exist", directory.display()));
            }
        }
        match self.mode {
            Mode::ProbeSnapshots => {
                if !matches!(self.evaluator, EvaluatorSection::Snapshots { .. }) {
                    return bad("probe_snapshots needs a snapshots evaluator".into());
                }
                return Ok(());
            }
            Mode::RandomSearch => {
                if matches!(self.evaluator, EvaluatorSection::Snapshots { .. }) {
                    return bad("random_search needs training accuracy, which snapshots do not carry".into());
                }
                let rs = self
                    .random_search
                    .as_ref()
                    .ok_or_else(|| Error::Config("random_search mode needs a [random_search] section".into()))?;
                if rs.budget_epochs.is_some() == rs.budget_from.is_some() {
                    return bad("give exactly one of random_search.budget_epochs and budget_from".into());
                }
                self.space()?;
            }
            Mode::Sweep => {
                if self.sweep.is_none() {
                    return bad("sweep mode needs a [sweep] section".into());
                }
                self.grid()?;
            }
            Mode::Autohyper => {
                self.start()?;
                self.options().validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    fn hp(&self) -> Result<&HpSection> {
        self.hp
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} mode needs an [hp] section", self.mode)))
    }

    pub fn lattice(&self) -> Result<Arc<Lattice>> {
        let hp = self.hp()?;
        let anchors = if hp.anchors.is_empty() {
            hp.names
                .iter()
                .map(|n| match n.as_str() {
                    "lr" => Ok(DEFAULT_LR),
                    "weight_decay" => Ok(DEFAULT_WEIGHT_DECAY),
                    other => Err(Error::Config(format!("no default anchor for {other}"))),
                })
                .collect::<Result<_>>()?
        } else {
            hp.anchors.clone()
        };
        let alphas = if hp.alphas.is_empty() {
            vec![DEFAULT_ALPHA; hp.names.len()]
        } else {
            hp.alphas.clone()
        };
        Lattice::new(hp.names.clone(), anchors, alphas).map_err(|e| Error::Config(e.to_string()))
    }

    /// Search start: the lattice origin.
    pub fn start(&self) -> Result<HpConfig> {
        Ok(HpConfig::origin(&self.lattice()?))
    }

    pub fn options(&self) -> SearchOptions {
        SearchOptions {
            max_steps: self.search.max_steps,
            plateau_tolerance: self.search.plateau_tolerance,
            bootstrap_threshold: self.search.bootstrap_threshold,
        }
    }

    pub fn space(&self) -> Result<LogUniformSpace> {
        let hp = self.hp()?;
        let rs = self
            .random_search
            .as_ref()
            .ok_or_else(|| Error::Config("missing [random_search] section".into()))?;
        LogUniformSpace::new(hp.names.clone(), rs.bounds.iter().map(|b| (b[0], b[1])).collect())
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Vec<HpConfig>> {
        let lattice = self.lattice()?;
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
        if sweep.ranges.iter().any(|r| r[0] > r[1]) {
            return Err(Error::Config("sweep range with lo > hi".into()));
        }
        let ranges: Vec<_> = sweep.ranges.iter().map(|r| r[0]..=r[1]).collect();
        let grid = crate::search::lattice_grid(&lattice, &ranges).map_err(|e| Error::Config(e.to_string()))?;
        if grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AUTO: &str = r#"
mode = "autohyper"
seeds = [0, 1]

[hp]
names = ["lr"]

[evaluator]
kind = "builtin"
optimizer = "adam"
dataset.source = "synthetic_shapes"
dataset.train_size = 256

[search]
max_steps = 20
"#;

    #[test]
    fn parses_dotted_keys_and_defaults() {
        let cfg = RunConfig::parse(AUTO).unwrap();
        assert_eq!(cfg.mode, Mode::Autohyper);
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.options().max_steps, 20);
        assert_eq!(cfg.options().plateau_tolerance, 0.01);
        assert_eq!(cfg.start().unwrap().values(), vec![1e-3]);
        assert_eq!(cfg.final_eval.epochs, 30);
        match cfg.evaluator {
            EvaluatorSection::Builtin { dataset, optimizer, .. } => {
                assert_eq!(optimizer, OptimizerKind::Adam);
                assert!(matches!(dataset, DatasetSpec::SyntheticShapes { train_size: 256, .. }));
            }
            _ => panic!("wrong evaluator"),
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(RunConfig::parse("mode = 3"), Err(Error::Config(_))));
        assert!(RunConfig::parse(&AUTO.replace("seeds = [0, 1]", "seeds = []")).is_err());
        assert!(RunConfig::parse(&AUTO.replace("max_steps = 20", "max_step = 20")).is_err());
        assert!(RunConfig::parse(&AUTO.replace("autohyper", "sweep")).is_err());
        let snap = "mode = \"probe_snapshots\"\n[evaluator]\nkind = \"snapshots\"\ndirectory = \"/no/such/dir\"\n";
        assert!(matches!(RunConfig::parse(snap), Err(Error::Config(m)) if m.contains("does not exist")));
    }

    #[test]
    fn random_search_needs_one_budget() {
        let base = AUTO.replace("autohyper", "random_search");
        assert!(RunConfig::parse(&format!("{base}\n[random_search]\nbounds = [[1e-4, 0.1]]\n")).is_err());
        let ok = format!("{base}\n[random_search]\nbounds = [[1e-4, 0.1]]\nbudget_epochs = 15\n");
        assert_eq!(RunConfig::parse(&ok).unwrap().space().unwrap().bounds(), &[(1e-4, 0.1)]);
    }
}
