//! Experiment orchestration behind the command-line tool: TOML run configs,
//! per-seed runs with their artifacts, snapshot-directory probing and report
//! comparison.

mod compare;
mod config;
mod probe;
mod report;
mod run;

pub use compare::{compare, CompareRow, Comparison, MeanSd};
pub use config::{
    EvaluatorSection, FinalEvalSection, HpSection, Mode, RandomSearchSection, RunConfig, SearchSection, SweepSection,
};
pub use probe::{load_snapshot_dir, probe_snapshots, snapshot_files, ProbeOutcome, SnapshotReplay};
pub use report::{RunReport, SeedReport, Selection, Timing};
pub use run::{output_dir, run};
