//! Lattice trust-region search over hyper-parameters, plus the random-search
//! baseline and grid sweeps that share its evaluation cache.

mod autohyper;
mod evaluator;
mod lattice;
mod random;
mod sweep;

pub use autohyper::{autohyper, CacheEntry, Phase, SearchOptions, SearchRun, StepRecord, Verdict};
pub use evaluator::{log_sigmoid, AccuracyOracle, ClosedForm, Evaluation, Evaluator, DEFAULT_EPOCHS};
pub use lattice::{
    lattice_grid, trust_region, HpConfig, HpValues, Lattice, RegionMember, TrustRegion, DEFAULT_ALPHA, MAX_EXPONENT,
};
pub use random::{random_search, sample_log_uniform, LogUniformSpace, RandomSearchResult, RandomTrial};
pub use sweep::{sweep, sweep_with, SweepRow, SweepTable};
