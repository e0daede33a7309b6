use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::evaluator::{Evaluation, Evaluator};
use super::lattice::{trust_region, HpConfig, Lattice, RegionMember, TrustRegion};
use crate::error::{Error, Result};
use crate::metrics::RankHistory;

/// Entries of the rank history copied into each step record.
const TAIL: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub max_steps: usize,
    pub plateau_tolerance: f64,
    pub bootstrap_threshold: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_steps: 50,
            plateau_tolerance: 0.01,
            bootstrap_threshold: 0.9,
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::Validation("max_steps must be at least 1".into()));
        }
        if !(self.plateau_tolerance.is_finite() && self.plateau_tolerance > 0.0) {
            return Err(Error::Validation(format!(
                "plateau tolerance {} must be positive",
                self.plateau_tolerance
            )));
        }
        if !(0.0..=1.0).contains(&self.bootstrap_threshold) {
            return Err(Error::Validation(format!(
                "bootstrap threshold {} outside [0, 1]",
                self.bootstrap_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Bootstrap,
    Descent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Running,
    Converged,
    BudgetExhausted,
    NoBootstrap,
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub phase: Phase,
    pub center_exponents: Vec<i32>,
    pub member_exponents: Vec<Vec<i32>>,
    pub member_Z_values: Vec<f64>,
    /// Index into the member lists.
    pub chosen: usize,
    pub new_evaluations: usize,
    pub rank_history_tail: Vec<f64>,
    pub stabilized_tail: Vec<f64>,
    pub epoch_budget: usize,
    pub truncated: bool,
}

#[derive(Clone, Debug)]
pub struct CacheEntry {
    pub config: HpConfig,
    pub evaluation: Evaluation,
    /// Failure message when the evaluator returned an error.
    pub error: Option<String>,
}

/// Search state: cache, rank history, step log and verdict.
#[derive(Clone, Debug)]
pub struct SearchRun {
    lattice: Arc<Lattice>,
    epochs_per_eval: usize,
    cache: HashMap<Vec<i32>, usize>,
    entries: Vec<CacheEntry>,
    rank_history: RankHistory,
    steps: Vec<StepRecord>,
    center: Option<HpConfig>,
    verdict: Verdict,
}

impl SearchRun {
    pub fn new(lattice: &Arc<Lattice>, epochs_per_eval: usize) -> Self {
        Self {
            lattice: Arc::clone(lattice),
            epochs_per_eval,
            cache: HashMap::new(),
            entries: Vec::new(),
            rank_history: RankHistory::new(),
            steps: Vec::new(),
            center: None,
            verdict: Verdict::Running,
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    /// Epochs spent so far: one training run per distinct configuration.
    pub fn epoch_budget(&self) -> usize {
        self.epochs_per_eval * self.entries.len()
    }

    pub fn epochs_per_eval(&self) -> usize {
        self.epochs_per_eval
    }

    pub fn distinct_evaluations(&self) -> usize {
        self.entries.len()
    }

    /// Cached evaluations in the order they were first computed.
    pub fn evaluations(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn cached(&self, config: &HpConfig) -> Option<&CacheEntry> {
        self.cache.get(config.exponents()).map(|&i| &self.entries[i])
    }

    pub fn rank_history(&self) -> &RankHistory {
        &self.rank_history
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    /// Trust-region center when the search stopped (the selected point once converged).
    pub fn selected(&self) -> Option<&HpConfig> {
        self.center.as_ref()
    }

    /// Z for `config`, training it only on a cache miss. Returns `(Z, was_new)`.
    ///
    /// Evaluation and numerical failures are cached as divergent with Z = 1;
    /// any other error (bad input, missing files) aborts.
    pub fn evaluate<E: Evaluator + ?Sized>(&mut self, config: &HpConfig, evaluator: &E) -> Result<(f64, bool)> {
        if config.lattice().as_ref() != self.lattice.as_ref() {
            return Err(Error::Validation("configuration belongs to a different lattice".into()));
        }
        if let Some(&i) = self.cache.get(config.exponents()) {
            return Ok((self.entries[i].evaluation.z, false));
        }
        let hp = config.hp_values();
        let (mut evaluation, error) = match evaluator.evaluate(&hp) {
            Ok(e) => (e, None),
            Err(e @ (Error::Evaluation(_) | Error::Numerical(_))) => {
                warn!("evaluation of {hp} failed: {e}; scoring as divergent");
                (Evaluation::divergent(), Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
        if evaluation.divergent {
            evaluation.z = 1.0;
        } else if !(0.0..=1.0).contains(&evaluation.z) {
            return Err(Error::Evaluation(format!(
                "evaluator returned Z = {} for {hp}",
                evaluation.z
            )));
        }
        debug!("{hp}: Z = {}", evaluation.z);
        let z = evaluation.z;
        self.cache.insert(config.exponents().to_vec(), self.entries.len());
        self.entries.push(CacheEntry {
            config: config.clone(),
            evaluation,
            error,
        });
        Ok((z, true))
    }

    /// Evaluates every member; returns their Z values and the number of cache misses.
    pub fn evaluate_region<E: Evaluator + ?Sized>(
        &mut self,
        region: &TrustRegion,
        evaluator: &E,
    ) -> Result<(Vec<f64>, usize)> {
        let mut zs = Vec::with_capacity(region.len());
        let mut fresh = 0;
        for m in &region.members {
            let (z, new) = self.evaluate(&m.config, evaluator)?;
            zs.push(z);
            fresh += new as usize;
        }
        Ok((zs, fresh))
    }

    pub fn write_step_log<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n").map_err(|e| Error::io("<step log>", e))?;
        }
        Ok(())
    }
}

/// Index of the best member under `better`, ties going to the smallest move.
fn pick(members: &[RegionMember], zs: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for i in 1..members.len() {
        let (zi, zb) = (zs[i], zs[best]);
        if better(zi, zb) || (zi == zb && members[i].tie_key() < members[best].tie_key()) {
            best = i;
        }
    }
    best
}

fn tail(v: &[f64]) -> Vec<f64> {
    v[v.len().saturating_sub(TAIL)..].to_vec()
}

/// Trust-region search over the lattice of `start`.
///
/// While every member of the region scores below the bootstrap threshold the
/// center climbs toward larger Z, unless the climb would not move it. After
/// that it descends to the member of
/// least Z and stops once the rank history and its damped cumulative product
/// both stop moving below the threshold, or Z reaches zero.
pub fn autohyper<E: Evaluator + ?Sized>(start: &HpConfig, evaluator: &E, options: &SearchOptions) -> Result<SearchRun> {
    options.validate()?;
    let mut run = SearchRun::new(start.lattice(), evaluator.epochs());
    let mut center = start.clone();
    let mut phase = Phase::Bootstrap;
    let eps = options.plateau_tolerance;

    for step in 0..options.max_steps {
        let region = trust_region(&center);
        let (zs, fresh) = run.evaluate_region(&region, evaluator)?;
        let all_low = zs.iter().all(|&z| z < options.bootstrap_threshold);
        let mut chosen = pick(&region.members, &zs, |a, b| a > b);
        if phase == Phase::Bootstrap {
            // a climb that would not move the center can never reach the threshold
            let stuck = region.members[chosen].config == center;
            if !all_low || stuck {
                phase = Phase::Descent;
            }
        }
        if phase == Phase::Descent {
            chosen = pick(&region.members, &zs, |a, b| a < b);
        }
        let z = zs[chosen];
        center = region.members[chosen].config.clone();
        let mut plateau = false;
        if phase == Phase::Descent {
            run.rank_history.push(z)?;
            let rh = run.rank_history.values();
            let c = run.rank_history.stabilized();
            let j = rh.len() - 1;
            plateau = z == 0.0
                || (j >= 1
                    && z < options.bootstrap_threshold
                    && (c[j - 1] - c[j]).abs() < eps
                    && (rh[j - 1] - rh[j]).abs() < eps);
        }
        run.steps.push(StepRecord {
            step,
            phase,
            center_exponents: region.center.exponents().to_vec(),
            member_exponents: region.members.iter().map(|m| m.config.exponents().to_vec()).collect(),
            member_Z_values: zs,
            chosen,
            new_evaluations: fresh,
            rank_history_tail: tail(run.rank_history.values()),
            stabilized_tail: tail(run.rank_history.stabilized()),
            epoch_budget: run.epoch_budget(),
            truncated: region.truncated,
        });
        debug!("step {step} {phase:?}: moved to {center} (Z = {z})");
        if plateau {
            run.center = Some(center);
            run.verdict = Verdict::Converged;
            return Ok(run);
        }
    }
    run.center = Some(center);
    run.verdict = match phase {
        Phase::Bootstrap => Verdict::NoBootstrap,
        Phase::Descent => Verdict::BudgetExhausted,
    };
    Ok(run)
}
