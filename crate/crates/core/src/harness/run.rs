use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::info;

use super::config::{EvaluatorSection, Mode, RunConfig};
use super::probe::{probe_snapshots, SnapshotReplay};
use super::report::{RunReport, SeedReport, Selection, Timing};
use crate::error::{Error, Result};
use crate::metrics::write_probe_csv;
use crate::search::{autohyper, random_search, sweep, Evaluator, HpValues, SearchRun};
use crate::trainer::{evaluate_accuracy, Dataset, TrainerEvaluator};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_probes(run: &SearchRun, path: &Path) -> Result<()> {
    let probes = run.evaluations().iter().filter_map(|e| e.evaluation.probe.as_ref());
    write_probe_csv(create(path)?, probes)
}

struct Builtin {
    train: Arc<Dataset>,
    test: Option<Dataset>,
}

/// Runs the configured experiment for every seed and writes
/// `report.json` plus per-seed `seed_<s>/` artifacts under `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunReport> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());

    let builtin = match &config.evaluator {
        EvaluatorSection::Builtin { dataset, .. } => Some(Builtin {
            train: Arc::new(dataset.load_train()?),
            test: dataset.load_test()?,
        }),
        EvaluatorSection::Snapshots { .. } => None,
    };
    let (optimizer, dataset) = match &config.evaluator {
        EvaluatorSection::Builtin { optimizer, dataset, .. } => (Some(*optimizer), Some(dataset.name())),
        EvaluatorSection::Snapshots { .. } => (None, None),
    };
    let hp_names = config.hp.as_ref().map(|h| h.names.clone()).unwrap_or_default();
    let final_eval_epochs = match config.mode {
        Mode::Autohyper | Mode::RandomSearch if builtin.is_some() => config.final_eval.epochs,
        _ => 0,
    };
    let mut report = RunReport {
        header: format!(
            "{} run; {} epochs per evaluated configuration; final_accuracy is training accuracy after a \
             fresh {final_eval_epochs}-epoch run at the selected setting",
            config.mode, config.epochs
        ),
        mode: config.mode,
        optimizer,
        dataset,
        hp_names,
        epochs_per_eval: config.epochs,
        final_eval_epochs,
        seeds: Vec::new(),
        timing: Timing {
            started_unix_secs: started,
            seconds_per_seed: Vec::new(),
        },
    };

    if config.mode == Mode::ProbeSnapshots {
        let EvaluatorSection::Snapshots { directory } = &config.evaluator else {
            unreachable!("validated");
        };
        let t = Instant::now();
        let outcome = probe_snapshots(directory)?;
        write_probe_csv(create(&out.join("probe.csv"))?, [&outcome.probe])?;
        let mut s = SeedReport::new(config.seeds[0]);
        s.z = Some(outcome.z);
        report.seeds.push(s);
        report.timing.seconds_per_seed.push(t.elapsed().as_secs_f64());
        report.save(out.join("report.json"))?;
        return Ok(report);
    }

    let prior = match config.random_search.as_ref().and_then(|r| r.budget_from.as_ref()) {
        Some(p) if config.mode == Mode::RandomSearch => Some(RunReport::load(p)?),
        _ => None,
    };

    for &seed in &config.seeds {
        let t = Instant::now();
        let dir = out.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let evaluator: Box<dyn Evaluator> = match (&config.evaluator, &builtin) {
            (
                EvaluatorSection::Builtin {
                    optimizer,
                    lr,
                    weight_decay,
                    batch_size,
                    ..
                },
                Some(b),
            ) => Box::new(
                TrainerEvaluator::new(Arc::clone(&b.train), *optimizer, seed)
                    .with_fixed(*lr, *weight_decay)
                    .with_epochs(config.epochs)
                    .with_batch_size(*batch_size),
            ),
            (EvaluatorSection::Snapshots { directory }, _) => {
                Box::new(SnapshotReplay::new(directory.clone(), config.epochs))
            }
            _ => unreachable!("builtin data is loaded for builtin evaluators"),
        };
        let mut sr = SeedReport::new(seed);
        let mut chosen: Option<HpValues> = None;
        match config.mode {
            Mode::Autohyper => {
                let run = autohyper(&config.start()?, evaluator.as_ref(), &config.options())?;
                run.write_step_log(create(&dir.join("steps.jsonl"))?)?;
                write_probes(&run, &dir.join("probe.csv"))?;
                let sel = run.selected().expect("search ran at least one step");
                info!("seed {seed}: {:?} at {sel} after {} epochs", run.verdict(), run.epoch_budget());
                sr.verdict = Some(run.verdict());
                sr.selected = Some(Selection {
                    values: sel.values(),
                    exponents: Some(sel.exponents().to_vec()),
                });
                sr.epoch_budget = run.epoch_budget();
                sr.distinct_evaluations = run.distinct_evaluations();
                sr.steps = run.steps().len();
                sr.rank_history = run.rank_history().values().to_vec();
                sr.stabilized = run.rank_history().stabilized().to_vec();
                chosen = Some(sel.hp_values());
            }
            Mode::RandomSearch => {
                let rs = config.random_search.as_ref().expect("validated");
                let budget = match (&rs.budget_epochs, &prior) {
                    (Some(b), _) => *b,
                    (None, Some(p)) => {
                        p.seed(seed)
                            .ok_or_else(|| {
                                Error::Config(format!("budget report has no entry for seed {seed}"))
                            })?
                            .epoch_budget
                    }
                    (None, None) => unreachable!("validated"),
                };
                let result = random_search(&config.space()?, budget, evaluator.as_ref(), seed)?;
                let mut w = csv::Writer::from_writer(create(&dir.join("trials.csv"))?);
                let mut header: Vec<String> = config.space()?.names().to_vec();
                header.extend(["accuracy".into(), "divergent".into()]);
                w.write_record(&header)?;
                for t in &result.trials {
                    let mut rec: Vec<String> = t.values.values.iter().map(|v| format!("{v:e}")).collect();
                    rec.push(t.accuracy.map_or(String::new(), |a| a.to_string()));
                    rec.push(t.divergent.to_string());
                    w.write_record(&rec)?;
                }
                w.flush().map_err(|e| Error::io(&dir, e))?;
                let best = result.best_trial();
                info!("seed {seed}: random search winner {} ({} trials)", best.values, result.trials.len());
                sr.selected = Some(Selection {
                    values: best.values.values.clone(),
                    exponents: None,
                });
                sr.epoch_budget = result.epoch_budget;
                sr.distinct_evaluations = result.trials.len();
                sr.winner_accuracy = best.accuracy;
                chosen = Some(best.values.clone());
            }
            Mode::Sweep => {
                let (table, run) = sweep(&config.grid()?, evaluator.as_ref())?;
                table.write_csv(create(&dir.join("sweep.csv"))?)?;
                write_probes(&run, &dir.join("probe.csv"))?;
                sr.epoch_budget = table.epoch_budget;
                sr.distinct_evaluations = run.distinct_evaluations();
            }
            Mode::ProbeSnapshots => unreachable!("handled above"),
        }
        if let (Some(hp), Some(b), true) = (&chosen, &builtin, final_eval_epochs > 0) {
            final_evaluation(config, seed, hp, b, final_eval_epochs, &mut sr)?;
        }
        report.seeds.push(sr);
        report.timing.seconds_per_seed.push(t.elapsed().as_secs_f64());
    }
    report.save(out.join("report.json"))?;
    Ok(report)
}

fn final_evaluation(
    config: &RunConfig,
    seed: u64,
    hp: &HpValues,
    data: &Builtin,
    epochs: usize,
    sr: &mut SeedReport,
) -> Result<()> {
    let EvaluatorSection::Builtin {
        optimizer,
        lr,
        weight_decay,
        batch_size,
        ..
    } = &config.evaluator
    else {
        return Ok(());
    };
    let ev = TrainerEvaluator::new(Arc::clone(&data.train), *optimizer, seed)
        .with_fixed(*lr, *weight_decay)
        .with_batch_size(*batch_size);
    let run = ev.train(hp, epochs)?;
    if run.divergent {
        sr.final_divergent = true;
        return Ok(());
    }
    sr.final_accuracy = run.final_accuracy();
    if let Some(test) = &data.test {
        sr.final_test_accuracy = Some(evaluate_accuracy(&run.net, test)?);
    }
    Ok(())
}

/// Output directory: explicit override, else the config's `output`, else `runs/<mode>`.
pub fn output_dir(config: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(config.mode.to_string()))
}
