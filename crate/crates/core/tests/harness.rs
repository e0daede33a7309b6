use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use autohyper::harness::{compare, probe_snapshots, run, RunConfig, RunReport, SnapshotReplay};
use autohyper::search::{Evaluator, HpValues};
use autohyper::trainer::{
    synthetic_shapes, write_snapshot_dir, MiniConvNet, NetSpec, OptimizerKind, SnapshotLayer, TrainerEvaluator,
};
use autohyper::Error;

const SMALL_DATA: &str = r#"
[evaluator]
kind = "builtin"
optimizer = "adam"
dataset = { source = "synthetic_shapes", train_size = 256, test_size = 64, seed = 1 }
"#;

fn config(head: &str) -> RunConfig {
    RunConfig::parse(&format!("{head}\n{SMALL_DATA}")).unwrap()
}

fn autohyper_config() -> RunConfig {
    config("mode = \"autohyper\"\n[hp]\nnames = [\"lr\"]\n[final_eval]\nepochs = 3")
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn autohyper_run_writes_report_and_logs() {
    let out = tempfile::tempdir().unwrap();
    let report = run(&autohyper_config(), out.path()).unwrap();
    assert_eq!(report.seeds.len(), 1);
    let s = &report.seeds[0];
    assert!(s.selected.is_some());
    assert_eq!(s.epoch_budget, 5 * s.distinct_evaluations);
    assert!(s.final_accuracy.is_some() && s.final_test_accuracy.is_some());
    assert_eq!(lines(&out.path().join("seed_0/steps.jsonl")).len(), s.steps);
    let probe_rows = lines(&out.path().join("seed_0/probe.csv")).len() - 1;
    assert_eq!(probe_rows, s.distinct_evaluations * 3 * 2 * 5);
    let back = RunReport::load(out.path().join("report.json")).unwrap();
    assert_eq!(back.seeds[0].epoch_budget, s.epoch_budget);
    assert!(back.header.contains("3-epoch"));
}

#[test]
fn reruns_reproduce_step_logs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run(&autohyper_config(), a.path()).unwrap();
    let rb = run(&autohyper_config(), b.path()).unwrap();
    let read = |d: &Path| std::fs::read(d.join("seed_0/steps.jsonl")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_eq!(ra.seeds[0].rank_history, rb.seeds[0].rank_history);
}

#[test]
fn sweep_mode_writes_one_row_per_point() {
    let out = tempfile::tempdir().unwrap();
    let head = "mode = \"sweep\"\nepochs = 2\n[hp]\nnames = [\"lr\"]\n[sweep]\nranges = [[-10, 9]]";
    let cfg = RunConfig::parse(&format!("{head}\n{}", SMALL_DATA.replace("256", "64"))).unwrap();
    let report = run(&cfg, out.path()).unwrap();
    let rows = lines(&out.path().join("seed_0/sweep.csv"));
    assert_eq!(rows.len(), 21);
    assert!(rows[0].starts_with("config_id,k_lr,lr,Z,divergent"));
    assert_eq!(report.seeds[0].epoch_budget, 40);
}

#[test]
fn random_search_matches_a_prior_budget() {
    let dir = tempfile::tempdir().unwrap();
    let first = run(&autohyper_config(), &dir.path().join("ah")).unwrap();
    let toml = format!(
        "mode = \"random_search\"\n[hp]\nnames = [\"lr\"]\n[random_search]\nbounds = [[1e-4, 0.1]]\nbudget_from = \"ah/report.json\"\n[final_eval]\nepochs = 3\n{SMALL_DATA}"
    );
    std::fs::write(dir.path().join("rs.toml"), toml).unwrap();
    let cfg = RunConfig::load(dir.path().join("rs.toml")).unwrap();
    let second = run(&cfg, &dir.path().join("rs")).unwrap();
    assert_eq!(second.seeds[0].epoch_budget, first.seeds[0].epoch_budget);
    assert_eq!(lines(&dir.path().join("rs/seed_0/trials.csv")).len() - 1, first.seeds[0].distinct_evaluations);
    let table = compare(&first, &second).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.rows.iter().all(|r| r.final_accuracy.unwrap().sd == 0.0));
    let text = table.to_string();
    assert!(text.contains("autohyper") && text.contains("random_search"));
}

#[test]
fn compare_rejects_mismatched_optimizers() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&autohyper_config(), &dir.path().join("a")).unwrap();
    let mut b = a.clone();
    b.optimizer = Some(OptimizerKind::Adagrad);
    assert!(matches!(compare(&a, &b), Err(Error::Validation(_))));
}

fn trained(epochs: usize) -> (TrainerEvaluator, Vec<Vec<SnapshotLayer>>) {
    let data = Arc::new(synthetic_shapes(256, 2, 0.2).unwrap());
    let ev = TrainerEvaluator::new(data, OptimizerKind::Adam, 3).with_epochs(epochs);
    let hp = HpValues::new(vec!["lr".into()], vec![1e-2]);
    let snaps = ev.train(&hp, epochs).unwrap().snapshots;
    (ev, snaps)
}

#[test]
fn probing_emitted_files_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let (ev, snaps) = trained(5);
    write_snapshot_dir(dir.path(), &snaps).unwrap();
    let outcome = probe_snapshots(dir.path()).unwrap();
    let direct = ev.evaluate(&HpValues::new(vec!["lr".into()], vec![1e-2])).unwrap();
    assert!((outcome.z - direct.z).abs() <= 1e-12);
    assert_eq!(outcome.z_per_epoch, direct.z_per_epoch);
    assert!(!outcome.all_zero);
}

#[test]
fn replayed_snapshots_drive_a_sweep() {
    let root = tempfile::tempdir().unwrap();
    let data = Arc::new(synthetic_shapes(128, 2, 0.2).unwrap());
    let ev = TrainerEvaluator::new(data, OptimizerKind::Adam, 0).with_epochs(2);
    let replay = SnapshotReplay::new(root.path(), 2);
    let text = format!(
        "mode = \"sweep\"\nepochs = 2\n[hp]\nnames = [\"lr\"]\n[sweep]\nranges = [[-1, 1]]\n[evaluator]\nkind = \"snapshots\"\ndirectory = \"{}\"",
        root.path().display()
    );
    let cfg = RunConfig::parse(&text).unwrap();
    let mut want = Vec::new();
    for hp in cfg.grid().unwrap() {
        let hv = hp.hp_values();
        write_snapshot_dir(replay.dir_for(&hv), &ev.train(&hv, 2).unwrap().snapshots).unwrap();
        want.push(ev.evaluate(&hv).unwrap().z);
    }
    let out = tempfile::tempdir().unwrap();
    run(&cfg, out.path()).unwrap();
    let rows = lines(&out.path().join("seed_0/sweep.csv"));
    let got: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(got, want);
}

#[test]
fn gap_in_epochs_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let (_, snaps) = trained(5);
    write_snapshot_dir(dir.path(), &snaps).unwrap();
    std::fs::remove_file(dir.path().join("epoch_003.snap")).unwrap();
    match probe_snapshots(dir.path()) {
        Err(Error::IncompleteProbe(m)) => assert!(m.contains("epoch 3"), "{m}"),
        other => panic!("expected an incomplete-probe error, got {other:?}"),
    }
}

#[test]
fn all_zero_weights_probe_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut layers = MiniConvNet::<f32>::new(NetSpec::mini(1, 16, 16, 4), 0).unwrap().conv_snapshot();
    layers.iter_mut().for_each(|l| l.data.iter_mut().for_each(|v| *v = 0.0));
    write_snapshot_dir(dir.path(), &[layers.clone(), layers]).unwrap();
    let outcome = probe_snapshots(dir.path()).unwrap();
    assert_eq!(outcome.z, 1.0);
    assert!(outcome.all_zero);
}

#[test]
fn bad_configs_fail_before_training() {
    assert!(matches!(RunConfig::parse("mode = \"autohyper\"\nthis is not toml"), Err(Error::Config(_))));
    let empty = format!("mode = \"autohyper\"\nseeds = []\n[hp]\nnames = [\"lr\"]\n{SMALL_DATA}");
    assert!(matches!(RunConfig::parse(&empty), Err(Error::Config(m)) if m.contains("seed")));
    let missing = "mode = \"probe_snapshots\"\n[evaluator]\nkind = \"snapshots\"\ndirectory = \"/nonexistent/snaps\"";
    assert!(matches!(RunConfig::parse(missing), Err(Error::Config(m)) if m.contains("/nonexistent/snaps")));
}

#[test]
fn cli_probe_and_run() {
    let bin = env!("CARGO_BIN_EXE_autohyper");
    let dir = tempfile::tempdir().unwrap();
    let (_, snaps) = trained(3);
    write_snapshot_dir(dir.path().join("snaps"), &snaps).unwrap();
    let out = Command::new(bin).args(["--quiet", "probe"]).arg(dir.path().join("snaps")).output().unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 3);

    let cfg = format!("mode = \"sweep\"\nepochs = 1\n[hp]\nnames = [\"lr\"]\n[sweep]\nranges = [[0, 1]]\n{SMALL_DATA}");
    std::fs::write(dir.path().join("sweep.toml"), cfg).unwrap();
    let status = Command::new(bin)
        .args(["--quiet", "run", "--seeds", "4,5", "--config"])
        .arg(dir.path().join("sweep.toml"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert!(status.success());
    let report = RunReport::load(dir.path().join("out/report.json")).unwrap();
    assert_eq!(report.seeds.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![4, 5]);

    let bad = Command::new(bin).args(["--quiet", "probe", "/nonexistent"]).status().unwrap();
    assert_eq!(bad.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 4);
}
