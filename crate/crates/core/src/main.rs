use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use autohyper::harness::{compare, output_dir, probe_snapshots, run, RunConfig, RunReport};
use autohyper::metrics::write_probe_csv;

#[derive(Parser)]
#[command(name = "autohyper", version, about = "Low-rank-probe hyper-parameter search")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds, overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Probe a directory of epoch_NNN.snap files.
    Probe {
        dir: PathBuf,
        /// Where to write probe.csv (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two run reports.
    Compare { a: PathBuf, b: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, seeds } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            let out = output_dir(&cfg, out.as_deref());
            let report = run(&cfg, &out)?;
            if !cli.quiet {
                for s in &report.seeds {
                    let sel = s.selected.as_ref().map(|x| format!("{:?}", x.values)).unwrap_or_default();
                    println!(
                        "seed {}: {} {} budget={} final_acc={}",
                        s.seed,
                        s.verdict.map_or("-".to_string(), |v| format!("{v:?}")),
                        sel,
                        s.epoch_budget,
                        s.final_accuracy.map_or("-".into(), |a| format!("{a:.4}"))
                    );
                }
                println!("wrote {}", out.join("report.json").display());
            }
            Ok(if report.all_converged() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Probe { dir, out } => {
            let outcome = probe_snapshots(&dir)?;
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_probe_csv(f, [&outcome.probe])?;
                }
                None => write_probe_csv(std::io::stdout().lock(), [&outcome.probe])?,
            }
            if !cli.quiet {
                eprintln!("Z = {} over {} epochs", outcome.z, outcome.probe.epochs());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { a, b } => {
            let table = compare(&RunReport::load(&a)?, &RunReport::load(&b)?)?;
            print!("{table}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
