//! Autohyper on a synthetic response surface, with the step log.

use autohyper::search::{autohyper, log_sigmoid, ClosedForm, HpConfig, HpValues, Lattice, SearchOptions};

fn main() -> autohyper::Result<()> {
    // Z falls from 1 to 0 around lr = 3e-4
    let surface = ClosedForm::new(|hp: &HpValues| log_sigmoid(hp.get("lr").unwrap(), 3e-4, 4.0));
    let lattice = Lattice::with_default_alpha(&["lr"], &[1e-5])?;
    let run = autohyper(&HpConfig::origin(&lattice), &surface, &SearchOptions::default())?;

    run.write_step_log(std::io::stdout().lock())?;
    let chosen = run.selected().expect("search took at least one step");
    println!(
        "{:?}: lr = {:.3e} after {} evaluations ({} epochs)",
        run.verdict(),
        chosen.values()[0],
        run.distinct_evaluations(),
        run.epoch_budget()
    );
    Ok(())
}
