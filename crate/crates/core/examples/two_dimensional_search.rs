//! Joint search over learning rate and weight decay.

use autohyper::search::{autohyper, log_sigmoid, ClosedForm, HpConfig, HpValues, Lattice, SearchOptions};

fn main() -> autohyper::Result<()> {
    let surface = ClosedForm::new(|hp: &HpValues| {
        let lr = log_sigmoid(hp.get("lr").unwrap(), 3e-4, 4.0);
        let wd = log_sigmoid(hp.get("weight_decay").unwrap(), 3e-6, 4.0);
        0.5 * (lr + wd)
    });
    let lattice = Lattice::with_default_alpha(&["lr", "weight_decay"], &[1e-5, 1e-7])?;
    let run = autohyper(&HpConfig::origin(&lattice), &surface, &SearchOptions::default())?;

    for step in run.steps() {
        let c = &step.center_exponents;
        println!(
            "step {:2} {:?} center {:?} -> {:?}",
            step.step, step.phase, c, step.member_exponents[step.chosen]
        );
    }
    let chosen = run.selected().unwrap();
    println!(
        "{:?}: lr = {:.3e}, weight_decay = {:.3e}, {} of {} lookups served from cache",
        run.verdict(),
        chosen.values()[0],
        chosen.values()[1],
        run.steps().iter().map(|s| s.member_exponents.len() - s.new_evaluations).sum::<usize>(),
        run.steps().iter().map(|s| s.member_exponents.len()).sum::<usize>()
    );
    Ok(())
}
