//! Closed-form search scenarios shared by the search tests and the acceptance run.

use autohyper::search::{autohyper, ClosedForm, HpConfig, Lattice, SearchOptions, SearchRun, DEFAULT_ALPHA};

use super::{sigmoid, swept_inception};

pub const STARTS: [f64; 5] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
pub const EPS: f64 = 0.01;

pub struct Outcome {
    pub run: SearchRun,
    pub selected: Vec<f64>,
    pub inception: Vec<f64>,
}

impl Outcome {
    /// Largest per-HP ratio max(a/b, b/a) between selection and inception.
    pub fn worst_ratio(&self) -> f64 {
        self.selected
            .iter()
            .zip(&self.inception)
            .map(|(a, b)| (a / b).max(b / a))
            .fold(1.0, f64::max)
    }
}

pub fn one_d(center: f64, start: f64) -> Outcome {
    let lat = Lattice::with_default_alpha(&["lr"], &[start]).unwrap();
    let f = ClosedForm::new(move |hp| sigmoid(hp.values[0], center));
    let run = autohyper(&HpConfig::origin(&lat), &f, &SearchOptions::default()).unwrap();
    let selected = run.selected().unwrap().values();
    let inception = vec![swept_inception(|x| sigmoid(x, center), start, DEFAULT_ALPHA, EPS)];
    Outcome { run, selected, inception }
}

/// Separable surface over (lr, weight decay): the mean of two sigmoids whose
/// centers sit at the same log offset from their respective starts.
pub fn two_d(start: f64) -> Outcome {
    let (c_lr, c_wd) = (3e-4, 3e-6);
    let lat = Lattice::with_default_alpha(&["lr", "weight_decay"], &[start, start / 100.0]).unwrap();
    let f = ClosedForm::new(move |hp| 0.5 * (sigmoid(hp.values[0], c_lr) + sigmoid(hp.values[1], c_wd)));
    let run = autohyper(&HpConfig::origin(&lat), &f, &SearchOptions::default()).unwrap();
    let selected = run.selected().unwrap().values();
    let inception = vec![
        swept_inception(|x| sigmoid(x, c_lr), start, DEFAULT_ALPHA, EPS),
        swept_inception(|x| sigmoid(x, c_wd), start / 100.0, DEFAULT_ALPHA, EPS),
    ];
    Outcome { run, selected, inception }
}

pub fn all_cases() -> Vec<(String, Outcome)> {
    let mut out = Vec::new();
    for s in STARTS {
        out.push((format!("1-D center 3e-4 start {s:e}"), one_d(3e-4, s)));
        out.push((format!("1-D center 1e-2 start {s:e}"), one_d(1e-2, s)));
        out.push((format!("2-D start {s:e}"), two_d(s)));
    }
    out
}
