use std::fmt;

use serde::{Deserialize, Serialize};

use super::report::RunReport;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Self { mean, sd, n })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub label: String,
    pub seeds: usize,
    /// Per hyper-parameter, over seeds.
    pub selected: Vec<Option<MeanSd>>,
    pub epoch_budget: Option<MeanSd>,
    pub final_accuracy: Option<MeanSd>,
    pub final_test_accuracy: Option<MeanSd>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub hp_names: Vec<String>,
    pub final_eval_epochs: usize,
    pub rows: Vec<CompareRow>,
}

fn row(r: &RunReport) -> CompareRow {
    let col = |f: &dyn Fn(&super::report::SeedReport) -> Option<f64>| {
        MeanSd::of(&r.seeds.iter().filter_map(f).collect::<Vec<_>>())
    };
    CompareRow {
        label: r.mode.to_string(),
        seeds: r.seeds.len(),
        selected: (0..r.hp_names.len())
            .map(|i| col(&|s| s.selected.as_ref().map(|x| x.values[i])))
            .collect(),
        epoch_budget: col(&|s| Some(s.epoch_budget as f64)),
        final_accuracy: col(&|s| s.final_accuracy),
        final_test_accuracy: col(&|s| s.final_test_accuracy),
    }
}

/// Side-by-side summary of two runs on the same optimizer, data and search space.
pub fn compare(a: &RunReport, b: &RunReport) -> Result<Comparison> {
    if a.optimizer.is_none() || a.optimizer != b.optimizer {
        return Err(Error::Validation(format!(
            "reports use different optimizers ({:?} vs {:?})",
            a.optimizer, b.optimizer
        )));
    }
    if a.dataset != b.dataset {
        return Err(Error::Validation(format!(
            "reports use different datasets ({:?} vs {:?})",
            a.dataset, b.dataset
        )));
    }
    if a.hp_names != b.hp_names {
        return Err(Error::Validation(format!(
            "reports tune different hyper-parameters ({:?} vs {:?})",
            a.hp_names, b.hp_names
        )));
    }
    if a.final_eval_epochs != b.final_eval_epochs {
        return Err(Error::Validation(format!(
            "final evaluations differ in length ({} vs {} epochs)",
            a.final_eval_epochs, b.final_eval_epochs
        )));
    }
    Ok(Comparison {
        hp_names: a.hp_names.clone(),
        final_eval_epochs: a.final_eval_epochs,
        rows: vec![row(a), row(b)],
    })
}

fn cell(v: &Option<MeanSd>, sci: bool) -> String {
    match v {
        Some(m) if sci => format!("{:.3e} ± {:.2e}", m.mean, m.sd),
        Some(m) => format!("{:.4} ± {:.4}", m.mean, m.sd),
        None => "-".into(),
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut header = vec!["run".to_string(), "seeds".into()];
        header.extend(self.hp_names.iter().cloned());
        header.extend([
            "epoch budget".into(),
            format!("train acc ({} ep)", self.final_eval_epochs),
            "held-out acc".into(),
        ]);
        let mut rows = vec![header];
        for r in &self.rows {
            let mut cells = vec![r.label.clone(), r.seeds.to_string()];
            cells.extend(r.selected.iter().map(|s| cell(s, true)));
            cells.push(cell(&r.epoch_budget, false).replace(".0000", ""));
            cells.push(cell(&r.final_accuracy, false));
            cells.push(cell(&r.final_test_accuracy, false));
            rows.push(cells);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        for r in &rows {
            let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            writeln!(f, "{}", line.join("  ").trim_end())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd() {
        assert_eq!(MeanSd::of(&[]), None);
        assert_eq!(MeanSd::of(&[2.0]).unwrap().sd, 0.0);
        let m = MeanSd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
