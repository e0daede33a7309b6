use std::io::Write;

use serde::{Deserialize, Serialize};

use super::autohyper::SearchRun;
use super::evaluator::Evaluator;
use super::lattice::HpConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config_id: String,
    pub exponents: Vec<i32>,
    pub values: Vec<f64>,
    pub z: f64,
    pub z_per_epoch: Vec<f64>,
    pub divergent: bool,
    /// Served from the cache rather than trained.
    pub cached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub names: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub epoch_budget: usize,
}

/// Evaluates every grid point, training duplicates only once.
pub fn sweep<E: Evaluator + ?Sized>(grid: &[HpConfig], evaluator: &E) -> Result<(SweepTable, SearchRun)> {
    let first = grid
        .first()
        .ok_or_else(|| Error::Validation("sweep grid is empty".into()))?;
    let mut run = SearchRun::new(first.lattice(), evaluator.epochs());
    let table = sweep_with(&mut run, grid, evaluator)?;
    Ok((table, run))
}

/// Like [`sweep`] but sharing the cache of an existing run.
pub fn sweep_with<E: Evaluator + ?Sized>(run: &mut SearchRun, grid: &[HpConfig], evaluator: &E) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::Validation("sweep grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for cfg in grid {
        let (z, new) = run.evaluate(cfg, evaluator)?;
        let entry = run.cached(cfg).expect("just evaluated");
        rows.push(SweepRow {
            config_id: cfg.id(),
            exponents: cfg.exponents().to_vec(),
            values: cfg.values(),
            z,
            z_per_epoch: entry.evaluation.z_per_epoch.clone(),
            divergent: entry.evaluation.divergent,
            cached: !new,
        });
    }
    Ok(SweepTable {
        names: run.lattice().names().to_vec(),
        rows,
        epoch_budget: run.epoch_budget(),
    })
}

impl SweepTable {
    /// CSV with one row per grid point: id, exponents, values, Z, then Z_t per epoch.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let epochs = self.rows.iter().map(|r| r.z_per_epoch.len()).max().unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["config_id".to_string()];
        header.extend(self.names.iter().map(|n| format!("k_{n}")));
        header.extend(self.names.iter().cloned());
        header.push("Z".into());
        header.push("divergent".into());
        header.extend((1..=epochs).map(|t| format!("Z_t{t}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.config_id.clone()];
            rec.extend(r.exponents.iter().map(|k| k.to_string()));
            rec.extend(r.values.iter().map(|v| format!("{v:e}")));
            rec.push(r.z.to_string());
            rec.push(r.divergent.to_string());
            rec.extend((0..epochs).map(|t| r.z_per_epoch.get(t).map_or(String::new(), |z| z.to_string())));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::evaluator::ClosedForm;
    use crate::search::lattice::{lattice_grid, Lattice};

    #[test]
    fn duplicates_hit_cache() {
        let lat = Lattice::with_default_alpha(&["lr"], &[1e-3]).unwrap();
        let mut grid = lattice_grid(&lat, &[0..=3]).unwrap();
        grid.push(grid[1].clone());
        let (table, _) = sweep(&grid, &ClosedForm::new(|hp| hp.values[0].min(1.0))).unwrap();
        assert_eq!(table.rows.len(), 5);
        assert_eq!(table.epoch_budget, 20);
        assert!(table.rows[4].cached);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("config_id,k_lr,lr,Z,divergent,Z_t1"));
    }

    #[test]
    fn empty_grid() {
        assert!(sweep(&[], &ClosedForm::new(|_| 0.0)).is_err());
    }
}
