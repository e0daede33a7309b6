//! Stable rank per unfolded layer, the per-epoch fraction of empty low-rank
//! probes, its average over the probe epochs, and the damped cumulative
//! product used to detect when that average stops improving.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evbmf::{evbmf, FactorizationResult};
use crate::tensor::{unfold, Mode, WeightTensor4D};

/// Exponent applied to the cumulative product of the rank history.
pub const STABILIZATION_POWER: f64 = 0.8;

/// Stable rank `sum(d_i) / (channel_dim * d_1)` of a factorization.
///
/// Returns exactly `0.0` for an empty low-rank component.
pub fn stable_rank(fact: &FactorizationResult, channel_dim: usize) -> Result<f64> {
    if channel_dim == 0 || channel_dim < fact.rank {
        return Err(Error::Validation(format!(
            "channel dimension {channel_dim} cannot hold rank {}",
            fact.rank
        )));
    }
    if fact.rank == 0 {
        return Ok(0.0);
    }
    let d = &fact.shrunk_singular_values;
    let total: f64 = d.iter().sum();
    Ok((total / (channel_dim as f64 * d[0])).min(1.0))
}

/// Stable ranks `G[layer][mode][epoch]` for one hyper-parameter configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProbe {
    config_id: String,
    layers: Vec<String>,
    epochs: usize,
    // index: (epoch - 1) * layers * 2 + layer * 2 + mode slot
    values: Vec<Option<f64>>,
}

fn mode_slot(mode: Mode) -> usize {
    match mode {
        Mode::Input => 0,
        Mode::Output => 1,
    }
}

impl RankProbe {
    pub fn new(config_id: impl Into<String>, layers: Vec<String>, epochs: usize) -> Self {
        let n = layers.len() * 2 * epochs;
        Self {
            config_id: config_id.into(),
            layers,
            epochs,
            values: vec![None; n],
        }
    }

    pub fn config_id(&self) -> &str {
        &self.config_id
    }

    pub fn layers(&self) -> &[String] {
        &self.layers
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    fn index(&self, layer: usize, mode: Mode, epoch: usize) -> Result<usize> {
        if layer >= self.layers.len() || epoch == 0 || epoch > self.epochs {
            return Err(Error::Validation(format!(
                "probe cell (layer {layer}, epoch {epoch}) outside {} layers x {} epochs",
                self.layers.len(),
                self.epochs
            )));
        }
        Ok(((epoch - 1) * self.layers.len() + layer) * 2 + mode_slot(mode))
    }

    /// Records `G` for a cell; `epoch` is 1-based.
    pub fn set(&mut self, layer: usize, mode: Mode, epoch: usize, g: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::Validation(format!("stable rank {g} outside [0, 1]")));
        }
        let i = self.index(layer, mode, epoch)?;
        self.values[i] = Some(g);
        Ok(())
    }

    pub fn get(&self, layer: usize, mode: Mode, epoch: usize) -> Option<f64> {
        self.index(layer, mode, epoch).ok().and_then(|i| self.values[i])
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Fills every cell of `epoch` from that epoch's conv weights.
    pub fn record_epoch(&mut self, epoch: usize, weights: &[WeightTensor4D]) -> Result<()> {
        if weights.len() != self.layers.len() {
            return Err(Error::Validation(format!(
                "epoch {epoch}: expected {} layers, got {}",
                self.layers.len(),
                weights.len()
            )));
        }
        for (layer, w) in weights.iter().enumerate() {
            for mode in Mode::ALL {
                let g = layer_stable_rank(w, mode)?;
                self.set(layer, mode, epoch, g)?;
            }
        }
        Ok(())
    }

    /// Builds a complete probe from per-epoch weight sets (epoch 1 first).
    pub fn from_snapshots(config_id: impl Into<String>, epochs: &[Vec<WeightTensor4D>]) -> Result<Self> {
        let layers = epochs
            .first()
            .map(|w| w.iter().map(|t| t.name().to_string()).collect())
            .unwrap_or_default();
        let mut probe = Self::new(config_id, layers, epochs.len());
        for (i, weights) in epochs.iter().enumerate() {
            probe.record_epoch(i + 1, weights)?;
        }
        Ok(probe)
    }
}

/// Stable rank of one layer's unfolding, with the noise variance estimated.
pub fn layer_stable_rank(weights: &WeightTensor4D, mode: Mode) -> Result<f64> {
    let unfolded = unfold(weights, mode);
    let fact = evbmf(&unfolded, None)?;
    stable_rank(&fact, unfolded.rows())
}

/// Fraction of (layer, mode) cells at `epoch` whose stable rank is exactly zero.
pub fn zero_rank_fraction(probe: &RankProbe, epoch: usize) -> Result<f64> {
    if probe.layers.is_empty() {
        return Err(Error::Validation("probe has no layers".into()));
    }
    let mut zeros = 0usize;
    for layer in 0..probe.layers.len() {
        for mode in Mode::ALL {
            let i = probe.index(layer, mode, epoch)?;
            let g = probe.values[i].ok_or_else(|| {
                Error::IncompleteProbe(format!(
                    "missing G for layer {} ({}) mode {} epoch {epoch}",
                    layer,
                    probe.layers[layer],
                    mode.index()
                ))
            })?;
            if g == 0.0 {
                zeros += 1;
            }
        }
    }
    Ok(zeros as f64 / (2 * probe.layers.len()) as f64)
}

pub fn zero_rank_fractions(probe: &RankProbe) -> Result<Vec<f64>> {
    (1..=probe.epochs).map(|t| zero_rank_fraction(probe, t)).collect()
}

/// Mean of the per-epoch zero-rank fractions.
pub fn global_stable_rank(probe: &RankProbe) -> Result<f64> {
    if probe.epochs == 0 {
        return Err(Error::Validation("probe covers zero epochs".into()));
    }
    let per_epoch = zero_rank_fractions(probe)?;
    Ok(per_epoch.iter().sum::<f64>() / per_epoch.len() as f64)
}

/// `c_j = (prod_{i<=j} v_i)^0.8`, accumulated in log space.
pub fn stabilize(values: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    let mut log_sum = 0.0f64;
    for (i, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!(
                "rank history entry {i} = {v} outside [0, 1]"
            )));
        }
        log_sum += v.ln();
        out.push(if log_sum == f64::NEG_INFINITY {
            0.0
        } else {
            (STABILIZATION_POWER * log_sum).exp()
        });
    }
    Ok(out)
}

/// Per-step minimum `Z` values and their stabilized cumulative product.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankHistory {
    values: Vec<f64>,
    stabilized: Vec<f64>,
    #[serde(skip)]
    log_sum: f64,
}

impl RankHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Validation(format!("rank history entry {z} outside [0, 1]")));
        }
        self.log_sum += z.ln();
        let c = if self.log_sum == f64::NEG_INFINITY {
            0.0
        } else {
            (STABILIZATION_POWER * self.log_sum).exp()
        };
        self.values.push(z);
        self.stabilized.push(c);
        Ok(c)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stabilized(&self) -> &[f64] {
        &self.stabilized
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One row of the probe export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub config_id: String,
    pub layer: String,
    pub mode: usize,
    pub epoch: usize,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "Z_t")]
    pub z_t: f64,
    #[serde(rename = "Z")]
    pub z: f64,
}

pub fn probe_rows(probe: &RankProbe) -> Result<Vec<ProbeRow>> {
    let z = global_stable_rank(probe)?;
    let z_t = zero_rank_fractions(probe)?;
    let mut rows = Vec::with_capacity(probe.values.len());
    for epoch in 1..=probe.epochs {
        for (layer, name) in probe.layers.iter().enumerate() {
            for mode in Mode::ALL {
                rows.push(ProbeRow {
                    config_id: probe.config_id.clone(),
                    layer: name.clone(),
                    mode: mode.index(),
                    epoch,
                    g: probe.get(layer, mode, epoch).expect("complete probe"),
                    z_t: z_t[epoch - 1],
                    z,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes `config_id,layer,mode,epoch,G,Z_t,Z` rows for each probe.
pub fn write_probe_csv<'a, W: Write>(
    writer: W,
    probes: impl IntoIterator<Item = &'a RankProbe>,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut any = false;
    for probe in probes {
        for row in probe_rows(probe)? {
            csv.serialize(row)?;
            any = true;
        }
    }
    if !any {
        csv.write_record(["config_id", "layer", "mode", "epoch", "G", "Z_t", "Z"])?;
    }
    csv.flush().map_err(|e| Error::io("probe csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fact(values: &[f64]) -> FactorizationResult {
        FactorizationResult {
            rank: values.len(),
            shrunk_singular_values: values.to_vec(),
            raw_singular_values: values.to_vec(),
            noise_variance: 1.0,
            rows: 3,
            cols: 3,
            threshold: 0.0,
            noise_estimated: false,
            degenerate_bounds: false,
        }
    }

    #[test]
    fn stable_rank_examples() {
        assert_eq!(stable_rank(&fact(&[]), 3).unwrap(), 0.0);
        assert!((stable_rank(&fact(&[2.0, 1.0, 1.0]), 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(stable_rank(&fact(&[0.7; 5]), 5).unwrap(), 1.0);
        assert!(stable_rank(&fact(&[1.0, 1.0]), 1).is_err());
    }

    fn probe_with(g: &[[f64; 2]], epochs: usize) -> RankProbe {
        let layers = (0..g.len()).map(|i| format!("conv{i}")).collect();
        let mut p = RankProbe::new("c", layers, epochs);
        for t in 1..=epochs {
            for (l, pair) in g.iter().enumerate() {
                p.set(l, Mode::Input, t, pair[0]).unwrap();
                p.set(l, Mode::Output, t, pair[1]).unwrap();
            }
        }
        p
    }

    #[test]
    fn zero_rank_fraction_examples() {
        let p = probe_with(&[[0.0, 0.5], [0.0, 0.0]], 1);
        assert_eq!(zero_rank_fraction(&p, 1).unwrap(), 0.75);
        let p = probe_with(&[[0.2, 0.5], [0.1, 1.0]], 1);
        assert_eq!(zero_rank_fraction(&p, 1).unwrap(), 0.0);
        let p = probe_with(&[[0.0, 0.0], [0.0, 0.0]], 1);
        assert_eq!(zero_rank_fraction(&p, 1).unwrap(), 1.0);
    }

    #[test]
    fn incomplete_probe_is_reported() {
        let mut p = RankProbe::new("c", vec!["a".into()], 2);
        p.set(0, Mode::Input, 1, 0.0).unwrap();
        p.set(0, Mode::Output, 1, 0.0).unwrap();
        assert!(zero_rank_fraction(&p, 1).is_ok());
        assert!(matches!(zero_rank_fraction(&p, 2), Err(Error::IncompleteProbe(_))));
        assert!(global_stable_rank(&p).is_err());
        assert!(global_stable_rank(&RankProbe::new("c", vec!["a".into()], 0)).is_err());
    }

    #[test]
    fn global_stable_rank_is_mean() {
        // 5 layers so Z_t steps in tenths: [0.8, 0.6, 0.5, 0.5, 0.5]
        let zeros_per_epoch = [8, 6, 5, 5, 5];
        let layers: Vec<String> = (0..5).map(|i| format!("l{i}")).collect();
        let mut p = RankProbe::new("c", layers, 5);
        for (t, &zeros) in zeros_per_epoch.iter().enumerate() {
            for cell in 0..10 {
                let mode = if cell % 2 == 0 { Mode::Input } else { Mode::Output };
                p.set(cell / 2, mode, t + 1, if cell < zeros { 0.0 } else { 0.4 }).unwrap();
            }
        }
        assert_eq!(
            zero_rank_fractions(&p).unwrap(),
            vec![0.8, 0.6, 0.5, 0.5, 0.5]
        );
        assert!((global_stable_rank(&p).unwrap() - 0.58).abs() < 1e-15);
    }

    #[test]
    fn stabilize_examples() {
        assert!((stabilize(&[0.3]).unwrap()[0] - 0.3f64.powf(0.8)).abs() < 1e-15);
        let c = stabilize(&[0.5, 0.0, 0.9]).unwrap();
        assert!(c[0] > 0.0);
        assert_eq!(&c[1..], &[0.0, 0.0]);
        assert!(stabilize(&[0.5, 1.2]).is_err());
        assert!(stabilize(&[-0.1]).is_err());
        assert!(stabilize(&[f64::NAN]).is_err());
    }

    #[test]
    fn csv_export_has_one_row_per_cell() {
        let p = probe_with(&[[0.0, 0.5], [0.0, 0.0]], 2);
        let mut buf = Vec::new();
        write_probe_csv(&mut buf, [&p]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "config_id,layer,mode,epoch,G,Z_t,Z");
        assert_eq!(lines.count(), 8);
    }

    proptest! {
        #[test]
        fn history_matches_stabilize(values in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let mut h = RankHistory::new();
            for &v in &values {
                h.push(v).unwrap();
            }
            let c = stabilize(&values).unwrap();
            prop_assert_eq!(h.stabilized(), &c[..]);
            for j in 1..c.len() {
                prop_assert!(c[j] <= c[j - 1]);
                let expected = c[j - 1] * values[j].powf(STABILIZATION_POWER);
                prop_assert!((c[j] - expected).abs() <= 1e-12 * c[j - 1].max(1e-300) + 1e-300);
            }
        }
    }
}
