use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest step exponent allowed on any axis.
pub const MAX_EXPONENT: i32 = 64;

/// Default multiplicative step between neighbouring lattice points.
pub const DEFAULT_ALPHA: f64 = 1.5;

/// Multiplicative lattice `anchor_i * alpha_i^k_i` over named hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    names: Vec<String>,
    anchors: Vec<f64>,
    alphas: Vec<f64>,
}

impl Lattice {
    pub fn new(names: Vec<String>, anchors: Vec<f64>, alphas: Vec<f64>) -> Result<Arc<Self>> {
        if names.is_empty() {
            return Err(Error::Validation("at least one hyper-parameter is required".into()));
        }
        if anchors.len() != names.len() || alphas.len() != names.len() {
            return Err(Error::Validation(format!(
                "{} names but {} anchors and {} alphas",
                names.len(),
                anchors.len(),
                alphas.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::Validation(format!("duplicate hyper-parameter {name}")));
            }
        }
        if let Some(a) = anchors.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::Validation(format!("anchor {a} must be positive and finite")));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 1.0)) {
            return Err(Error::Validation(format!("step factor {a} must exceed 1")));
        }
        Ok(Arc::new(Self { names, anchors, alphas }))
    }

    /// Lattice with the default step factor on every axis.
    pub fn with_default_alpha(names: &[&str], anchors: &[f64]) -> Result<Arc<Self>> {
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            anchors.to_vec(),
            vec![DEFAULT_ALPHA; names.len()],
        )
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn dims(&self) -> usize {
        self.names.len()
    }

    pub fn value(&self, axis: usize, exponent: i32) -> f64 {
        self.anchors[axis] * self.alphas[axis].powi(exponent)
    }

    /// Lattice exponent closest (in log space) to `value` on `axis`.
    pub fn nearest_exponent(&self, axis: usize, value: f64) -> i32 {
        ((value / self.anchors[axis]).ln() / self.alphas[axis].ln()).round() as i32
    }
}

/// A lattice point. Equality and hashing use the exponent vector only.
#[derive(Clone)]
pub struct HpConfig {
    lattice: Arc<Lattice>,
    exponents: Vec<i32>,
}

impl HpConfig {
    pub fn new(lattice: &Arc<Lattice>, exponents: Vec<i32>) -> Result<Self> {
        if exponents.len() != lattice.dims() {
            return Err(Error::Validation(format!(
                "expected {} exponents, got {}",
                lattice.dims(),
                exponents.len()
            )));
        }
        if let Some(k) = exponents.iter().find(|k| k.abs() > MAX_EXPONENT) {
            return Err(Error::Validation(format!(
                "exponent {k} outside +/-{MAX_EXPONENT}"
            )));
        }
        let cfg = Self {
            lattice: Arc::clone(lattice),
            exponents,
        };
        if let Some(v) = cfg.values().iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Validation(format!("lattice value {v} not positive and finite")));
        }
        Ok(cfg)
    }

    pub fn origin(lattice: &Arc<Lattice>) -> Self {
        Self::new(lattice, vec![0; lattice.dims()]).expect("origin is always valid")
    }

    /// Lattice point nearest to the given hyper-parameter values.
    pub fn nearest(lattice: &Arc<Lattice>, values: &[f64]) -> Result<Self> {
        if values.len() != lattice.dims() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation(format!("cannot place {values:?} on the lattice")));
        }
        let exps = values
            .iter()
            .enumerate()
            .map(|(i, &v)| lattice.nearest_exponent(i, v))
            .collect();
        Self::new(lattice, exps)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn exponents(&self) -> &[i32] {
        &self.exponents
    }

    pub fn values(&self) -> Vec<f64> {
        self.exponents
            .iter()
            .enumerate()
            .map(|(i, &k)| self.lattice.value(i, k))
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = self.lattice.names.iter().position(|n| n == name)?;
        Some(self.lattice.value(i, self.exponents[i]))
    }

    pub fn hp_values(&self) -> HpValues {
        HpValues::new(self.lattice.names.clone(), self.values())
    }

    /// Stable textual id, e.g. `lr@k=-2,weight_decay@k=0`.
    pub fn id(&self) -> String {
        self.lattice
            .names
            .iter()
            .zip(&self.exponents)
            .map(|(n, k)| format!("{n}@k={k}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn offset(&self, delta: &[i32]) -> Result<Self> {
        let exps = self.exponents.iter().zip(delta).map(|(k, d)| k + d).collect();
        Self::new(&self.lattice, exps)
    }
}

impl PartialEq for HpConfig {
    fn eq(&self, other: &Self) -> bool {
        self.exponents == other.exponents
    }
}

impl Eq for HpConfig {}

impl Hash for HpConfig {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.exponents.hash(state);
    }
}

impl fmt::Debug for HpConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HpConfig")
            .field("exponents", &self.exponents)
            .field("values", &self.values())
            .finish()
    }
}

impl fmt::Display for HpConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.hp_values(), f)
    }
}

/// Named hyper-parameter values, on or off the lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpValues {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl HpValues {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Self {
        Self { names, values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

impl fmt::Display for HpValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, v)) in self.names.iter().zip(&self.values).enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}={v:.4e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RegionMember {
    pub delta: Vec<i32>,
    pub config: HpConfig,
}

impl RegionMember {
    /// Ordering used to break ties: smaller moves first, then lexicographic delta.
    pub fn tie_key(&self) -> (i32, &[i32]) {
        (self.delta.iter().map(|d| d * d).sum(), &self.delta)
    }
}

/// Every combination of `{k_i - 1, k_i, k_i + 1}` around a center.
#[derive(Clone, Debug)]
pub struct TrustRegion {
    pub center: HpConfig,
    pub members: Vec<RegionMember>,
    /// Some moves were dropped because they would leave the exponent bounds.
    pub truncated: bool,
}

impl TrustRegion {
    pub fn around(center: &HpConfig) -> Self {
        let n = center.exponents.len();
        let mut members = Vec::with_capacity(3usize.pow(n as u32));
        let mut truncated = false;
        let mut delta = vec![-1i32; n];
        loop {
            match center.offset(&delta) {
                Ok(config) => members.push(RegionMember {
                    delta: delta.clone(),
                    config,
                }),
                Err(_) => truncated = true,
            }
            // odometer over (-1, 0, +1), last axis fastest
            let mut axis = n;
            loop {
                if axis == 0 {
                    return Self {
                        center: center.clone(),
                        members,
                        truncated,
                    };
                }
                axis -= 1;
                if delta[axis] < 1 {
                    delta[axis] += 1;
                    break;
                }
                delta[axis] = -1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn trust_region(center: &HpConfig) -> TrustRegion {
    TrustRegion::around(center)
}

/// Cartesian product of exponent ranges, first axis outermost.
pub fn lattice_grid(lattice: &Arc<Lattice>, ranges: &[std::ops::RangeInclusive<i32>]) -> Result<Vec<HpConfig>> {
    if ranges.len() != lattice.dims() {
        return Err(Error::Validation(format!(
            "grid needs {} exponent ranges, got {}",
            lattice.dims(),
            ranges.len()
        )));
    }
    let mut out = vec![Vec::new()];
    for range in ranges {
        let mut next = Vec::new();
        for prefix in &out {
            for k in range.clone() {
                let mut p: Vec<i32> = prefix.clone();
                p.push(k);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(|e| HpConfig::new(lattice, e)).collect()
}
