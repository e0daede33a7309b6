use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::idx::load_idx;
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const SHAPES_SIZE: usize = 16;
pub const SHAPES_CLASSES: usize = 4;
// keeps the held-out split disjoint from the training stream
const HELD_OUT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Labelled images stored `(N, C, H, W)` with pixels in `[0, 1]` plus noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    images: Vec<f32>,
    labels: Vec<usize>,
    channels: usize,
    height: usize,
    width: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(
        images: Vec<f32>,
        labels: Vec<usize>,
        channels: usize,
        height: usize,
        width: usize,
        classes: usize,
    ) -> Result<Self> {
        let per = channels * height * width;
        if per == 0 || images.len() != per * labels.len() {
            return Err(Error::Validation(format!(
                "{} pixels do not hold {} images of {channels}x{height}x{width}",
                images.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Validation(format!("label {l} outside {classes} classes")));
        }
        if images.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("non-finite pixel".into()));
        }
        Ok(Self {
            images,
            labels,
            channels,
            height,
            width,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let per = self.channels * self.height * self.width;
        &self.images[i * per..(i + 1) * per]
    }

    /// Copies the selected samples into the channel-major `(C, B, H, W)` layout.
    pub fn gather<T: Scalar>(&self, indices: &[usize]) -> (Vec<T>, Vec<usize>) {
        let area = self.height * self.width;
        let b = indices.len();
        let mut x = vec![T::zero(); self.channels * b * area];
        for (bi, &i) in indices.iter().enumerate() {
            let img = self.image(i);
            for c in 0..self.channels {
                let dst = (c * b + bi) * area;
                for (d, &s) in x[dst..dst + area].iter_mut().zip(&img[c * area..(c + 1) * area]) {
                    *d = T::of(s as f64);
                }
            }
        }
        (x, indices.iter().map(|&i| self.labels[i]).collect())
    }
}

/// 16x16 single-channel images of four classes (horizontal stripes, vertical
/// stripes, checkerboard, centred blob) with Gaussian pixel noise. Sample `i`
/// has label `i % 4`.
pub fn synthetic_shapes(n: usize, seed: u64, noise: f64) -> Result<Dataset> {
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Validation(format!("noise level {noise} must be >= 0")));
    }
    let s = SHAPES_SIZE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let mut images = Vec::with_capacity(n * s * s);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % SHAPES_CLASSES;
        let (p0, p1): (usize, usize) = (rng.gen_range(0..4), rng.gen_range(0..4));
        let cy = 7.5 + rng.gen_range(-1.5..1.5);
        let cx = 7.5 + rng.gen_range(-1.5..1.5);
        let radius: f64 = rng.gen_range(2.0..3.5);
        for y in 0..s {
            for x in 0..s {
                let clean = match label {
                    0 => ((y + p0) / 2 % 2) as f64,
                    1 => ((x + p0) / 2 % 2) as f64,
                    2 => (((y + p0) / 2 + (x + p1) / 2) % 2) as f64,
                    _ => {
                        let r2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                        (-r2 / (2.0 * radius * radius)).exp()
                    }
                };
                let v: f64 = gauss.sample(&mut rng);
                images.push((clean + noise * v) as f32);
            }
        }
        labels.push(label);
    }
    Dataset::new(images, labels, 1, s, s, SHAPES_CLASSES)
}

/// Where training data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSpec {
    SyntheticShapes {
        #[serde(default = "default_train_size")]
        train_size: usize,
        #[serde(default = "default_test_size")]
        test_size: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    IdxFiles {
        images: PathBuf,
        labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
    },
}

fn default_train_size() -> usize {
    2048
}

fn default_test_size() -> usize {
    512
}

fn default_noise() -> f64 {
    0.2
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self::SyntheticShapes {
            train_size: default_train_size(),
            test_size: default_test_size(),
            seed: 0,
            noise: default_noise(),
        }
    }
}

impl DatasetSpec {
    pub fn name(&self) -> String {
        match self {
            Self::SyntheticShapes { train_size, seed, noise, .. } => {
                format!("synthetic_shapes(n={train_size},seed={seed},noise={noise})")
            }
            Self::IdxFiles { images, .. } => format!("idx({})", images.display()),
        }
    }

    pub fn load_train(&self) -> Result<Dataset> {
        match self {
            Self::SyntheticShapes {
                train_size,
                seed,
                noise,
                ..
            } => synthetic_shapes(*train_size, *seed, *noise),
            Self::IdxFiles { images, labels, .. } => load_idx(images, labels),
        }
    }

    /// Held-out split, if one is configured.
    pub fn load_test(&self) -> Result<Option<Dataset>> {
        match self {
            Self::SyntheticShapes {
                test_size,
                seed,
                noise,
                ..
            } => {
                if *test_size == 0 {
                    return Ok(None);
                }
                synthetic_shapes(*test_size, seed ^ HELD_OUT_SALT, *noise).map(Some)
            }
            Self::IdxFiles {
                test_images: Some(i),
                test_labels: Some(l),
                ..
            } => load_idx(i, l).map(Some),
            Self::IdxFiles { .. } => Ok(None),
        }
    }
}
