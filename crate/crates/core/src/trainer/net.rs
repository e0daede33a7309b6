use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::snapshot::SnapshotLayer;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Square, odd kernel with "same" zero padding.
    pub kernel: usize,
    /// 2x2 max-pool after the ReLU.
    pub pool: bool,
}

/// Conv stack (conv, ReLU, optional pool) then global average pool and a linear head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_channels: usize,
    pub height: usize,
    pub width: usize,
    pub convs: Vec<ConvSpec>,
    pub classes: usize,
}

impl NetSpec {
    /// Three 3x3 convs with channels 1 -> 8 -> 16 -> 16 and a pool after the second.
    pub fn mini(input_channels: usize, height: usize, width: usize, classes: usize) -> Self {
        let conv = |i, o, pool| ConvSpec {
            in_channels: i,
            out_channels: o,
            kernel: 3,
            pool,
        };
        Self {
            input_channels,
            height,
            width,
            convs: vec![conv(input_channels, 8, false), conv(8, 16, true), conv(16, 16, false)],
            classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.convs.is_empty() || self.classes < 2 || self.height == 0 || self.width == 0 {
            return Err(Error::Validation(format!("unusable network spec {self:?}")));
        }
        let (mut c, mut h, mut w) = (self.input_channels, self.height, self.width);
        for (i, conv) in self.convs.iter().enumerate() {
            if conv.in_channels != c || conv.out_channels == 0 || conv.kernel % 2 == 0 {
                return Err(Error::Validation(format!("conv {} does not fit its input", i + 1)));
            }
            if conv.pool {
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(Error::Validation(format!("cannot pool a {h}x{w} map after conv {}", i + 1)));
                }
                h /= 2;
                w /= 2;
            }
            c = conv.out_channels;
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.convs.last().map_or(0, |c| c.out_channels)
    }

    pub fn layer_names(&self) -> Vec<String> {
        (1..=self.convs.len()).map(|i| format!("conv{i}")).collect()
    }

    /// Lengths of the parameter blocks: per conv weight then bias, then head weight and bias.
    fn block_lens(&self) -> Vec<usize> {
        let mut v = Vec::new();
        for c in &self.convs {
            v.push(c.kernel * c.kernel * c.in_channels * c.out_channels);
            v.push(c.out_channels);
        }
        v.push(self.classes * self.feature_dim());
        v.push(self.classes);
        v
    }
}

/// Parameter block inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Small convolutional classifier with all parameters in one flat vector.
///
/// Conv weights use the `(kh, kw, in, out)` row-major layout of
/// [`crate::tensor::WeightTensor4D`]; the head weight is `classes x features`.
/// Activations are stored channel-major as `(C, B, H, W)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MiniConvNet<T: Scalar> {
    spec: NetSpec,
    blocks: Vec<Block>,
    params: Vec<T>,
}

struct LayerCache<T> {
    h: usize,
    w: usize,
    cols: Vec<T>,
    // post-ReLU output before pooling
    out: Vec<T>,
    pool_idx: Vec<u32>,
}

/// Loss and accuracy counts of one mini-batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchStats {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    pub correct: usize,
}

impl<T: Scalar> MiniConvNet<T> {
    /// Kaiming-uniform conv weights (`bound = sqrt(6 / fan_in)`); biases and
    /// the head uniform in `+/- 1/sqrt(fan_in)`.
    pub fn new(spec: NetSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(spec);
        let n = net.spec.convs.len();
        for l in 0..n {
            let c = &net.spec.convs[l];
            let bound = (6.0 / (c.kernel * c.kernel * c.in_channels) as f64).sqrt();
            let r = net.blocks[2 * l].range();
            for p in &mut net.params[r] {
                *p = T::of(rng.gen_range(-bound..bound));
            }
            // exactly-zero biases put dead receptive fields on the ReLU kink
            let bias_bound = (1.0 / (c.kernel * c.kernel * c.in_channels) as f64).sqrt();
            for p in &mut net.params[net.blocks[2 * l + 1].range()] {
                *p = T::of(rng.gen_range(-bias_bound..bias_bound));
            }
        }
        let bound = 1.0 / (net.spec.feature_dim() as f64).sqrt();
        for b in [2 * n, 2 * n + 1] {
            for p in &mut net.params[net.blocks[b].range()] {
                *p = T::of(rng.gen_range(-bound..bound));
            }
        }
        Ok(net)
    }

    fn zeros(spec: NetSpec) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        for len in spec.block_lens() {
            blocks.push(Block { offset, len });
            offset += len;
        }
        Self {
            spec,
            blocks,
            params: vec![T::zero(); offset],
        }
    }

    /// Same network in another precision.
    pub fn cast<U: Scalar>(&self) -> MiniConvNet<U> {
        MiniConvNet {
            spec: self.spec.clone(),
            blocks: self.blocks.clone(),
            params: self.params.iter().map(|p| U::of(p.as_f64())).collect(),
        }
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn conv_weight_block(&self, layer: usize) -> Block {
        self.blocks[2 * layer]
    }

    pub fn head_blocks(&self) -> (Block, Block) {
        let n = self.spec.convs.len();
        (self.blocks[2 * n], self.blocks[2 * n + 1])
    }

    pub fn param_norm(&self) -> f64 {
        self.params.iter().map(|p| p.as_f64().powi(2)).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Deep copies of the conv weights, named `conv1`, `conv2`, ...
    pub fn conv_snapshot(&self) -> Vec<SnapshotLayer> {
        self.spec
            .convs
            .iter()
            .enumerate()
            .map(|(l, c)| SnapshotLayer {
                name: format!("conv{}", l + 1),
                dims: [c.kernel, c.kernel, c.in_channels, c.out_channels],
                data: self.params[self.blocks[2 * l].range()].iter().map(|p| p.as_f64() as f32).collect(),
            })
            .collect()
    }

    /// Logits `(batch x classes)` for inputs laid out `(C, B, H, W)`.
    pub fn logits(&self, x: &[T], batch: usize) -> Vec<T> {
        let (feat, _) = self.features(x, batch, false);
        self.head(&feat, batch)
    }

    /// Mean cross-entropy without gradients.
    pub fn loss(&self, x: &[T], labels: &[usize]) -> BatchStats {
        let logits = self.logits(x, labels.len());
        softmax_cross_entropy(&logits, labels, self.spec.classes).0
    }

    pub fn predict(&self, x: &[T], batch: usize) -> Vec<usize> {
        let logits = self.logits(x, batch);
        logits.chunks(self.spec.classes).map(argmax).collect()
    }

    /// Mean cross-entropy loss; writes its gradient into `grad` (overwritten).
    pub fn loss_and_grad(&self, x: &[T], labels: &[usize], grad: &mut [T]) -> BatchStats {
        let batch = labels.len();
        let classes = self.spec.classes;
        let fdim = self.spec.feature_dim();
        assert_eq!(grad.len(), self.params.len());
        grad.iter_mut().for_each(|g| *g = T::zero());

        let (feat, caches) = self.features(x, batch, true);
        let logits = self.head(&feat, batch);
        let (stats, dlogits) = softmax_cross_entropy(&logits, labels, classes);

        // head
        let (hw, hb) = self.head_blocks();
        let w = &self.params[hw.range()];
        let mut dfeat = vec![T::zero(); fdim * batch];
        {
            let (before, rest) = grad.split_at_mut(hb.offset);
            let gw = &mut before[hw.range()];
            let gb = &mut rest[..hb.len];
            for b in 0..batch {
                for c in 0..classes {
                    let d = dlogits[b * classes + c];
                    gb[c] = gb[c] + d;
                    for f in 0..fdim {
                        gw[c * fdim + f] = gw[c * fdim + f] + d * feat[f * batch + b];
                        dfeat[f * batch + b] = dfeat[f * batch + b] + d * w[c * fdim + f];
                    }
                }
            }
        }

        // global average pool
        let last = caches.last().expect("at least one conv");
        let lc = self.spec.convs.last().unwrap();
        let (mut h, mut wd) = (last.h, last.w);
        if lc.pool {
            h /= 2;
            wd /= 2;
        }
        let area = h * wd;
        let scale = T::of(1.0 / area as f64);
        let mut d_act = vec![T::zero(); fdim * batch * area];
        for f in 0..fdim {
            for b in 0..batch {
                let v = dfeat[f * batch + b] * scale;
                let base = (f * batch + b) * area;
                d_act[base..base + area].iter_mut().for_each(|d| *d = v);
            }
        }

        for l in (0..self.spec.convs.len()).rev() {
            let conv = &self.spec.convs[l];
            let cache = &caches[l];
            let cout = conv.out_channels;
            let k = conv.kernel;
            let rows = k * k * conv.in_channels;
            let n = batch * cache.h * cache.w;

            let mut dz = if conv.pool {
                let mut full = vec![T::zero(); cout * n];
                for (i, &src) in cache.pool_idx.iter().enumerate() {
                    full[src as usize] = full[src as usize] + d_act[i];
                }
                full
            } else {
                std::mem::take(&mut d_act)
            };
            for (d, &o) in dz.iter_mut().zip(&cache.out) {
                if o <= T::zero() {
                    *d = T::zero();
                }
            }

            let wb = self.blocks[2 * l];
            let bb = self.blocks[2 * l + 1];
            // dK (rows x cout) = cols (rows x n) * dz^T
            T::gemm_raw(rows, n, cout, &cache.cols, n, 1, &dz, 1, n, T::zero(), &mut grad[wb.range()], cout, 1);
            for c in 0..cout {
                grad[bb.offset + c] = dz[c * n..(c + 1) * n].iter().copied().sum();
            }
            if l > 0 {
                // dcols (rows x n) = K (rows x cout) * dz (cout x n)
                let mut dcols = vec![T::zero(); rows * n];
                T::gemm_raw(rows, cout, n, &self.params[wb.range()], cout, 1, &dz, n, 1, T::zero(), &mut dcols, n, 1);
                d_act = col2im(&dcols, conv.in_channels, batch, cache.h, cache.w, k);
            }
        }
        stats
    }

    /// ReLU on/off states and max-pool winners for one batch. The loss is
    /// smooth between parameter points that share a pattern.
    pub fn activation_pattern(&self, x: &[T], batch: usize) -> Vec<u32> {
        let (_, caches) = self.features(x, batch, true);
        let mut p = Vec::new();
        for c in &caches {
            p.extend(c.out.iter().map(|&o| u32::from(o > T::zero())));
            p.extend_from_slice(&c.pool_idx);
        }
        p
    }

    /// Pooled features `(features x batch)` and, when training, per-layer caches.
    fn features(&self, x: &[T], batch: usize, keep: bool) -> (Vec<T>, Vec<LayerCache<T>>) {
        let s = &self.spec;
        assert_eq!(x.len(), s.input_channels * batch * s.height * s.width, "input size");
        let (mut h, mut w) = (s.height, s.width);
        let mut caches = Vec::new();
        let mut act = x.to_vec();
        for (l, conv) in s.convs.iter().enumerate() {
            let n = batch * h * w;
            let rows = conv.kernel * conv.kernel * conv.in_channels;
            let cols = im2col(&act, conv.in_channels, batch, h, w, conv.kernel);
            let cout = conv.out_channels;
            let mut out = vec![T::zero(); cout * n];
            let kw = &self.params[self.blocks[2 * l].range()];
            // z (cout x n) = K^T (cout x rows) * cols (rows x n)
            T::gemm_raw(cout, rows, n, kw, 1, cout, &cols, n, 1, T::zero(), &mut out, n, 1);
            let bias = &self.params[self.blocks[2 * l + 1].range()];
            for c in 0..cout {
                let b = bias[c];
                for v in &mut out[c * n..(c + 1) * n] {
                    let z = *v + b;
                    *v = if z > T::zero() { z } else { T::zero() };
                }
            }
            let (next, pool_idx) = if conv.pool {
                max_pool2(&out, cout, batch, h, w)
            } else if keep {
                (out.clone(), Vec::new())
            } else {
                (std::mem::take(&mut out), Vec::new())
            };
            if keep {
                caches.push(LayerCache {
                    h,
                    w,
                    cols,
                    out,
                    pool_idx,
                });
            }
            if conv.pool {
                h /= 2;
                w /= 2;
            }
            act = next;
        }
        let area = h * w;
        let inv = T::of(1.0 / area as f64);
        let feat = act.chunks(area).map(|c| c.iter().copied().sum::<T>() * inv).collect();
        (feat, caches)
    }

    /// Logits `(batch x classes)` from features `(features x batch)`.
    fn head(&self, feat: &[T], batch: usize) -> Vec<T> {
        let classes = self.spec.classes;
        let fdim = self.spec.feature_dim();
        let (hw, hb) = self.head_blocks();
        let w = &self.params[hw.range()];
        let bias = &self.params[hb.range()];
        let mut out = vec![T::zero(); batch * classes];
        for b in 0..batch {
            for c in 0..classes {
                let mut acc = bias[c];
                for f in 0..fdim {
                    acc = acc + w[c * fdim + f] * feat[f * batch + b];
                }
                out[b * classes + c] = acc;
            }
        }
        out
    }
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
fn softmax_cross_entropy<T: Scalar>(logits: &[T], labels: &[usize], classes: usize) -> (BatchStats, Vec<T>) {
    let batch = labels.len();
    let inv_b = T::of(1.0 / batch as f64);
    let mut grad = vec![T::zero(); logits.len()];
    let mut loss = 0.0;
    let mut correct = 0;
    for (b, &y) in labels.iter().enumerate() {
        let row = &logits[b * classes..(b + 1) * classes];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let z: T = exps.iter().copied().sum();
        loss += (z.ln() + max - row[y]).as_f64();
        if argmax(row) == y {
            correct += 1;
        }
        for c in 0..classes {
            let p = exps[c] / z;
            let t = if c == y { T::one() } else { T::zero() };
            grad[b * classes + c] = (p - t) * inv_b;
        }
    }
    (
        BatchStats {
            loss: loss / batch as f64,
            correct,
        },
        grad,
    )
}

/// Patch matrix `(k*k*c) x (b*h*w)` for a same-padded `k x k` convolution.
/// Row `(dy*k + dx)*c + ci` matches the `(kh, kw, in)` weight layout.
fn im2col<T: Scalar>(x: &[T], c: usize, b: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let n = b * h * w;
    let p = (k / 2) as isize;
    let mut cols = vec![T::zero(); k * k * c * n];
    for dy in 0..k {
        for dx in 0..k {
            let ox = dx as isize - p;
            let x_lo = (-ox).max(0) as usize;
            let x_hi = (w as isize - ox).min(w as isize).max(0) as usize;
            for ci in 0..c {
                let row = ((dy * k + dx) * c + ci) * n;
                for bi in 0..b {
                    for y in 0..h {
                        let sy = y as isize + dy as isize - p;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let src = ((ci * b + bi) * h + sy as usize) * w;
                        let dst = row + (bi * h + y) * w;
                        for xx in x_lo..x_hi {
                            cols[dst + xx] = x[src + (xx as isize + ox) as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the input map.
fn col2im<T: Scalar>(cols: &[T], c: usize, b: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let n = b * h * w;
    let p = (k / 2) as isize;
    let mut x = vec![T::zero(); c * n];
    for dy in 0..k {
        for dx in 0..k {
            let ox = dx as isize - p;
            let x_lo = (-ox).max(0) as usize;
            let x_hi = (w as isize - ox).min(w as isize).max(0) as usize;
            for ci in 0..c {
                let row = ((dy * k + dx) * c + ci) * n;
                for bi in 0..b {
                    for y in 0..h {
                        let sy = y as isize + dy as isize - p;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let dst = ((ci * b + bi) * h + sy as usize) * w;
                        let src = row + (bi * h + y) * w;
                        for xx in x_lo..x_hi {
                            let t = dst + (xx as isize + ox) as usize;
                            x[t] = x[t] + cols[src + xx];
                        }
                    }
                }
            }
        }
    }
    x
}

/// 2x2 stride-2 max pool; also returns the flat source index of each maximum.
fn max_pool2<T: Scalar>(x: &[T], c: usize, b: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * b * oh * ow);
    let mut idx = Vec::with_capacity(c * b * oh * ow);
    for plane in 0..c * b {
        let base = plane * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let mut best = base + 2 * y * w + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * y + dy) * w + 2 * xx + dx;
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
