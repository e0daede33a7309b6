//! Four-dimensional convolution weights and their mode-3 / mode-4 unfoldings.
//!
//! A weight tensor has dimensions `(N1, N2, N3, N4)` = (kernel height, kernel
//! width, input channels, output channels) and is stored row-major. Unfolding
//! along mode 3 or 4 produces a matrix whose row `i` is the slice with that
//! dimension fixed to `i`, flattened over the remaining dimensions in
//! ascending order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Input = 3,
    Output = 4,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Input, Mode::Output];

    pub fn from_index(mode: usize) -> Result<Self> {
        match mode {
            3 => Ok(Mode::Input),
            4 => Ok(Mode::Output),
            other => Err(Error::Domain(format!(
                "unfolding mode must be 3 or 4, got {other}"
            ))),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn axis(self) -> usize {
        self.index() - 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTensor4D {
    name: String,
    dims: [usize; 4],
    data: Vec<f64>,
}

impl WeightTensor4D {
    pub fn new(name: impl Into<String>, dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if dims.contains(&0) {
            return Err(Error::Validation(format!(
                "tensor {name}: all dims must be >= 1, got {dims:?}"
            )));
        }
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::Validation(format!(
                "tensor {name}: dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "tensor {name}: non-finite value at flat index {pos}"
            )));
        }
        Ok(Self { name, dims, data })
    }

    /// Promotes 32-bit training weights to the 64-bit analysis representation.
    pub fn from_f32(name: impl Into<String>, dims: [usize; 4], data: &[f32]) -> Result<Self> {
        Self::new(name, dims, data.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn strides(&self) -> [usize; 4] {
        let [_, n2, n3, n4] = self.dims;
        [n2 * n3 * n4, n3 * n4, n4, 1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnfoldedMatrix {
    mode: Mode,
    matrix: DMatrix<f64>,
}

impl UnfoldedMatrix {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[(row, col)]
    }
}

/// Column-index layout of the three non-unfolded axes, outermost first.
fn remaining_axes(mode: Mode) -> [usize; 3] {
    let mut out = [0; 3];
    let mut k = 0;
    for axis in 0..4 {
        if axis != mode.axis() {
            out[k] = axis;
            k += 1;
        }
    }
    out
}

pub fn unfold(tensor: &WeightTensor4D, mode: Mode) -> UnfoldedMatrix {
    let dims = tensor.dims;
    let strides = tensor.strides();
    let axis = mode.axis();
    let rows = dims[axis];
    let cols = tensor.len() / rows;
    let [a, b, c] = remaining_axes(mode);
    let mut matrix = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let base = r * strides[axis];
        let mut col = 0;
        for i in 0..dims[a] {
            for j in 0..dims[b] {
                for k in 0..dims[c] {
                    let flat = base + i * strides[a] + j * strides[b] + k * strides[c];
                    matrix[(r, col)] = tensor.data[flat];
                    col += 1;
                }
            }
        }
    }
    UnfoldedMatrix { mode, matrix }
}

/// Checked variant of [`unfold`] taking the raw mode index.
pub fn unfold_mode(tensor: &WeightTensor4D, mode: usize) -> Result<UnfoldedMatrix> {
    Ok(unfold(tensor, Mode::from_index(mode)?))
}

pub fn refold(
    unfolded: &UnfoldedMatrix,
    name: impl Into<String>,
    dims: [usize; 4],
) -> Result<WeightTensor4D> {
    let mode = unfolded.mode;
    let axis = mode.axis();
    let total: usize = dims.iter().product();
    if dims.contains(&0)
        || unfolded.rows() != dims[axis]
        || unfolded.rows() * unfolded.cols() != total
    {
        return Err(Error::Validation(format!(
            "cannot refold a {}x{} mode-{} matrix into dims {dims:?}",
            unfolded.rows(),
            unfolded.cols(),
            mode.index()
        )));
    }
    let strides = [dims[1] * dims[2] * dims[3], dims[2] * dims[3], dims[3], 1];
    let [a, b, c] = remaining_axes(mode);
    let mut data = vec![0.0; total];
    for r in 0..dims[axis] {
        let base = r * strides[axis];
        let mut col = 0;
        for i in 0..dims[a] {
            for j in 0..dims[b] {
                for k in 0..dims[c] {
                    data[base + i * strides[a] + j * strides[b] + k * strides[c]] =
                        unfolded.matrix[(r, col)];
                    col += 1;
                }
            }
        }
    }
    WeightTensor4D::new(name, dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> WeightTensor4D {
        WeightTensor4D::new("t", [1, 1, 2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap()
    }

    #[test]
    fn mode3_layout() {
        let m = unfold(&small(), Mode::Input);
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert_eq!(m.matrix().row(0).iter().copied().collect::<Vec<_>>(), [1., 2., 3.]);
        assert_eq!(m.matrix().row(1).iter().copied().collect::<Vec<_>>(), [4., 5., 6.]);
    }

    #[test]
    fn mode4_is_transpose_for_pointwise_kernels() {
        let m = unfold(&small(), Mode::Output);
        assert_eq!((m.rows(), m.cols()), (3, 2));
        assert_eq!(m.matrix(), &unfold(&small(), Mode::Input).matrix().transpose());
    }

    #[test]
    fn refold_matrix_into_tensor() {
        let m = unfold(&small(), Mode::Input);
        let t = refold(&m, "t", [1, 1, 2, 3]).unwrap();
        assert_eq!(t.data(), &[1., 2., 3., 4., 5., 6.]);
    }

    #[test]
    fn rejects_bad_mode_and_data() {
        assert!(matches!(unfold_mode(&small(), 2), Err(Error::Domain(_))));
        assert!(matches!(
            WeightTensor4D::new("x", [1, 1, 1, 2], vec![1.0, f64::NAN]),
            Err(Error::Validation(_))
        ));
        assert!(WeightTensor4D::new("x", [1, 0, 1, 2], vec![]).is_err());
        assert!(WeightTensor4D::new("x", [1, 1, 1, 2], vec![1.0]).is_err());
    }

    #[test]
    fn refold_shape_mismatch() {
        let m = unfold(&small(), Mode::Input);
        assert!(refold(&m, "t", [1, 1, 3, 2]).is_err());
        assert!(refold(&m, "t", [2, 1, 2, 3]).is_err());
    }

    #[test]
    fn random_3x3x8x16_roundtrip_is_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let data: Vec<f64> = (0..3 * 3 * 8 * 16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = WeightTensor4D::new("w", [3, 3, 8, 16], data).unwrap();
        let m = unfold(&t, Mode::Input);
        assert_eq!((m.rows(), m.cols()), (8, 144));
        assert_eq!(refold(&m, "w", t.dims()).unwrap(), t);
    }

    fn tensor_strategy() -> impl Strategy<Value = WeightTensor4D> {
        (1usize..4, 1usize..4, 1usize..6, 1usize..6).prop_flat_map(|(a, b, c, d)| {
            prop::collection::vec(-1e3f64..1e3, a * b * c * d)
                .prop_map(move |data| WeightTensor4D::new("p", [a, b, c, d], data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn unfold_refold_is_identity(t in tensor_strategy(), mode in prop::sample::select(vec![3usize, 4])) {
            let m = unfold_mode(&t, mode).unwrap();
            prop_assert_eq!(m.rows(), t.dims()[mode - 1]);
            prop_assert_eq!(m.rows() * m.cols(), t.len());
            // pure permutation: the sum of squares is taken over the same multiset
            let mut a: Vec<f64> = m.matrix().iter().copied().collect();
            let mut b = t.data().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            prop_assert_eq!(refold(&m, "p", t.dims()).unwrap(), t);
        }
    }
}
