//! Dense row-major `f64` matrices and a reverse-mode tape over them.
//!
//! The forward kernels live on [`Tensor`] so that code evaluating a model
//! without a tape (frozen scoring) performs exactly the same floating-point
//! operations, in the same order, as the recorded forward pass. All
//! reductions run row-major, left to right.

mod gradcheck;
mod tape;

pub use gradcheck::grad_check;
pub use tape::{Gradients, Tape, VarId, BCE_CLAMP};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting length mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "tensor of shape ({rows}, {cols}) needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(1, 1, vec![value])
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Appends a row in place; used when a property table grows.
    pub(crate) fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::Shape {
                op: "push_row",
                left: self.shape(),
                right: (1, row.len()),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Tensor::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.data[i * self.cols + k] * other.data[k * other.cols + j];
                }
                out.data[i * other.cols + j] = acc;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Adds the `1 × cols` row `bias` to every row.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(Error::Shape {
                op: "add_bias",
                left: self.shape(),
                right: bias.shape(),
            });
        }
        let mut out = self.clone();
        for r in 0..self.rows {
            for (v, b) in out.row_mut(r).iter_mut().zip(&bias.data) {
                *v += *b;
            }
        }
        Ok(out)
    }

    pub fn relu(&self) -> Tensor {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    /// Joins `self` and `other` row by row: output row `i` is `[self_i ; other_i]`.
    pub fn concat_rows(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows != other.rows {
            return Err(Error::Shape {
                op: "concat_rows",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Tensor {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Gathers the listed rows, in order, into a new tensor.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::OutOfRange {
                    kind: "row",
                    id: i,
                    count: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Tensor {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of a column of predictions.
///
/// Predictions must lie in `[0, 1]`; they are clamped to
/// `[BCE_CLAMP, 1 - BCE_CLAMP]` before the logarithm.
pub fn bce(predictions: &Tensor, labels: &[bool]) -> Result<f64> {
    if predictions.cols() != 1 || predictions.rows() != labels.len() || labels.is_empty() {
        return Err(Error::Shape {
            op: "bce_loss",
            left: predictions.shape(),
            right: (labels.len(), 1),
        });
    }
    let mut acc = 0.0;
    for (&p, &y) in predictions.as_slice().iter().zip(labels) {
        if p.is_nan() {
            return Err(Error::NonFinite("bce prediction is NaN".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("bce prediction {p} outside [0, 1]")));
        }
        let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        acc -= if y { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(acc / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_basic_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        let t = Tensor::from_rows(&[&[-2.0, 3.0]]).unwrap();
        assert_eq!(t.relu().as_slice(), &[0.0, 3.0]);
        let p = Tensor::scalar(0.5).unwrap();
        assert!((bce(&p, &[true]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn matmul_and_transpose() {
        let a = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[&[5.0], &[6.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().as_slice(), &[17.0, 39.0]);
        assert_eq!(a.transpose().as_slice(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 3);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
        assert!(matches!(
            a.add_bias(&Tensor::zeros(1, 2)),
            Err(Error::Shape { op: "add_bias", .. })
        ));
        assert!(a.concat_rows(&Tensor::zeros(3, 1)).is_err());
        assert!(a.select_rows(&[2]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Tensor::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Tensor::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn bce_domain() {
        let p = Tensor::scalar(1.0).unwrap();
        // saturated prediction is clamped, not rejected
        assert!(bce(&p, &[false]).unwrap() > 27.0);
        let bad = Tensor {
            rows: 1,
            cols: 1,
            data: vec![1.5],
        };
        assert!(matches!(bce(&bad, &[true]), Err(Error::Domain(_))));
    }

    #[test]
    fn concat_and_select() {
        let a = Tensor::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let b = Tensor::from_rows(&[&[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        let c = a.concat_rows(&b).unwrap();
        assert_eq!(c.shape(), (2, 3));
        assert_eq!(c.row(1), &[2.0, 5.0, 6.0]);
        assert_eq!(c.select_rows(&[1, 1, 0]).unwrap().col0(), vec![2.0, 2.0, 1.0]);
    }

    impl Tensor {
        fn col0(&self) -> Vec<f64> {
            (0..self.rows).map(|r| self.get(r, 0)).collect()
        }
    }
}
