//! Dense row-major `f64` matrices.
//!
//! Batches of states are stored one sample per row, so a linear layer with
//! weight `W` (out x in) maps a batch `X` (n x in) to `X * W^T` (n x out).

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Column vector. Plain `Vec<f64>` keeps interop with the rest of the
/// ecosystem simple; matrix-valued state lives in [`Matrix`].
pub type Vector = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if rows == 0 || cols == 0 {
            return Err(NumericsError::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(NumericsError::ShapeMismatch {
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        if let Some(idx) = data.iter().position(|x| !x.is_finite()) {
            return Err(NumericsError::NonFiniteEntry { row: idx / cols, col: idx % cols });
        }
        Ok(Self { rows, cols, data })
    }

    /// Same as [`Matrix::new`] without the validation. Used on hot paths
    /// where the entries were produced by other matrix operations.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self::from_raw(rows, cols, vec![value; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(NumericsError::ShapeMismatch { expected: (n, m), found: (n, bad.len()) });
        }
        Self::new(n, m, rows.concat())
    }

    /// A single row `1 x n`.
    pub fn row_vector(values: &[f64]) -> Result<Self, NumericsError> {
        Self::new(1, values.len(), values.to_vec())
    }

    /// A single column `n x 1`.
    pub fn column_vector(values: &[f64]) -> Result<Self, NumericsError> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Copies the listed rows into a new matrix, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_raw(indices.len(), self.cols, data)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|x| alpha * x)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + alpha * b).collect();
        Self::from_raw(self.rows, self.cols, data)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn hadamard(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "hadamard shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Self::from_raw(self.rows, self.cols, data)
    }

    /// In-place `self += alpha * other`.
    pub fn add_assign_scaled(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Adds `bias` (length `cols`) to every row.
    pub fn add_row_broadcast(&self, bias: &[f64]) -> Self {
        assert_eq!(bias.len(), self.cols, "bias length mismatch");
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.cols) {
            for (x, b) in row.iter_mut().zip(bias) {
                *x += b;
            }
        }
        out
    }

    /// Column sums as a `1 x cols` row.
    pub fn column_sums(&self) -> Self {
        let mut out = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        Self::from_raw(1, self.cols, out)
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        gemm(self, false, other, false, &mut out);
        out
    }

    /// `self * other^T`.
    pub fn matmul_nt(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "matmul_nt inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.rows);
        gemm(self, false, other, true, &mut out);
        out
    }

    /// `self^T * other`.
    pub fn matmul_tn(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "matmul_tn inner dimension mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        gemm(self, true, other, false, &mut out);
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Vector {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        self.data.chunks(self.cols).map(|row| dot(row, x)).collect()
    }

    /// Transposed matrix-vector product `self^T x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vector {
        assert_eq!(self.rows, x.len(), "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (row, &xi) in self.data.chunks(self.cols).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        out
    }
}

/// `out = op(a) * op(b)` through `matrixmultiply`, with transposition
/// expressed as swapped strides.
fn gemm(a: &Matrix, ta: bool, b: &Matrix, tb: bool, out: &mut Matrix) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let n = if tb { b.rows } else { b.cols };
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    debug_assert_eq!(out.shape(), (m, n));
    // SAFETY: strides and extents describe exactly the owned buffers above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
