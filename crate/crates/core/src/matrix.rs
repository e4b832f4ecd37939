//! Row-major dense `f64` matrix used for node features and every value on the
//! autodiff tape.
//!
//! Products are plain loops in a fixed order so that the value computed for a
//! row never depends on how many other rows share the call. The role channel
//! relies on this to make its batched and per-subgraph paths bit-identical.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn column(values: Vec<f64>) -> Self {
        let rows = values.len();
        Self::from_vec(rows, 1, values)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Value of a 1x1 matrix.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        // x * 0 is NaN exactly for infinities and NaNs; independent lanes
        // let the sum vectorize.
        let mut lanes = [0.0f64; 8];
        let chunks = self.data.chunks_exact(8);
        let tail = chunks.remainder();
        for c in chunks {
            for (l, &v) in lanes.iter_mut().zip(c) {
                *l += v * 0.0;
            }
        }
        let rest: f64 = tail.iter().map(|&v| v * 0.0).sum();
        (lanes.iter().sum::<f64>() + rest) == 0.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_assign(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        gemm(
            (self.rows, self.cols, rhs.cols),
            (&self.data, self.cols as isize, 1),
            (&rhs.data, rhs.cols as isize, 1),
        )
    }

    /// `self^T * rhs`.
    pub fn t_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "t_matmul shape mismatch");
        gemm(
            (self.cols, self.rows, rhs.cols),
            (&self.data, 1, self.cols as isize),
            (&rhs.data, rhs.cols as isize, 1),
        )
    }

    /// `self * rhs^T`.
    pub fn matmul_t(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.cols, "matmul_t shape mismatch");
        gemm(
            (self.rows, self.cols, rhs.rows),
            (&self.data, self.cols as isize, 1),
            (&rhs.data, 1, rhs.cols as isize),
        )
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// `out = A * B` for an `m x k` A and `k x n` B given as (data, row stride,
// column stride).
fn gemm(
    (m, k, n): (usize, usize, usize),
    (a, rsa, csa): (&[f64], isize, isize),
    (b, rsb, csb): (&[f64], isize, isize),
) -> Matrix {
    if m == 0 || n == 0 || k == 0 {
        return Matrix::zeros(m, n);
    }
    let mut data: Vec<f64> = Vec::with_capacity(m * n);
    // SAFETY: shapes were checked by the callers; the strides describe
    // row-major or transposed views that stay inside each buffer. With
    // beta = 0 dgemm writes every output element without reading it, so the
    // spare capacity is fully initialized before `set_len`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            data.as_mut_ptr(),
            n as isize,
            1,
        );
        data.set_len(m * n);
    }
    Matrix { rows: m, cols: n, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_transpose_route() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![-1.0, 0.5, 3.0]]);
        let b = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.0, -1.0], vec![4.0, 0.25]]);
        let ab = a.matmul(&b);
        assert_eq!(ab, Matrix::from_rows(&[vec![2.0, -1.0], vec![10.0, -0.75]]));
        assert_eq!(a.transpose().t_matmul(&b), ab);
        assert_eq!(a.matmul_t(&b.transpose()), ab);
        assert_eq!(Matrix::zeros(3, 0).matmul(&Matrix::zeros(0, 2)), Matrix::zeros(3, 2));
    }

    #[test]
    fn finiteness_scan_sees_every_position() {
        for len in [1, 7, 8, 9, 17] {
            assert!(Matrix::filled(1, len, -3.5).is_finite());
            for pos in 0..len {
                for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
                    let mut m = Matrix::filled(1, len, 1e300);
                    m.as_mut_slice()[pos] = bad;
                    assert!(!m.is_finite(), "len {len} pos {pos} {bad}");
                }
            }
        }
    }
}
