//! Dense row-major `f64` matrix and a strided GEMM wrapper.

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor2({}x{})", self.rows, self.cols)
    }
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Contiguous block of rows `start..start + n`.
    pub fn rows_slice(&self, start: usize, n: usize) -> &[f64] {
        &self.data[start * self.cols..(start + n) * self.cols]
    }

    pub fn rows_slice_mut(&mut self, start: usize, n: usize) -> &mut [f64] {
        &mut self.data[start * self.cols..(start + n) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
    }

    /// Sum over rows, giving a `1 x cols` tensor.
    pub fn column_sums(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, v) in out.data.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    pub fn view(&self) -> View<'_> {
        View {
            data: &self.data,
            offset: 0,
            rows: self.rows,
            cols: self.cols,
            rs: self.cols as isize,
            cs: 1,
        }
    }

    /// View of columns `start..start + n`.
    pub fn view_cols(&self, start: usize, n: usize) -> View<'_> {
        assert!(start + n <= self.cols);
        View {
            data: &self.data,
            offset: start,
            rows: self.rows,
            cols: n,
            rs: self.cols as isize,
            cs: 1,
        }
    }

    /// `self = alpha * a * b + beta * self`.
    pub fn gemm(&mut self, alpha: f64, a: View<'_>, b: View<'_>, beta: f64) {
        gemm_into(alpha, a, b, beta, &mut self.data, 0, self.rows, self.cols, self.cols);
    }

    /// `a * b` into a fresh tensor.
    pub fn matmul(a: View<'_>, b: View<'_>) -> Tensor2 {
        let mut out = Tensor2::zeros(a.rows, b.cols);
        out.gemm(1.0, a, b, 0.0);
        out
    }
}

/// Strided read-only matrix view; `t()` transposes without copying.
#[derive(Clone, Copy)]
pub struct View<'a> {
    data: &'a [f64],
    offset: usize,
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    /// View over a raw row-major slice.
    pub fn from_slice(data: &'a [f64], rows: usize, cols: usize) -> Self {
        assert!(data.len() >= rows * cols);
        View {
            data,
            offset: 0,
            rows,
            cols,
            rs: cols as isize,
            cs: 1,
        }
    }

    pub fn t(self) -> Self {
        View {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
            ..self
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn max_index(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return self.offset;
        }
        self.offset
            + (self.rows - 1) * self.rs as usize
            + (self.cols - 1) * self.cs as usize
    }
}

/// GEMM into a row-major block of `out` starting at `offset` with row stride `ld`.
#[allow(clippy::too_many_arguments)]
pub fn gemm_into(
    alpha: f64,
    a: View<'_>,
    b: View<'_>,
    beta: f64,
    out: &mut [f64],
    offset: usize,
    rows: usize,
    cols: usize,
    ld: usize,
) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension mismatch");
    assert_eq!(a.rows, rows, "gemm row mismatch");
    assert_eq!(b.cols, cols, "gemm column mismatch");
    if rows == 0 || cols == 0 {
        return;
    }
    assert!(offset + (rows - 1) * ld + cols <= out.len());
    if a.cols == 0 {
        for r in 0..rows {
            for v in &mut out[offset + r * ld..offset + r * ld + cols] {
                *v *= beta;
            }
        }
        return;
    }
    assert!(a.max_index() < a.data.len() && b.max_index() < b.data.len());
    // SAFETY: every index touched is bounds-checked above against the backing
    // slices; `out` does not alias `a` or `b` (exclusive borrow).
    unsafe {
        matrixmultiply::dgemm(
            rows,
            a.cols,
            cols,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.rs,
            a.cs,
            b.data.as_ptr().add(b.offset),
            b.rs,
            b.cs,
            beta,
            out.as_mut_ptr().add(offset),
            ld as isize,
            1,
        );
    }
}
