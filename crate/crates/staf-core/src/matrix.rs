//! Dense row-major matrices, products, and the Kronecker product.
//!
//! The multiply entry points route `f32`/`f64` through `matrixmultiply`'s
//! packed GEMM kernels, whose accumulation order is a fixed function of the
//! operand shapes, so repeated calls on the same host are bit-identical.
//! [`matmul_reference`] keeps the plain fixed-loop-order kernel around as an
//! independent route for cross-checking.

use std::any::TypeId;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("shape mismatch: left is {lr}x{lc}, right is {rr}x{rc}")]
    ShapeMismatch { lr: usize, lc: usize, rr: usize, rc: usize },
    #[error("data length {got} does not match {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, got: usize },
    #[error("result dimensions {rows}x{cols} exceed capacity")]
    Capacity { rows: usize, cols: usize },
}

/// Dense row-major matrix over a floating-point scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, S::one());
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::BadLength { rows, cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from nested rows; panics on ragged input (test convenience).
    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
    }

    pub fn column_vector(data: Vec<S>) -> Self {
        let rows = data.len();
        Self { rows, cols: 1, data }
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, s: S) -> Self {
        self.map(|v| v * s)
    }

    /// Element-wise `self += other * s`; shapes must match.
    pub fn add_assign_scaled(&mut self, other: &Self, s: S) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in add_assign_scaled");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn frobenius_norm(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out = a * b` through the packed GEMM kernel when the scalar is f32/f64.
fn gemm<S: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[S],
    rsa: isize,
    csa: isize,
    b: &[S],
    rsb: isize,
    csb: isize,
    out: &mut [S],
) {
    debug_assert_eq!(out.len(), m * n);
    let id = TypeId::of::<S>();
    if id == TypeId::of::<f64>() {
        // Safety: S == f64, checked above; slices have the documented extents.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr() as *const f64,
                rsa,
                csa,
                b.as_ptr() as *const f64,
                rsb,
                csb,
                0.0,
                out.as_mut_ptr() as *mut f64,
                n as isize,
                1,
            );
        }
    } else if id == TypeId::of::<f32>() {
        // Safety: S == f32, checked above.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr() as *const f32,
                rsa,
                csa,
                b.as_ptr() as *const f32,
                rsb,
                csb,
                0.0,
                out.as_mut_ptr() as *mut f32,
                n as isize,
                1,
            );
        }
    } else {
        // Fixed i-k-j loop order for any other scalar.
        let at = |i: usize, kk: usize| a[(i as isize * rsa + kk as isize * csa) as usize];
        let bt = |kk: usize, j: usize| b[(kk as isize * rsb + j as isize * csb) as usize];
        for v in out.iter_mut() {
            *v = S::zero();
        }
        for i in 0..m {
            for kk in 0..k {
                let aik = at(i, kk);
                for j in 0..n {
                    out[i * n + j] += aik * bt(kk, j);
                }
            }
        }
    }
}

/// Standard matrix product `a * b`.
pub fn matmul<S: Scalar>(a: &DenseMatrix<S>, b: &DenseMatrix<S>) -> Result<DenseMatrix<S>, MatrixError> {
    if a.cols != b.rows {
        return Err(MatrixError::ShapeMismatch { lr: a.rows, lc: a.cols, rr: b.rows, rc: b.cols });
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    gemm(a.rows, a.cols, b.cols, &a.data, a.cols as isize, 1, &b.data, b.cols as isize, 1, &mut out.data);
    Ok(out)
}

/// `a * b^T` without materializing the transpose.
pub fn matmul_nt<S: Scalar>(a: &DenseMatrix<S>, b: &DenseMatrix<S>) -> Result<DenseMatrix<S>, MatrixError> {
    if a.cols != b.cols {
        return Err(MatrixError::ShapeMismatch { lr: a.rows, lc: a.cols, rr: b.cols, rc: b.rows });
    }
    let mut out = DenseMatrix::zeros(a.rows, b.rows);
    gemm(a.rows, a.cols, b.rows, &a.data, a.cols as isize, 1, &b.data, 1, b.cols as isize, &mut out.data);
    Ok(out)
}

/// `a^T * b` without materializing the transpose.
pub fn matmul_tn<S: Scalar>(a: &DenseMatrix<S>, b: &DenseMatrix<S>) -> Result<DenseMatrix<S>, MatrixError> {
    if a.rows != b.rows {
        return Err(MatrixError::ShapeMismatch { lr: a.cols, lc: a.rows, rr: b.rows, rc: b.cols });
    }
    let mut out = DenseMatrix::zeros(a.cols, b.cols);
    gemm(a.cols, a.rows, b.cols, &a.data, 1, a.cols as isize, &b.data, b.cols as isize, 1, &mut out.data);
    Ok(out)
}

/// Reference product with the literal fixed i-k-j loop order.
///
/// Kept as an independent route: the fast path is cross-checked against it.
pub fn matmul_reference<S: Scalar>(
    a: &DenseMatrix<S>,
    b: &DenseMatrix<S>,
) -> Result<DenseMatrix<S>, MatrixError> {
    if a.cols != b.rows {
        return Err(MatrixError::ShapeMismatch { lr: a.rows, lc: a.cols, rr: b.rows, rc: b.cols });
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            let brow = b.row(k);
            let orow = out.row_mut(i);
            for j in 0..b.cols {
                orow[j] += aik * brow[j];
            }
        }
    }
    Ok(out)
}

/// Matrix-vector product `a * x`.
pub fn matvec<S: Scalar>(a: &DenseMatrix<S>, x: &[S]) -> Result<Vec<S>, MatrixError> {
    if a.cols != x.len() {
        return Err(MatrixError::ShapeMismatch { lr: a.rows, lc: a.cols, rr: x.len(), rc: 1 });
    }
    let mut out = vec![S::zero(); a.rows];
    for i in 0..a.rows {
        let row = a.row(i);
        let mut acc = S::zero();
        for j in 0..a.cols {
            acc += row[j] * x[j];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// Kronecker product `a ⊗ b`.
///
/// Entry law: `(a ⊗ b)[(i-1)*br + p, (j-1)*bc + q] = a[i,j] * b[p,q]`
/// in 1-based indices, equivalently ceiling/modulo extraction of the
/// factor indices from the product index.
pub fn kron<S: Scalar>(a: &DenseMatrix<S>, b: &DenseMatrix<S>) -> Result<DenseMatrix<S>, MatrixError> {
    let rows = a
        .rows
        .checked_mul(b.rows)
        .filter(|&r| r <= i32::MAX as usize)
        .ok_or(MatrixError::Capacity { rows: a.rows, cols: b.rows })?;
    let cols = a
        .cols
        .checked_mul(b.cols)
        .filter(|&c| c <= i32::MAX as usize)
        .ok_or(MatrixError::Capacity { rows: a.cols, cols: b.cols })?;
    rows.checked_mul(cols).ok_or(MatrixError::Capacity { rows, cols })?;
    let mut out = DenseMatrix::zeros(rows, cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let aij = a.get(ia, ja);
            for ib in 0..b.rows {
                let orow = out.row_mut(ia * b.rows + ib);
                let brow = b.row(ib);
                for jb in 0..b.cols {
                    orow[ja * b.cols + jb] = aij * brow[jb];
                }
            }
        }
    }
    Ok(out)
}
