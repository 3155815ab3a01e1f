//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use thiserror::Error;

use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Sweep cap; Jacobi converges quadratically, so well-conditioned inputs
/// finish in well under ten sweeps.
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum EigError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {delta:e} exceeds tolerance")]
    NotSymmetric { i: usize, j: usize, delta: f64 },
    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
}

/// Eigenvalues in descending order with eigenvector columns aligned.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<S> {
    pub eigenvalues: Vec<S>,
    pub eigenvectors: DenseMatrix<S>,
}

impl<S: Scalar> EigenDecomposition<S> {
    /// Reconstructs `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix<S> {
        let n = self.eigenvalues.len();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = S::zero();
                for (k, &lambda) in self.eigenvalues.iter().enumerate() {
                    acc += lambda * self.eigenvectors.get(i, k) * self.eigenvectors.get(j, k);
                }
                out.set(i, j, acc);
            }
        }
        out
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Input must be square and symmetric within `1e-10` relative to its largest
/// entry; the decomposition satisfies `‖M − VΛVᵀ‖_F ≤ 1e-8 ‖M‖_F` and the
/// eigenvector columns are orthonormal to the same order.
pub fn sym_eig<S: Scalar>(m: &DenseMatrix<S>) -> Result<EigenDecomposition<S>, EigError> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(EigError::NotSquare { rows, cols });
    }
    let n = rows;
    let scale = m.max_abs().max(S::min_positive_value());
    let sym_tol = S::of(1e-10) * scale;
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = (m.get(i, j) - m.get(j, i)).abs();
            if delta > sym_tol {
                return Err(EigError::NotSymmetric {
                    i,
                    j,
                    delta: delta.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }

    // Work on a symmetrized copy so the 1e-10 slack cannot bias one triangle.
    let mut a = DenseMatrix::<S>::zeros(n, n);
    let half = S::of(0.5);
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, (m.get(i, j) + m.get(j, i)) * half);
        }
    }
    let mut v = DenseMatrix::<S>::identity(n);
    let mut d: Vec<S> = (0..n).map(|i| a.get(i, i)).collect();
    let mut b = d.clone();
    let mut z = vec![S::zero(); n];

    let off_tol = S::epsilon() * scale * S::of(n as f64);
    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        let mut sm = S::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                sm += a.get(p, q).abs();
            }
        }
        if sm <= off_tol {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 {
            S::of(0.2) * sm / S::of((n * n) as f64)
        } else {
            S::zero()
        };
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let g = S::of(100.0) * apq.abs();
                // Skip rotations that can no longer change the diagonal.
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a.set(p, q, S::zero());
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = half * h / apq;
                    let mut t = S::one() / (theta.abs() + (S::one() + theta * theta).sqrt());
                    if theta < S::zero() {
                        t = -t;
                    }
                    t
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = t * c;
                let tau = s / (S::one() + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                a.set(p, q, S::zero());
                let rotate = |a: &mut DenseMatrix<S>, i: usize, j: usize, k: usize, l: usize| {
                    let g = a.get(i, j);
                    let h = a.get(k, l);
                    a.set(i, j, g - s * (h + g * tau));
                    a.set(k, l, h + s * (g - h * tau));
                };
                for j in 0..p {
                    rotate(&mut a, j, p, j, q);
                }
                for j in (p + 1)..q {
                    rotate(&mut a, p, j, j, q);
                }
                for j in (q + 1)..n {
                    rotate(&mut a, p, j, q, j);
                }
                for j in 0..n {
                    rotate(&mut v, j, p, j, q);
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = S::zero();
        }
    }
    if !converged {
        return Err(EigError::NoConvergence(MAX_SWEEPS));
    }

    // Sort eigenpairs descending by eigenvalue.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).expect("finite eigenvalues"));
    let eigenvalues: Vec<S> = order.iter().map(|&i| d[i]).collect();
    let mut eigenvectors = DenseMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors.set(row, new_col, v.get(row, old_col));
        }
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}
