//! Symmetric-matrix helpers shared by the filter and smoother.
//!
//! Covariances are re-symmetrized after every product, and every inversion
//! goes through an eigendecomposition whose eigenvalues are floored at
//! EIG_FLOOR_REL times the trace. Solves are performed with the factors,
//! never with an explicitly formed inverse.

use crate::{Error, Result};
use alloc::format;
use nalgebra::{DMatrix, DVector};

/// Relative eigenvalue floor applied before any inversion.
pub const EIG_FLOOR_REL: f64 = 1e-12;

/// Replaces `a` with (a + a')/2.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let at = a.transpose();
    *a += at;
    *a *= 0.5;
}

/// Returns (a + a')/2 without mutating the input.
pub fn symmetrized(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = a.clone();
    symmetrize(&mut s);
    s
}

/// Eigendecomposition of a symmetric matrix with the eigenvalue floor
/// applied; used for solves and for PSD repair.
pub struct FlooredEigen {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl FlooredEigen {
    /// Decomposes `a` (assumed symmetric) and floors eigenvalues at
    /// EIG_FLOOR_REL · max(trace, tiny).
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite entry in {}x{} symmetric matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let eig = symmetrized(a).symmetric_eigen();
        let floor = EIG_FLOOR_REL * eig.eigenvalues.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let values = eig.eigenvalues.map(|v| v.max(floor));
        Ok(FlooredEigen {
            vectors: eig.eigenvectors,
            values,
        })
    }

    /// Solves A x = b with the floored factors.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.vectors.transpose() * b;
        for (c, v) in coeffs.iter_mut().zip(self.values.iter()) {
            *c /= *v;
        }
        &self.vectors * coeffs
    }

    /// Solves A X = B with the floored factors.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coeffs = self.vectors.transpose() * b;
        for i in 0..coeffs.nrows() {
            let v = self.values[i];
            for j in 0..coeffs.ncols() {
                coeffs[(i, j)] /= v;
            }
        }
        &self.vectors * coeffs
    }

    /// Reconstructs the floored matrix V diag(λ) V'.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.values[j];
        }
        symmetrized(&(scaled * self.vectors.transpose()))
    }

    /// Smallest floored eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        self.values.min()
    }
}

/// Checks the GaussianMoments covariance invariants: symmetry within 1e-12
/// (relative to the largest entry) and smallest eigenvalue ≥ -1e-10 · trace.
pub fn check_covariance(cov: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if cov.nrows() != cov.ncols() {
        return Err(Error::Config(format!(
            "{what}: covariance must be square, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let scale = cov.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    for i in 0..cov.nrows() {
        for j in (i + 1)..cov.ncols() {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Numerical(format!(
                    "{what}: covariance asymmetric at ({i},{j})"
                )));
            }
        }
    }
    let eig = symmetrized(cov).symmetric_eigen();
    let trace: f64 = cov.diagonal().iter().sum();
    let min = eig.eigenvalues.min();
    if min < -1e-10 * trace.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "{what}: covariance has negative eigenvalue {min:e}"
        )));
    }
    Ok(())
}
