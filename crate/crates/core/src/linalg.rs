//! Dense complex matrix helpers.
//!
//! Covariances, channel matrices and PSN matrices are all plain
//! `nalgebra` matrices over `Complex64`; this module adds the Hermitian-aware
//! pieces the rest of the crate leans on (sorted eigendecomposition, checks,
//! log-determinants).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{HimapError, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace_re(m: &ComplexMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// `||M - M^H||_F / ||M||_F` (0 for the zero matrix).
pub fn hermitian_asymmetry(m: &ComplexMatrix) -> f64 {
    let norm = frobenius(m);
    if norm == 0.0 {
        return 0.0;
    }
    frobenius(&(m - m.adjoint())) / norm
}

pub fn ensure_square(m: &ComplexMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(HimapError::Dimension(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m.nrows())
}

pub fn ensure_hermitian(m: &ComplexMatrix) -> Result<()> {
    ensure_square(m, "Hermitian matrix")?;
    let asym = hermitian_asymmetry(m);
    if asym > HERMITIAN_TOL || !asym.is_finite() {
        return Err(HimapError::NotHermitian(asym));
    }
    Ok(())
}

/// `(M + M^H) / 2`, used to scrub round-off before eigendecompositions.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix with a reproducible layout.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors as columns, matched to `values`.
    pub vectors: ComplexMatrix,
}

/// Eigenvalues sorted in descending order; each eigenvector is rotated so its
/// first non-negligible component is real and positive.
pub fn eigh(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let n = ensure_square(m, "eigendecomposition input")?;
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let pivot = col.iter().find(|z| z.norm() > 1e-12).copied().unwrap_or(Complex64::new(1.0, 0.0));
        let rot = pivot.conj() / pivot.norm();
        for i in 0..n {
            vectors[(i, dst)] = col[i] * rot;
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn eigvalsh(m: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m, "inverse input")?;
    m.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| HimapError::Singular(format!("{}x{} inverse failed", m.nrows(), m.ncols())))
}

/// Solves `A x = b` for Hermitian positive definite `A` via Cholesky.
pub fn solve_hpd(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    let chol = a.clone().cholesky().ok_or_else(|| HimapError::Singular("Cholesky factorization failed".into()))?;
    Ok(chol.solve(b))
}

/// `ln |det M|` for a square matrix via LU.
pub fn log_abs_det(m: &ComplexMatrix) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].norm().ln()).sum()
}

/// Quadratic form `x^H A y`.
pub fn quad(x: &ComplexVector, a: &ComplexMatrix, y: &ComplexVector) -> Complex64 {
    x.dotc(&(a * y))
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Outer product `x x^H`.
pub fn outer(x: &ComplexVector) -> ComplexMatrix {
    x * x.adjoint()
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_is_sorted_and_reconstructs() {
        let m = ComplexMatrix::from_row_slice(
            3,
            3,
            &[
                c(4.0, 0.0),
                c(1.0, 1.0),
                c(0.0, -0.5),
                c(1.0, -1.0),
                c(3.0, 0.0),
                c(0.2, 0.0),
                c(0.0, 0.5),
                c(0.2, 0.0),
                c(1.0, 0.0),
            ],
        );
        let e = eigh(&m).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let d = ComplexMatrix::from_diagonal(&DVector::from_iterator(3, e.values.iter().map(|&v| c(v, 0.0))));
        let rec = &e.vectors * d * e.vectors.adjoint();
        assert!(frobenius(&(rec - &m)) < 1e-12 * frobenius(&m));
        for j in 0..3 {
            let first = e.vectors[(0, j)];
            assert!(first.im.abs() < 1e-14 && first.re > 0.0);
        }
    }

    #[test]
    fn hermitian_check_rejects_asymmetric() {
        let mut m = identity(2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(ensure_hermitian(&m), Err(HimapError::NotHermitian(_))));
        assert!(ensure_hermitian(&identity(3)).is_ok());
    }
}
