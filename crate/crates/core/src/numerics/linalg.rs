//! Symmetric-matrix square roots with an explicit PSD clipping policy.

use crate::error::{AmpError, Result};
use nalgebra::{DMatrix, DVector};

/// Which function of the eigenvalues [`sym_sqrt`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymSqrtKind {
    /// The PSD square root: eigenvalues map to sqrt(lambda).
    Root,
    /// The Moore–Penrose pseudo-inverse of the square root: positive
    /// eigenvalues map to 1/sqrt(lambda), kernel eigenvalues to 0.
    PseudoInverseRoot,
}

/// Relative eigenvalue tolerance: eigenvalues within `-EIG_TOL * norm` of
/// zero are treated as exactly zero; anything more negative is an error.
/// For the pseudo-inverse root, eigenvalues below `EIG_TOL * norm` count
/// as kernel directions.
const EIG_TOL: f64 = 1e-10;

/// Symmetric PSD square root (or pseudo-inverse square root) of `m`.
///
/// The matrix must be symmetric to within `1e-10` of its spectral norm.
/// Eigenvalues in `[-1e-10 * norm, 0]` are clipped to zero (rounding slack
/// for Gram matrices); eigenvalues below that band mean the input is not
/// PSD and produce an error rather than a silent repair.
pub fn sym_sqrt(m: &DMatrix<f64>, kind: SymSqrtKind) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(AmpError::validation(format!(
            "sym_sqrt: matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if d == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let max_abs = m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if !max_abs.is_finite() {
        return Err(AmpError::validation(
            "sym_sqrt: matrix has non-finite entries".to_string(),
        ));
    }
    let asym = (m - m.transpose()).iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if asym > 1e-10 * max_abs.max(1e-300) {
        return Err(AmpError::validation(format!(
            "sym_sqrt: matrix is not symmetric (max |M - M^T| = {asym:.3e})"
        )));
    }
    let symmetrized = (m + m.transpose()) * 0.5;
    let eigen = symmetrized.symmetric_eigen();
    let norm = eigen.eigenvalues.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if norm == 0.0 {
        // The zero matrix: both the root and its pseudo-inverse are zero.
        return Ok(DMatrix::zeros(d, d));
    }
    let floor = -EIG_TOL * norm;
    let mut mapped = DVector::zeros(d);
    for (i, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if lambda < floor {
            return Err(AmpError::validation(format!(
                "sym_sqrt: eigenvalue {lambda:.6e} is below -1e-10 * spectral norm; \
                 the matrix is not positive semidefinite"
            )));
        }
        let clipped = lambda.max(0.0);
        mapped[i] = match kind {
            SymSqrtKind::Root => clipped.sqrt(),
            SymSqrtKind::PseudoInverseRoot => {
                if clipped <= EIG_TOL * norm {
                    0.0
                } else {
                    1.0 / clipped.sqrt()
                }
            }
        };
    }
    let q = &eigen.eigenvectors;
    let result = q * DMatrix::from_diagonal(&mapped) * q.transpose();
    // Resymmetrize to kill rounding skew from the triple product.
    Ok((&result + result.transpose()) * 0.5)
}
