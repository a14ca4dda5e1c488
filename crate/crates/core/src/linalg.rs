//! Dense numerical helpers shared by the geometry and likelihood code.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(crate) const PIVOT_REL_TOL: f64 = 1e-14;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Lower Cholesky factor, rejecting matrices whose pivots fall below
/// `1e-14 * max(diag)`.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension {
            expected: n,
            found: m.ncols(),
        });
    }
    if !all_finite(m) {
        return Err(Error::NonFinite("cholesky input"));
    }
    let max_diag = (0..n).map(|i| m[(i, i)]).fold(0.0f64, f64::max);
    let threshold = PIVOT_REL_TOL * max_diag;
    let l = match Cholesky::new(m.clone()) {
        Some(c) => c.l(),
        None => return Err(Error::NotPositiveDefinite { min_eig: min_eigenvalue(m) }),
    };
    let min_pivot = l.diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    if max_diag <= 0.0 || !(min_pivot > threshold) {
        return Err(Error::NotPositiveDefinite { min_eig: min_pivot });
    }
    Ok(l)
}

pub fn logdet_from_cholesky(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Inverse of `L Lᵀ` given the lower factor.
pub fn inverse_from_cholesky(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("cholesky factor has a positive diagonal");
    symmetrize(&(linv.transpose() * linv))
}

/// Applies a scalar function to the spectrum of a symmetric matrix.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    sym_apply_eig(&eig, f)
}

pub fn sym_apply_eig(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let fj = f(*lam);
        scaled.column_mut(j).scale_mut(fj);
    }
    symmetrize(&(scaled * q.transpose()))
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).min()
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).max()
}

/// `log Σ exp(v)` with the maximum subtracted first.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax of `[logits..., 0]`, the weights implied by `K-1` free logits.
pub fn softmax_with_zero(logits: &DVector<f64>) -> DVector<f64> {
    let mut full: Vec<f64> = logits.iter().copied().collect();
    full.push(0.0);
    let lse = log_sum_exp(&full);
    DVector::from_iterator(full.len(), full.iter().map(|v| (v - lse).exp()))
}

pub fn frobenius_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn relative_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}
