//! Geometry of the manifold of symmetric positive definite matrices under the
//! affine-invariant metric `g_Σ(ξ, η) = tr(Σ⁻¹ ξ Σ⁻¹ η)`.
//!
//! Every matrix function below is evaluated through a congruence with the
//! Cholesky factor `Σ = L Lᵀ`: for any factor `F` of `Σ`, expressions such as
//! `F f(F⁻¹ X F⁻ᵀ) Fᵀ` do not depend on which factor is used, and the
//! congruence keeps results symmetric to rounding.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky_lower, sym_apply, symmetrize};

/// A point on the SPD manifold together with its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdPoint {
    mat: DMatrix<f64>,
    chol: DMatrix<f64>,
}

/// A symmetric matrix, interpreted as a tangent vector at some [`SpdPoint`].
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(DMatrix<f64>);

impl SpdPoint {
    /// Symmetrizes `m` and validates positive definiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::arg("SPD matrix must have positive dimension"));
        }
        if !linalg::all_finite(&m) {
            return Err(Error::NonFinite("SPD matrix"));
        }
        let mat = symmetrize(&m);
        let chol = cholesky_lower(&mat)?;
        Ok(SpdPoint { mat, chol })
    }

    pub fn identity(dim: usize) -> Self {
        SpdPoint {
            mat: DMatrix::identity(dim, dim),
            chol: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// Lower triangular `L` with `L Lᵀ = Σ`.
    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn logdet(&self) -> f64 {
        linalg::logdet_from_cholesky(&self.chol)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        linalg::inverse_from_cholesky(&self.chol)
    }

    /// `L⁻¹ X L⁻ᵀ`, the congruence that maps this point to the identity.
    pub fn whiten(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let left = self.chol.solve_lower_triangular(x).expect("cholesky factor has a positive diagonal");
        let both = self
            .chol
            .solve_lower_triangular(&left.transpose())
            .expect("cholesky factor has a positive diagonal");
        symmetrize(&both)
    }

    /// `L X Lᵀ`, inverse of [`SpdPoint::whiten`].
    pub fn color(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.chol * x * self.chol.transpose()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.mat)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        linalg::max_eigenvalue(&self.mat)
    }
}

impl TangentVector {
    /// Symmetrizes `m`; rejects non-square or non-finite input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if !linalg::all_finite(&m) {
            return Err(Error::NonFinite("tangent vector"));
        }
        Ok(TangentVector(symmetrize(&m)))
    }

    pub(crate) fn from_symmetric(m: DMatrix<f64>) -> Self {
        TangentVector(m)
    }

    pub fn zeros(dim: usize) -> Self {
        TangentVector(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, a: f64) -> Self {
        TangentVector(&self.0 * a)
    }

    pub(crate) fn scale_mut(&mut self, a: f64) {
        self.0 *= a;
    }

    pub(crate) fn axpy(&mut self, a: f64, x: &TangentVector) {
        self.0.zip_apply(&x.0, |s, v| *s += a * v);
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::Dimension { expected, found })
    } else {
        Ok(())
    }
}

/// `tr(Σ⁻¹ ξ Σ⁻¹ η)`.
pub fn metric(base: &SpdPoint, xi: &TangentVector, eta: &TangentVector) -> Result<f64> {
    check_dim(base.dim(), xi.dim())?;
    check_dim(base.dim(), eta.dim())?;
    let v = metric_unchecked(base, xi, eta);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("metric"))
    }
}

pub(crate) fn metric_unchecked(base: &SpdPoint, xi: &TangentVector, eta: &TangentVector) -> f64 {
    let a = base.whiten(&xi.0);
    if std::ptr::eq(xi, eta) {
        return a.norm_squared();
    }
    let b = base.whiten(&eta.0);
    linalg::frobenius_dot(&a, &b)
}

/// Converts a Euclidean gradient into the Riemannian gradient `½ Σ (G + Gᵀ) Σ`.
pub fn egrad_to_rgrad(base: &SpdPoint, egrad: &DMatrix<f64>) -> Result<TangentVector> {
    check_dim(base.dim(), egrad.nrows())?;
    check_dim(base.dim(), egrad.ncols())?;
    let sym = symmetrize(egrad);
    let r = &base.mat * sym * &base.mat;
    Ok(TangentVector(symmetrize(&r)))
}

/// `Exp_Σ(ξ) = Σ exp(Σ⁻¹ ξ)`, evaluated as `L exp(L⁻¹ ξ L⁻ᵀ) Lᵀ`.
pub fn exp_map(base: &SpdPoint, xi: &TangentVector) -> Result<SpdPoint> {
    check_dim(base.dim(), xi.dim())?;
    if xi.0.iter().all(|v| *v == 0.0) {
        return Ok(base.clone());
    }
    let w = base.whiten(&xi.0);
    let e = sym_apply(&w, f64::exp);
    if !linalg::all_finite(&e) {
        return Err(Error::Overflow("exponential map"));
    }
    let out = base.color(&e);
    if !linalg::all_finite(&out) {
        return Err(Error::Overflow("exponential map"));
    }
    SpdPoint::new(out).map_err(|err| match err {
        Error::NotPositiveDefinite { .. } => Error::Overflow("exponential map"),
        other => other,
    })
}

/// Inverse of [`exp_map`]: `L log(L⁻¹ T L⁻ᵀ) Lᵀ`.
pub fn log_map(base: &SpdPoint, target: &SpdPoint) -> Result<TangentVector> {
    check_dim(base.dim(), target.dim())?;
    let w = base.whiten(&target.mat);
    let lg = sym_apply(&w, f64::ln);
    if !linalg::all_finite(&lg) {
        return Err(Error::NonFinite("logarithm map"));
    }
    Ok(TangentVector(base.color(&lg)))
}

/// Point at time `t` on the geodesic from `a` to `b`.
pub fn geodesic(a: &SpdPoint, b: &SpdPoint, t: f64) -> Result<SpdPoint> {
    check_dim(a.dim(), b.dim())?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::arg(format!("geodesic time {t} outside [0, 1]")));
    }
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    let w = a.whiten(&b.mat);
    let p = sym_apply(&w, |lam| lam.powf(t));
    SpdPoint::new(a.color(&p))
}

/// Parallel transport along the geodesic joining two points, precomputed so
/// that many vectors can be moved with one spectral decomposition.
#[derive(Debug, Clone)]
pub struct ParallelTransport {
    e: DMatrix<f64>,
}

impl ParallelTransport {
    /// Builds `E = L M^{1/2} L⁻¹` with `M = L⁻¹ Σ₂ L⁻ᵀ`, the principal square
    /// root of `Σ₂ Σ₁⁻¹`.
    pub fn between(from: &SpdPoint, to: &SpdPoint) -> Result<Self> {
        check_dim(from.dim(), to.dim())?;
        let m = from.whiten(&to.mat);
        let half = sym_apply(&m, |lam| lam.max(0.0).sqrt());
        let l_half = &from.chol * half;
        let e = from
            .chol
            .transpose()
            .solve_upper_triangular(&l_half.transpose())
            .expect("cholesky factor has a positive diagonal")
            .transpose();
        Ok(ParallelTransport { e })
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn apply(&self, xi: &TangentVector) -> TangentVector {
        TangentVector(symmetrize(&(&self.e * &xi.0 * self.e.transpose())))
    }
}

/// `E ξ Eᵀ` with `E = (Σ₂ Σ₁⁻¹)^{1/2}`.
pub fn parallel_transport(from: &SpdPoint, to: &SpdPoint, xi: &TangentVector) -> Result<TangentVector> {
    check_dim(from.dim(), xi.dim())?;
    Ok(ParallelTransport::between(from, to)?.apply(xi))
}

/// `Σ + ξ`, failing when the sum leaves the cone.
pub fn euclidean_retraction(base: &SpdPoint, xi: &TangentVector) -> Result<SpdPoint> {
    check_dim(base.dim(), xi.dim())?;
    let sum = &base.mat + &xi.0;
    if !linalg::all_finite(&sum) {
        return Err(Error::NonFinite("euclidean retraction"));
    }
    SpdPoint::new(sum).map_err(|err| match err {
        Error::NotPositiveDefinite { min_eig } => Error::RetractionFailure { component: None, min_eig },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_spd, random_symmetric};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn metric_examples() {
        let i2 = SpdPoint::identity(2);
        let t = TangentVector::new(DMatrix::identity(2, 2)).unwrap();
        assert!((metric(&i2, &t, &t).unwrap() - 2.0).abs() < 1e-15);

        let base = SpdPoint::new(scalar(4.0)).unwrap();
        let xi = TangentVector::new(scalar(2.0)).unwrap();
        let eta = TangentVector::new(scalar(6.0)).unwrap();
        assert!((metric(&base, &xi, &eta).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn metric_identity_is_frobenius() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let xi = random_symmetric(4, 1.0, &mut rng);
        let eta = random_symmetric(4, 1.0, &mut rng);
        let v = metric(&SpdPoint::identity(4), &xi, &eta).unwrap();
        let f = linalg::frobenius_dot(xi.matrix(), eta.matrix());
        assert!((v - f).abs() < 1e-12 * f.abs().max(1.0));
    }

    #[test]
    fn metric_dimension_mismatch() {
        let err = metric(&SpdPoint::identity(2), &TangentVector::zeros(3), &TangentVector::zeros(2));
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn rgrad_examples() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let r = egrad_to_rgrad(&SpdPoint::identity(2), &g).unwrap();
        assert_eq!(r.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 3.0]));
        let base = SpdPoint::new(scalar(3.0)).unwrap();
        let r = egrad_to_rgrad(&base, &scalar(2.0)).unwrap();
        assert!((r.matrix()[(0, 0)] - 18.0).abs() < 1e-12);
    }

    #[test]
    fn exp_examples() {
        let i = SpdPoint::identity(3);
        assert_eq!(exp_map(&i, &TangentVector::zeros(3)).unwrap().matrix(), i.matrix());
        let base = SpdPoint::new(scalar(2.0)).unwrap();
        let out = exp_map(&base, &TangentVector::new(scalar(2.0)).unwrap()).unwrap();
        assert!((out.matrix()[(0, 0)] - 2.0 * std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn exp_overflow_is_reported() {
        let base = SpdPoint::identity(2);
        let xi = TangentVector::new(DMatrix::identity(2, 2) * 1e4).unwrap();
        assert!(matches!(exp_map(&base, &xi), Err(Error::Overflow(_))));
    }

    #[test]
    fn exp_matches_geodesic_through_log() {
        // Exp_Σ(ξ) must be the t=1 point of the geodesic with initial velocity
        // ξ; the geodesic is written independently as Σ^{1/2}(·)^t Σ^{1/2}
        // using a symmetric square root rather than the Cholesky factor.
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let base = random_spd(3, &mut rng);
        let xi = random_symmetric(3, 0.7, &mut rng);
        let target = exp_map(&base, &xi).unwrap();
        let root = sym_apply(base.matrix(), f64::sqrt);
        let root_inv = sym_apply(base.matrix(), |v| 1.0 / v.sqrt());
        let inner = &root_inv * xi.matrix() * &root_inv;
        let oracle = &root * sym_apply(&inner, f64::exp) * &root;
        assert!(linalg::relative_diff(target.matrix(), &oracle) < 1e-12);
        let mid = geodesic(&base, &target, 0.5).unwrap();
        let half = exp_map(&base, &xi.scale(0.5)).unwrap();
        assert!(linalg::relative_diff(mid.matrix(), half.matrix()) < 1e-10);
    }

    #[test]
    fn log_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let s = random_spd(3, &mut rng);
        assert!(log_map(&s, &s).unwrap().matrix().norm() < 1e-12);
        let one = SpdPoint::new(scalar(1.0)).unwrap();
        let e2 = SpdPoint::new(scalar(std::f64::consts::E.powi(2))).unwrap();
        assert!((log_map(&one, &e2).unwrap().matrix()[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn geodesic_examples() {
        let a = SpdPoint::new(scalar(1.0)).unwrap();
        let b = SpdPoint::new(scalar(4.0)).unwrap();
        assert!((geodesic(&a, &b, 0.5).unwrap().matrix()[(0, 0)] - 2.0).abs() < 1e-12);
        assert_eq!(geodesic(&a, &b, 0.0).unwrap(), a);
        assert_eq!(geodesic(&a, &b, 1.0).unwrap(), b);
        assert!(matches!(geodesic(&a, &b, 1.5), Err(Error::InvalidArgument(_))));
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let s = random_spd(3, &mut rng);
        assert!(linalg::relative_diff(geodesic(&s, &s, 0.3).unwrap().matrix(), s.matrix()) < 1e-12);
    }

    #[test]
    fn transport_examples() {
        let a = SpdPoint::new(scalar(1.0)).unwrap();
        let b = SpdPoint::new(scalar(4.0)).unwrap();
        let xi = TangentVector::new(scalar(3.0)).unwrap();
        let out = parallel_transport(&a, &b, &xi).unwrap();
        // E = 2, so EξEᵀ = 12; this is the value that keeps ξ²/σ² = 9 fixed.
        assert!((out.matrix()[(0, 0)] - 12.0).abs() < 1e-12);

        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let s = random_spd(4, &mut rng);
        let v = random_symmetric(4, 1.0, &mut rng);
        let same = parallel_transport(&s, &s, &v).unwrap();
        assert!(linalg::relative_diff(same.matrix(), v.matrix()) < 1e-12);
    }

    #[test]
    fn transport_operator_maps_endpoints() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let s1 = random_spd(4, &mut rng);
        let s2 = random_spd(4, &mut rng);
        let e = ParallelTransport::between(&s1, &s2).unwrap();
        let mapped = e.operator() * s1.matrix() * e.operator().transpose();
        assert!(linalg::relative_diff(&mapped, s2.matrix()) < 1e-10);
        let sq = e.operator() * e.operator();
        let target = s2.matrix() * s1.inverse();
        assert!(linalg::relative_diff(&sq, &target) < 1e-10);
    }

    #[test]
    fn euclidean_retraction_examples() {
        let i2 = SpdPoint::identity(2);
        let xi = TangentVector::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5])).unwrap();
        let out = euclidean_retraction(&i2, &xi).unwrap();
        assert_eq!(out.matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]));
        let one = SpdPoint::identity(1);
        let err = euclidean_retraction(&one, &TangentVector::new(scalar(-2.0)).unwrap());
        match err {
            Err(Error::RetractionFailure { min_eig, .. }) => assert!(min_eig < 0.0),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(euclidean_retraction(&i2, &TangentVector::zeros(2)).unwrap(), i2);
    }

    #[test]
    fn constructor_symmetrizes_and_validates() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0 + 1e-13, 1.0, 2.0]);
        let p = SpdPoint::new(m).unwrap();
        assert_eq!(p.matrix()[(0, 1)], p.matrix()[(1, 0)]);
        assert!(SpdPoint::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(SpdPoint::new(DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }
}
