//! Seeded generators for random SPD points, tangent vectors and mixtures.
//!
//! All experiment randomness flows through [`Rng`], a ChaCha20 stream cipher
//! generator. Independent sub-streams are derived with [`derive_rng`] so that
//! work split across threads or candidates never depends on scheduling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::spd::{SpdPoint, TangentVector};

pub type Rng = ChaCha20Rng;

/// Recorded in run reports so a trace can be tied to its generator.
pub const RNG_IDENTITY: &str = "ChaCha20Rng (rand_chacha 0.9), stream-split by derive_rng";

pub fn seeded(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Sub-stream `stream` of the generator seeded with `seed`.
pub fn derive_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng
}

pub fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn standard_normal_vector(len: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Random SPD matrix `A Aᵀ/d + 0.1 I` with Gaussian `A`, eigenvalues of order one.
pub fn random_spd(dim: usize, rng: &mut Rng) -> SpdPoint {
    let a = standard_normal_matrix(dim, dim, rng);
    let m = &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.1;
    SpdPoint::new(m).expect("A Aᵀ + 0.1 I is positive definite")
}

/// Random symmetric matrix with entries of size about `scale`.
pub fn random_symmetric(dim: usize, scale: f64, rng: &mut Rng) -> TangentVector {
    let a = standard_normal_matrix(dim, dim, rng);
    TangentVector::new((&a + a.transpose()) * (0.5 * scale)).expect("finite")
}

pub fn uniform(lo: f64, hi: f64, rng: &mut Rng) -> f64 {
    rng.random_range(lo..hi)
}

/// Random `K`-component lifted parameters of ambient dimension `d`, with
/// logits of size about one.
pub fn random_gmm_params(k: usize, d: usize, rng: &mut Rng) -> crate::product::GmmParams {
    let comps = (0..k).map(|_| random_spd(d + 1, rng)).collect();
    let logits = standard_normal_vector(k - 1, rng);
    crate::product::GmmParams::new(comps, logits).expect("valid shapes")
}

/// Random tangent vector at lifted parameters with the same shapes.
pub fn random_gmm_tangent(k: usize, d: usize, scale: f64, rng: &mut Rng) -> crate::product::GmmTangent {
    crate::product::GmmTangent {
        components: (0..k).map(|_| random_symmetric(d + 1, scale, rng)).collect(),
        logits: standard_normal_vector(k - 1, rng) * scale,
    }
}
