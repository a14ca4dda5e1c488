//! The lifted Gaussian mixture log-likelihood over augmented SPD blocks, its
//! conjugate-prior penalties, gradients, and the map back to ordinary
//! mixture parameters.
//!
//! A sample `x ∈ R^d` is lifted to `y = [x; 1]`, and each component is a
//! single `(d+1)×(d+1)` SPD matrix `S`. The component density is
//! `q(y; S) = √(2π) e^{1/2} N(y; 0, S)`. Writing
//! `S = [[U + s t tᵀ, s t], [s tᵀ, s]]` gives
//! `log q = log N(x; t, U) + ½ − ½ log s − 1/(2s)`, so at `s = 1` the lifted
//! and ordinary likelihoods coincide and `(t, U)` are the mean and covariance.
//! (A factor `2π` in place of `√(2π)` would shift every log-likelihood by
//! `(n/2) log 2π` and break that equality.)
//!
//! Everything is evaluated in log space. Per-sample work is split into
//! fixed-size column chunks that are reduced in chunk order, so results do
//! not depend on the number of worker threads.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, log_sum_exp, symmetrize, LN_2PI};
use crate::manifold::RetractionKind;
use crate::optim::{Objective, StochasticObjective};
use crate::product::{GmmManifold, GmmParams, GmmTangent};
use crate::spd::{self, SpdPoint, TangentVector};

const CHUNK: usize = 512;

/// Lifted samples `yᵢ = [xᵢ; 1]`, stored column-wise as a `(d+1)×n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedData {
    d: usize,
    y: DMatrix<f64>,
}

impl AugmentedData {
    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Column `i` is the lifted sample `yᵢ`.
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn select(&self, indices: &[usize]) -> AugmentedData {
        AugmentedData {
            d: self.d,
            y: self.y.select_columns(indices),
        }
    }

    /// `maxᵢ ‖yᵢ‖²`.
    pub fn max_norm_squared(&self) -> f64 {
        self.y.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max)
    }
}

/// Appends a trailing 1 to every row of the `n×d` sample matrix.
pub fn augment(data: &DMatrix<f64>) -> Result<AugmentedData> {
    if !linalg::all_finite(data) {
        return Err(Error::NonFinite("sample matrix"));
    }
    let (n, d) = data.shape();
    let mut y = DMatrix::from_element(d + 1, n, 1.0);
    y.view_mut((0, 0), (d, n)).copy_from(&data.transpose());
    Ok(AugmentedData { d, y })
}

/// Conjugate-prior penalty parameters.
///
/// `alpha_w` weights the inverse-Wishart scale term, `rho` the log-determinant
/// term and `beta` the whole `tr(Ψ S⁻¹)` term. When built through
/// [`build_psi_matrix`] the two identities `alpha_w = β(κ−1)/(d+ν+1)` and
/// `rho = alpha_w(d+ν+1)+β` hold, which pins the optimal `s` at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub kappa: f64,
    pub nu: f64,
    pub beta: f64,
    pub alpha_w: f64,
    pub rho: f64,
    pub zeta: f64,
    pub scale_matrix: DMatrix<f64>,
    pub prior_mean: DVector<f64>,
    pub psi: DMatrix<f64>,
}

fn assemble_psi(ratio: f64, kappa: f64, scale: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let d = mean.len();
    let mut psi = DMatrix::zeros(d + 1, d + 1);
    let top = scale * ratio + mean * mean.transpose() * kappa;
    psi.view_mut((0, 0), (d, d)).copy_from(&top);
    for i in 0..d {
        psi[(i, d)] = kappa * mean[i];
        psi[(d, i)] = kappa * mean[i];
    }
    psi[(d, d)] = kappa;
    psi
}

fn check_prior_shapes(scale: &DMatrix<f64>, mean: &DVector<f64>) -> Result<()> {
    let d = mean.len();
    if scale.nrows() != d || scale.ncols() != d {
        return Err(Error::Dimension {
            expected: d,
            found: scale.nrows(),
        });
    }
    if !mean.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("prior mean"));
    }
    Ok(())
}

/// Derives `alpha_w` and `rho` from `(κ, ν, β, d)` and assembles
/// `Ψ = [[(α/β)Λ + κλλᵀ, κλ], [κλᵀ, κ]]`.
pub fn build_psi_matrix(kappa: f64, nu: f64, beta: f64, scale: &DMatrix<f64>, mean: &DVector<f64>) -> Result<PenaltyConfig> {
    check_prior_shapes(scale, mean)?;
    let d = mean.len() as f64;
    if !(kappa > 0.0) || !(beta > 0.0) {
        return Err(Error::arg("kappa and beta must be positive"));
    }
    if !(d + nu + 1.0 > 0.0) {
        return Err(Error::arg("degrees of freedom must satisfy d + nu + 1 > 0"));
    }
    if kappa < 1.0 {
        return Err(Error::arg(format!(
            "kappa = {kappa} < 1 gives a negative inverse-Wishart weight; Ψ would not be positive semidefinite"
        )));
    }
    if d > 0.0 {
        SpdPoint::new(scale.clone()).map_err(|_| Error::arg("prior scale matrix must be SPD"))?;
    }
    let alpha_w = beta * (kappa - 1.0) / (d + nu + 1.0);
    let rho = alpha_w * (d + nu + 1.0) + beta;
    Ok(PenaltyConfig {
        kappa,
        nu,
        beta,
        alpha_w,
        rho,
        zeta: 0.0,
        scale_matrix: scale.clone(),
        prior_mean: mean.clone(),
        psi: assemble_psi(alpha_w / beta, kappa, scale, mean),
    })
}

impl PenaltyConfig {
    /// Sets `ρ, κ, α, β` independently; the optimum of `s` is then generally
    /// not 1.
    pub fn raw(rho: f64, kappa: f64, alpha_w: f64, beta: f64, zeta: f64, scale: &DMatrix<f64>, mean: &DVector<f64>) -> Result<Self> {
        check_prior_shapes(scale, mean)?;
        if !(beta > 0.0) || !(kappa >= 0.0) || !(rho >= 0.0) || !(zeta >= 0.0) {
            return Err(Error::arg("raw penalty requires beta > 0 and nonnegative rho, kappa, zeta"));
        }
        let psi = assemble_psi(alpha_w / beta, kappa, scale, mean);
        if linalg::min_eigenvalue(&psi) < -1e-12 * psi.norm().max(1.0) {
            return Err(Error::arg("raw penalty gives an indefinite Ψ"));
        }
        let d = mean.len() as f64;
        Ok(PenaltyConfig {
            kappa,
            nu: if alpha_w != 0.0 { (rho - beta) / alpha_w - d - 1.0 } else { 0.0 },
            beta,
            alpha_w,
            rho,
            zeta,
            scale_matrix: scale.clone(),
            prior_mean: mean.clone(),
            psi,
        })
    }

    /// All penalty terms switched off (`ρ = β = ζ = 0`).
    pub fn none(d: usize) -> Self {
        PenaltyConfig {
            kappa: 0.0,
            nu: 0.0,
            beta: 0.0,
            alpha_w: 0.0,
            rho: 0.0,
            zeta: 0.0,
            scale_matrix: DMatrix::zeros(d, d),
            prior_mean: DVector::zeros(d),
            psi: DMatrix::zeros(d + 1, d + 1),
        }
    }

    /// Data-driven defaults: `Λ = scale · cov(x)`, `λ = mean(x)`, `ν = d+1`.
    pub fn from_data(samples: &DMatrix<f64>, kappa: f64, beta: f64, zeta: f64, nu: Option<f64>, scale_factor: f64) -> Result<Self> {
        let d = samples.ncols();
        let (mean, cov) = sample_moments(samples)?;
        let scale = cov * scale_factor;
        let cfg = build_psi_matrix(kappa, nu.unwrap_or(d as f64 + 1.0), beta, &scale, &mean)?;
        Ok(cfg.with_zeta(zeta))
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }

    pub fn d(&self) -> usize {
        self.prior_mean.len()
    }

    pub fn is_off(&self) -> bool {
        self.rho == 0.0 && self.beta == 0.0 && self.zeta == 0.0
    }
}

/// Sample mean and maximum-likelihood covariance of the rows of `samples`.
pub fn sample_moments(samples: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, d) = samples.shape();
    if n == 0 {
        return Err(Error::arg("cannot take moments of an empty sample"));
    }
    let mean = DVector::from_iterator(d, samples.column_iter().map(|c| c.mean()));
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = symmetrize(&(centered.transpose() * &centered / n as f64));
    Ok((mean, cov))
}

/// Ordinary mixture parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureEstimate {
    pub weights: DVector<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl MixtureEstimate {
    pub fn new(weights: DVector<f64>, means: Vec<DVector<f64>>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        let est = MixtureEstimate { weights, means, covariances };
        est.validate()?;
        Ok(est)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return Err(Error::arg("weights, means and covariances must have the same nonzero length"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::arg("mixture weights must be nonnegative"));
        }
        if (self.weights.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::arg("mixture weights must sum to one"));
        }
        let d = self.means[0].len();
        for (m, c) in self.means.iter().zip(&self.covariances) {
            if m.len() != d || c.nrows() != d || c.ncols() != d {
                return Err(Error::Dimension { expected: d, found: m.len() });
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn d(&self) -> usize {
        self.means[0].len()
    }

    /// Component order of `self` that best matches `reference` by mean
    /// distance: `perm[j]` is the index in `self` paired with `reference`'s
    /// component `j`. Exhaustive for K ≤ 8, greedy beyond.
    pub fn alignment_to(&self, reference: &MixtureEstimate) -> Vec<usize> {
        let k = self.k().min(reference.k());
        let cost = |i: usize, j: usize| (&self.means[i] - &reference.means[j]).norm_squared();
        if k <= 8 {
            let mut best = (f64::INFINITY, (0..k).collect::<Vec<_>>());
            let mut perm: Vec<usize> = (0..k).collect();
            permute(&mut perm, 0, &mut |p| {
                let c: f64 = p.iter().enumerate().map(|(j, &i)| cost(i, j)).sum();
                if c < best.0 {
                    best = (c, p.to_vec());
                }
            });
            best.1
        } else {
            let mut used = vec![false; self.k()];
            (0..k)
                .map(|j| {
                    let i = (0..self.k())
                        .filter(|i| !used[*i])
                        .min_by(|a, b| cost(*a, j).total_cmp(&cost(*b, j)))
                        .expect("enough components");
                    used[i] = true;
                    i
                })
                .collect()
        }
    }

    /// Components reordered by `perm` (see [`MixtureEstimate::alignment_to`]).
    pub fn reordered(&self, perm: &[usize]) -> MixtureEstimate {
        MixtureEstimate {
            weights: DVector::from_iterator(perm.len(), perm.iter().map(|&i| self.weights[i])),
            means: perm.iter().map(|&i| self.means[i].clone()).collect(),
            covariances: perm.iter().map(|&i| self.covariances[i].clone()).collect(),
        }
    }
}

fn permute(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// Posterior membership weights `w_ij`, an `n×K` matrix with unit row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities(pub DMatrix<f64>);

fn log_q_constant(dim: usize) -> f64 {
    0.5 + 0.5 * LN_2PI - 0.5 * dim as f64 * LN_2PI
}

/// `log q(y; S) = ½ log(2π) + ½ + log N(y; 0, S)` via the Cholesky factor of `S`.
pub fn log_q_density(y: &DVector<f64>, s: &SpdPoint) -> Result<f64> {
    if y.len() != s.dim() {
        return Err(Error::Dimension {
            expected: s.dim(),
            found: y.len(),
        });
    }
    let z = s
        .cholesky()
        .solve_lower_triangular(y)
        .ok_or(Error::NotPositiveDefinite { min_eig: 0.0 })?;
    Ok(log_q_constant(s.dim()) - 0.5 * s.logdet() - 0.5 * z.norm_squared())
}

/// Weighted sums accumulated over a set of samples.
#[derive(Debug, Clone)]
pub(crate) struct SuffStats {
    pub loglik: f64,
    /// `N_j = Σᵢ w_ij`
    pub counts: Vec<f64>,
    /// `M_j = Σᵢ w_ij yᵢ yᵢᵀ`, when requested.
    pub scatter: Option<Vec<DMatrix<f64>>>,
    pub samples: usize,
}

struct ChunkOut {
    loglik: f64,
    counts: Vec<f64>,
    scatter: Option<Vec<DMatrix<f64>>>,
    resp: Option<DMatrix<f64>>,
}

fn chunk_stats(
    params: &GmmParams,
    log_weights: &[f64],
    y: &DMatrix<f64>,
    start: usize,
    len: usize,
    want_scatter: bool,
    want_resp: bool,
) -> Result<ChunkOut> {
    let k = params.k();
    let dim = params.d() + 1;
    let cols = y.columns(start, len);
    let constant = log_q_constant(dim);
    let mut logq = DMatrix::<f64>::zeros(k, len);
    for (j, s) in params.components().iter().enumerate() {
        let z = s
            .cholesky()
            .solve_lower_triangular(&cols)
            .ok_or(Error::NotPositiveDefinite { min_eig: 0.0 })?;
        let base = constant - 0.5 * s.logdet() + log_weights[j];
        for (i, zc) in z.column_iter().enumerate() {
            logq[(j, i)] = base - 0.5 * zc.norm_squared();
        }
    }
    let mut loglik = 0.0;
    let mut buf = vec![0.0; k];
    for i in 0..len {
        for j in 0..k {
            buf[j] = logq[(j, i)];
        }
        let lse = log_sum_exp(&buf);
        if !lse.is_finite() {
            return Err(Error::Underflow { row: start + i });
        }
        loglik += lse;
        for j in 0..k {
            logq[(j, i)] = (buf[j] - lse).exp();
        }
    }
    let counts = (0..k).map(|j| logq.row(j).sum()).collect();
    let scatter = want_scatter.then(|| {
        (0..k)
            .map(|j| {
                let mut weighted = cols.clone_owned();
                for (i, mut c) in weighted.column_iter_mut().enumerate() {
                    c *= logq[(j, i)];
                }
                weighted * cols.transpose()
            })
            .collect()
    });
    let resp = want_resp.then(|| logq.transpose());
    Ok(ChunkOut {
        loglik,
        counts,
        scatter,
        resp,
    })
}

fn log_weights(params: &GmmParams) -> Vec<f64> {
    let mut full: Vec<f64> = params.logits().iter().copied().collect();
    full.push(0.0);
    let lse = log_sum_exp(&full);
    full.iter().map(|v| v - lse).collect()
}

fn check_data(params: &GmmParams, d: usize) -> Result<()> {
    if params.d() != d {
        return Err(Error::Dimension {
            expected: params.d(),
            found: d,
        });
    }
    Ok(())
}

fn run_chunks(params: &GmmParams, y: &DMatrix<f64>, want_scatter: bool, want_resp: bool) -> Result<Vec<ChunkOut>> {
    let lw = log_weights(params);
    let n = y.ncols();
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let len = CHUNK.min(n - start);
            chunk_stats(params, &lw, y, start, len, want_scatter, want_resp)
        })
        .collect()
}

pub(crate) fn suff_stats(params: &GmmParams, y: &DMatrix<f64>, want_scatter: bool) -> Result<SuffStats> {
    let k = params.k();
    let dim = params.d() + 1;
    let parts = run_chunks(params, y, want_scatter, false)?;
    let mut stats = SuffStats {
        loglik: 0.0,
        counts: vec![0.0; k],
        scatter: want_scatter.then(|| vec![DMatrix::zeros(dim, dim); k]),
        samples: y.ncols(),
    };
    for part in parts {
        stats.loglik += part.loglik;
        for (acc, c) in stats.counts.iter_mut().zip(&part.counts) {
            *acc += c;
        }
        if let (Some(acc), Some(s)) = (stats.scatter.as_mut(), part.scatter.as_ref()) {
            for (a, m) in acc.iter_mut().zip(s) {
                *a += m;
            }
        }
    }
    if let Some(acc) = stats.scatter.as_mut() {
        for m in acc.iter_mut() {
            *m = symmetrize(m);
        }
    }
    Ok(stats)
}

/// `Σᵢ log Σⱼ αⱼ q(yᵢ; Sⱼ)` with `α = softmax([ω, 0])`.
pub fn reformulated_loglik(params: &GmmParams, data: &AugmentedData) -> Result<f64> {
    check_data(params, data.d())?;
    Ok(suff_stats(params, &data.y, false)?.loglik)
}

/// `ψ(S) = −(ρ/2) log det S − (β/2) tr(Ψ S⁻¹)`.
pub fn penalty_psi(s: &SpdPoint, cfg: &PenaltyConfig) -> f64 {
    if cfg.rho == 0.0 && cfg.beta == 0.0 {
        return 0.0;
    }
    let trace = if cfg.beta == 0.0 { 0.0 } else { s.whiten(&cfg.psi).trace() };
    -0.5 * cfg.rho * s.logdet() - 0.5 * cfg.beta * trace
}

/// Log of the symmetric Dirichlet prior on the weights,
/// `ζ Σ ωᵢ − K ζ log Σ exp(ωₖ)` with the implicit `ω_K = 0`.
pub fn penalty_phi(logits: &DVector<f64>, zeta: f64) -> f64 {
    if zeta == 0.0 || logits.is_empty() {
        return 0.0;
    }
    let k = logits.len() + 1;
    let mut full: Vec<f64> = logits.iter().copied().collect();
    full.push(0.0);
    zeta * logits.sum() - k as f64 * zeta * log_sum_exp(&full)
}

fn penalty_total(params: &GmmParams, cfg: &PenaltyConfig) -> f64 {
    params.components().iter().map(|s| penalty_psi(s, cfg)).sum::<f64>() + penalty_phi(params.logits(), cfg.zeta)
}

/// Reformulated log-likelihood plus `Σⱼ ψ(Sⱼ) + φ(ω)`.
pub fn penalized_objective(params: &GmmParams, data: &AugmentedData, cfg: &PenaltyConfig) -> Result<f64> {
    check_data(params, data.d())?;
    check_penalty(cfg, data.d())?;
    Ok(reformulated_loglik(params, data)? + penalty_total(params, cfg))
}

fn check_penalty(cfg: &PenaltyConfig, d: usize) -> Result<()> {
    if cfg.d() != d {
        return Err(Error::Dimension { expected: d, found: cfg.d() });
    }
    Ok(())
}

/// `w_ij = αⱼ q(yᵢ; Sⱼ) / Σₖ αₖ q(yᵢ; Sₖ)`, computed in log space.
pub fn responsibilities(params: &GmmParams, data: &AugmentedData) -> Result<Responsibilities> {
    check_data(params, data.d())?;
    let parts = run_chunks(params, &data.y, false, true)?;
    let mut out = DMatrix::zeros(data.n(), params.k());
    let mut row = 0;
    for part in parts {
        let r = part.resp.expect("requested");
        out.view_mut((row, 0), (r.nrows(), r.ncols())).copy_from(&r);
        row += r.nrows();
    }
    Ok(Responsibilities(out))
}

/// Euclidean gradient blocks of the penalized objective summed over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanGrad {
    pub components: Vec<DMatrix<f64>>,
    pub logits: DVector<f64>,
}

fn batch_fraction(batch_n: usize, n_total: usize) -> Result<f64> {
    if batch_n == 0 {
        return Err(Error::arg("gradient batch is empty"));
    }
    if n_total < batch_n {
        return Err(Error::arg(format!("n_total = {n_total} is smaller than the batch ({batch_n})")));
    }
    Ok(batch_n as f64 / n_total as f64)
}

fn logit_grad(params: &GmmParams, stats: &SuffStats, cfg: &PenaltyConfig, frac: f64) -> DVector<f64> {
    let k = params.k();
    let alpha = params.weights();
    let b = stats.samples as f64;
    DVector::from_fn(k - 1, |j, _| {
        stats.counts[j] - b * alpha[j] + frac * (cfg.zeta - k as f64 * cfg.zeta * alpha[j])
    })
}

/// Per-sample gradients summed over `batch`; the penalty carries weight
/// `1/n_total` per sample so that the full-data sum is exact.
///
/// For a block `Sⱼ`: `½ S⁻¹(Mⱼ + fβΨ)S⁻¹ − ½(Nⱼ + fρ)S⁻¹` with `f = b/n_total`.
pub fn euclidean_grad(params: &GmmParams, batch: &AugmentedData, cfg: &PenaltyConfig, n_total: usize) -> Result<EuclideanGrad> {
    check_data(params, batch.d())?;
    check_penalty(cfg, batch.d())?;
    let frac = batch_fraction(batch.n(), n_total)?;
    let stats = suff_stats(params, &batch.y, true)?;
    let scatter = stats.scatter.as_ref().expect("requested");
    let components = params
        .components()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let inv = s.inverse();
            let m = &scatter[j] + &cfg.psi * (frac * cfg.beta);
            let g = (&inv * m * &inv) * 0.5 - &inv * (0.5 * (stats.counts[j] + frac * cfg.rho));
            symmetrize(&g)
        })
        .collect();
    Ok(EuclideanGrad {
        components,
        logits: logit_grad(params, &stats, cfg, frac),
    })
}

fn rgrad_from_stats(params: &GmmParams, stats: &SuffStats, cfg: &PenaltyConfig, frac: f64) -> GmmTangent {
    let scatter = stats.scatter.as_ref().expect("requested");
    let components = params
        .components()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let m = (&scatter[j] + &cfg.psi * (frac * cfg.beta)) * 0.5 - s.matrix() * (0.5 * (stats.counts[j] + frac * cfg.rho));
            TangentVector::from_symmetric(symmetrize(&m))
        })
        .collect();
    GmmTangent {
        components,
        logits: logit_grad(params, stats, cfg, frac),
    }
}

/// Riemannian gradient of the batch-summed objective.
///
/// `Sⱼ ∇ Sⱼ` collapses to `½(Mⱼ + fβΨ) − ½(Nⱼ + fρ)Sⱼ`, so no inverse is
/// formed; logit directions equal their Euclidean gradient.
pub fn riemannian_grad(params: &GmmParams, batch: &AugmentedData, cfg: &PenaltyConfig, n_total: usize) -> Result<GmmTangent> {
    check_data(params, batch.d())?;
    check_penalty(cfg, batch.d())?;
    let frac = batch_fraction(batch.n(), n_total)?;
    let stats = suff_stats(params, &batch.y, true)?;
    Ok(rgrad_from_stats(params, &stats, cfg, frac))
}

/// Penalized objective and its Riemannian gradient in one pass.
pub fn penalized_value_and_grad(params: &GmmParams, data: &AugmentedData, cfg: &PenaltyConfig) -> Result<(f64, GmmTangent)> {
    check_data(params, data.d())?;
    check_penalty(cfg, data.d())?;
    if data.n() == 0 {
        return Err(Error::arg("gradient of an empty dataset"));
    }
    let stats = suff_stats(params, &data.y, true)?;
    let value = stats.loglik + penalty_total(params, cfg);
    Ok((value, rgrad_from_stats(params, &stats, cfg, 1.0)))
}

/// Splits each block `S = [[U + s t tᵀ, s t], [s tᵀ, s]]` into mean `t` and
/// covariance `U`.
pub fn recover_mixture(params: &GmmParams) -> Result<MixtureEstimate> {
    let d = params.d();
    let mut means = Vec::with_capacity(params.k());
    let mut covs = Vec::with_capacity(params.k());
    for s in params.components() {
        let m = s.matrix();
        let scale = m[(d, d)];
        let t: DVector<f64> = m.view((0, d), (d, 1)).column(0) / scale;
        let u = m.view((0, 0), (d, d)) - &t * t.transpose() * scale;
        let u = symmetrize(&u);
        if d > 0 {
            SpdPoint::new(u.clone())?;
        }
        means.push(t);
        covs.push(u);
    }
    Ok(MixtureEstimate {
        weights: params.weights(),
        means,
        covariances: covs,
    })
}

/// Bottom-right entry `s` of every augmented block.
pub fn block_scales(params: &GmmParams) -> Vec<f64> {
    let d = params.d();
    params.components().iter().map(|s| s.matrix()[(d, d)]).collect()
}

/// Lifts `(α, μ, Σ)` to augmented blocks `[[Σ + μμᵀ, μ], [μᵀ, 1]]`.
pub fn embed_mixture(est: &MixtureEstimate) -> Result<GmmParams> {
    est.validate()?;
    let k = est.k();
    let d = est.d();
    if est.weights.iter().any(|w| *w <= 0.0) {
        return Err(Error::arg("embedding needs strictly positive weights"));
    }
    let mut comps = Vec::with_capacity(k);
    for (mu, cov) in est.means.iter().zip(&est.covariances) {
        if d > 0 {
            SpdPoint::new(cov.clone()).map_err(|_| Error::arg("covariance is not SPD"))?;
        }
        let mut s = DMatrix::zeros(d + 1, d + 1);
        s.view_mut((0, 0), (d, d)).copy_from(&(cov + mu * mu.transpose()));
        for i in 0..d {
            s[(i, d)] = mu[i];
            s[(d, i)] = mu[i];
        }
        s[(d, d)] = 1.0;
        comps.push(SpdPoint::new(s)?);
    }
    let last = est.weights[k - 1].ln();
    let logits = DVector::from_iterator(k - 1, est.weights.iter().take(k - 1).map(|w| w.ln() - last));
    GmmParams::new(comps, logits)
}

/// The penalized lifted objective as a minimization problem on
/// [`GmmManifold`]: values and gradients are negated.
#[derive(Debug, Clone)]
pub struct GmmProblem {
    data: AugmentedData,
    cfg: PenaltyConfig,
    manifold: GmmManifold,
}

impl GmmProblem {
    pub fn new(data: AugmentedData, cfg: PenaltyConfig, retraction: RetractionKind) -> Result<Self> {
        check_penalty(&cfg, data.d())?;
        if data.n() == 0 {
            return Err(Error::arg("cannot optimize over an empty dataset"));
        }
        Ok(GmmProblem {
            data,
            cfg,
            manifold: GmmManifold::new(retraction),
        })
    }

    pub fn data(&self) -> &AugmentedData {
        &self.data
    }

    pub fn penalty(&self) -> &PenaltyConfig {
        &self.cfg
    }

    pub fn with_retraction(mut self, retraction: RetractionKind) -> Self {
        self.manifold = GmmManifold::new(retraction);
        self
    }
}

fn negate(mut g: GmmTangent) -> GmmTangent {
    crate::manifold::Tangent::scale_mut(&mut g, -1.0);
    g
}

impl Objective for GmmProblem {
    type M = GmmManifold;

    fn manifold(&self) -> &GmmManifold {
        &self.manifold
    }

    fn value(&self, x: &GmmParams) -> Result<f64> {
        Ok(-penalized_objective(x, &self.data, &self.cfg)?)
    }

    fn value_and_grad(&self, x: &GmmParams) -> Result<(f64, GmmTangent)> {
        let (v, g) = penalized_value_and_grad(x, &self.data, &self.cfg)?;
        Ok((-v, negate(g)))
    }
}

impl StochasticObjective for GmmProblem {
    fn sample_count(&self) -> usize {
        self.data.n()
    }

    /// `−(n/b) Σ_{i∈batch} ∇fᵢ`, an unbiased estimate of the full gradient.
    fn stochastic_grad(&self, x: &GmmParams, batch: &[usize]) -> Result<GmmTangent> {
        let n = self.data.n();
        let sub = self.data.select(batch);
        let g = riemannian_grad(x, &sub, &self.cfg, n)?;
        let mut g = negate(g);
        crate::manifold::Tangent::scale_mut(&mut g, n as f64 / batch.len() as f64);
        Ok(g)
    }
}

/// Euclidean-gradient conversion used to cross-check [`riemannian_grad`].
pub fn rgrad_via_euclidean(params: &GmmParams, eg: &EuclideanGrad) -> Result<GmmTangent> {
    let components = params
        .components()
        .iter()
        .zip(&eg.components)
        .map(|(s, g)| spd::egrad_to_rgrad(s, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(GmmTangent {
        components,
        logits: eg.logits.clone(),
    })
}
