//! The ordinary mixture log-likelihood over `(μ_j, Σ_j, ω)` on
//! `(R^d × P^d)^K × R^{K−1}`: Euclidean means, SPD covariances. It serves as
//! the unreformulated baseline against the lifted objective.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, softmax_with_zero, symmetrize, LN_2PI};
use crate::manifold::{Manifold, RetractionKind, Tangent};
use crate::objective::MixtureEstimate;
use crate::optim::Objective;
use crate::spd::{self, ParallelTransport, SpdPoint, TangentVector};

const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanCovParams {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<SpdPoint>,
    pub logits: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanCovTangent {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<TangentVector>,
    pub logits: DVector<f64>,
}

impl MeanCovParams {
    pub fn from_estimate(est: &MixtureEstimate) -> Result<Self> {
        est.validate()?;
        let k = est.k();
        if est.weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::arg("weights must be strictly positive"));
        }
        let last = est.weights[k - 1].ln();
        Ok(MeanCovParams {
            means: est.means.clone(),
            covs: est.covariances.iter().map(|c| SpdPoint::new(c.clone())).collect::<Result<_>>()?,
            logits: DVector::from_iterator(k - 1, est.weights.iter().take(k - 1).map(|w| w.ln() - last)),
        })
    }

    pub fn to_estimate(&self) -> MixtureEstimate {
        MixtureEstimate {
            weights: softmax_with_zero(&self.logits),
            means: self.means.clone(),
            covariances: self.covs.iter().map(|c| c.matrix().clone()).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }
}

impl Tangent for MeanCovTangent {
    fn scale_mut(&mut self, a: f64) {
        self.means.iter_mut().for_each(|m| *m *= a);
        self.covs.iter_mut().for_each(|c| c.scale_mut(a));
        self.logits *= a;
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        for (m, v) in self.means.iter_mut().zip(&x.means) {
            m.axpy(a, v, 1.0);
        }
        for (c, v) in self.covs.iter_mut().zip(&x.covs) {
            c.axpy(a, v);
        }
        self.logits.axpy(a, &x.logits, 1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanCovManifold {
    pub retraction: RetractionKind,
}

impl Manifold for MeanCovManifold {
    type Point = MeanCovParams;
    type Tangent = MeanCovTangent;

    fn inner(&self, at: &MeanCovParams, a: &MeanCovTangent, b: &MeanCovTangent) -> f64 {
        let means: f64 = a.means.iter().zip(&b.means).map(|(u, v)| u.dot(v)).sum();
        let covs: f64 = at
            .covs
            .iter()
            .zip(a.covs.iter().zip(&b.covs))
            .map(|(s, (u, v))| spd::metric_unchecked(s, u, v))
            .sum();
        means + covs + a.logits.dot(&b.logits)
    }

    fn retract(&self, at: &MeanCovParams, v: &MeanCovTangent) -> Result<MeanCovParams> {
        let covs = at
            .covs
            .iter()
            .zip(&v.covs)
            .enumerate()
            .map(|(j, (s, xi))| {
                match self.retraction {
                    RetractionKind::Exp => spd::exp_map(s, xi),
                    RetractionKind::Euclidean => spd::euclidean_retraction(s, xi),
                }
                .map_err(|e| e.at_component(j))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MeanCovParams {
            means: at.means.iter().zip(&v.means).map(|(m, u)| m + u).collect(),
            covs,
            logits: &at.logits + &v.logits,
        })
    }

    fn transport(&self, from: &MeanCovParams, to: &MeanCovParams, vs: &[&MeanCovTangent]) -> Result<Vec<MeanCovTangent>> {
        if self.retraction == RetractionKind::Euclidean {
            return Ok(vs.iter().map(|v| (*v).clone()).collect());
        }
        let ops = from
            .covs
            .iter()
            .zip(&to.covs)
            .map(|(a, b)| ParallelTransport::between(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(vs
            .iter()
            .map(|v| MeanCovTangent {
                means: v.means.clone(),
                covs: ops.iter().zip(&v.covs).map(|(op, c)| op.apply(c)).collect(),
                logits: v.logits.clone(),
            })
            .collect())
    }
}

struct Stats {
    loglik: f64,
    counts: Vec<f64>,
    first: Vec<DVector<f64>>,
    scatter: Vec<DMatrix<f64>>,
}

fn chunk_stats(p: &MeanCovParams, lw: &[f64], x: &DMatrix<f64>, start: usize, len: usize) -> Result<Stats> {
    let k = p.k();
    let d = x.nrows();
    let cols = x.columns(start, len);
    let mut logp = DMatrix::<f64>::zeros(k, len);
    let mut centered = Vec::with_capacity(k);
    for j in 0..k {
        let mut diff = cols.clone_owned();
        for mut c in diff.column_iter_mut() {
            c -= &p.means[j];
        }
        let z = p.covs[j]
            .cholesky()
            .solve_lower_triangular(&diff)
            .ok_or(Error::NotPositiveDefinite { min_eig: 0.0 })?;
        let base = -0.5 * d as f64 * LN_2PI - 0.5 * p.covs[j].logdet() + lw[j];
        for (i, zc) in z.column_iter().enumerate() {
            logp[(j, i)] = base - 0.5 * zc.norm_squared();
        }
        centered.push(diff);
    }
    let mut loglik = 0.0;
    let mut buf = vec![0.0; k];
    for i in 0..len {
        for j in 0..k {
            buf[j] = logp[(j, i)];
        }
        let lse = log_sum_exp(&buf);
        if !lse.is_finite() {
            return Err(Error::Underflow { row: start + i });
        }
        loglik += lse;
        for j in 0..k {
            logp[(j, i)] = (buf[j] - lse).exp();
        }
    }
    let mut counts = Vec::with_capacity(k);
    let mut first = Vec::with_capacity(k);
    let mut scatter = Vec::with_capacity(k);
    for (j, diff) in centered.into_iter().enumerate() {
        let w = logp.row(j).transpose();
        counts.push(w.sum());
        first.push(&diff * &w);
        let mut weighted = diff.clone();
        for (i, mut c) in weighted.column_iter_mut().enumerate() {
            c *= w[i];
        }
        scatter.push(weighted * diff.transpose());
    }
    Ok(Stats {
        loglik,
        counts,
        first,
        scatter,
    })
}

/// Plain mixture log-likelihood and its Riemannian gradient.
///
/// Per component: `∇μ = Σ⁻¹ Σᵢ wᵢ(xᵢ − μ)`, `∇Σ = ½Cⱼ − ½NⱼΣ` with
/// `Cⱼ = Σᵢ wᵢ(xᵢ−μ)(xᵢ−μ)ᵀ`, and `∇ω = Nⱼ − nαⱼ`.
pub fn loglik_and_grad(p: &MeanCovParams, x: &DMatrix<f64>) -> Result<(f64, MeanCovTangent)> {
    let k = p.k();
    let d = x.nrows();
    if p.means.iter().any(|m| m.len() != d) || p.covs.iter().any(|c| c.dim() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: p.means[0].len(),
        });
    }
    let mut lw: Vec<f64> = p.logits.iter().copied().collect();
    lw.push(0.0);
    let z = log_sum_exp(&lw);
    lw.iter_mut().for_each(|v| *v -= z);
    let n = x.ncols();
    let parts = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| chunk_stats(p, &lw, x, c * CHUNK, CHUNK.min(n - c * CHUNK)))
        .collect::<Result<Vec<_>>>()?;
    let mut total = Stats {
        loglik: 0.0,
        counts: vec![0.0; k],
        first: vec![DVector::zeros(d); k],
        scatter: vec![DMatrix::zeros(d, d); k],
    };
    for part in parts {
        total.loglik += part.loglik;
        for j in 0..k {
            total.counts[j] += part.counts[j];
            total.first[j] += &part.first[j];
            total.scatter[j] += &part.scatter[j];
        }
    }
    let alpha = softmax_with_zero(&p.logits);
    let grad = MeanCovTangent {
        means: (0..k).map(|j| chol_solve(p.covs[j].cholesky(), &total.first[j])).collect(),
        covs: (0..k)
            .map(|j| {
                let g = (&total.scatter[j] - p.covs[j].matrix() * total.counts[j]) * 0.5;
                TangentVector::new(symmetrize(&g))
            })
            .collect::<Result<_>>()?,
        logits: DVector::from_fn(k - 1, |j, _| total.counts[j] - n as f64 * alpha[j]),
    };
    Ok((total.loglik, grad))
}

/// `(L Lᵀ)⁻¹ b` for a lower-triangular factor with positive diagonal.
fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l.solve_lower_triangular(b).expect("positive diagonal");
    l.tr_solve_lower_triangular(&y).expect("positive diagonal")
}

/// Negated plain log-likelihood on [`MeanCovManifold`].
#[derive(Debug, Clone)]
pub struct MeanCovProblem {
    /// Samples as columns.
    x: DMatrix<f64>,
    manifold: MeanCovManifold,
}

impl MeanCovProblem {
    /// `samples` is `n×d`, one sample per row.
    pub fn new(samples: &DMatrix<f64>, retraction: RetractionKind) -> Result<Self> {
        if samples.nrows() == 0 {
            return Err(Error::arg("cannot optimize over an empty dataset"));
        }
        Ok(MeanCovProblem {
            x: samples.transpose(),
            manifold: MeanCovManifold { retraction },
        })
    }
}

impl Objective for MeanCovProblem {
    type M = MeanCovManifold;

    fn manifold(&self) -> &MeanCovManifold {
        &self.manifold
    }

    fn value(&self, p: &MeanCovParams) -> Result<f64> {
        Ok(-loglik_and_grad(p, &self.x)?.0)
    }

    fn value_and_grad(&self, p: &MeanCovParams) -> Result<(f64, MeanCovTangent)> {
        let (v, mut g) = loglik_and_grad(p, &self.x)?;
        g.scale_mut(-1.0);
        Ok((-v, g))
    }
}
