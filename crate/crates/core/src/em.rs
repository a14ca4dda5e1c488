//! Penalized (MAP) expectation–maximization, the classical baseline.
//!
//! The iteration works on the lifted blocks and maximizes exactly the
//! penalized lifted objective, so EM and the Riemannian solvers are scored by
//! one function. With responsibilities fixed, the complete-data objective is
//! maximized in closed form by
//!
//! `Sⱼ = (Mⱼ + βΨ)/(Nⱼ + ρ)`, `αⱼ ∝ Nⱼ + ζ`,
//!
//! where `Nⱼ = Σᵢ wᵢⱼ` and `Mⱼ = Σᵢ wᵢⱼ yᵢyᵢᵀ`. When `ρ = βκ` (the derived
//! penalty) the scale entry stays at 1 and the block update reads, in mean
//! and covariance form,
//!
//! `μⱼ = (Σᵢ wᵢⱼ xᵢ + βκλ)/(Nⱼ + βκ)`,
//! `Σⱼ = [αΛ + βκ(μⱼ−λ)(μⱼ−λ)ᵀ + Σᵢ wᵢⱼ(xᵢ−μⱼ)(xᵢ−μⱼ)ᵀ]/(Nⱼ + ρ)`.
//!
//! Each full iteration is charged two evaluations (one E-step, one M-step).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::objective::{self, augment, embed_mixture, penalized_objective, recover_mixture, AugmentedData, MixtureEstimate, PenaltyConfig};
use crate::optim::{ConvergenceTrace, StopReason, TraceRecord};
use crate::product::GmmParams;
use crate::spd::SpdPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Absolute change in objective that stops the run.
    pub ftol: f64,
    pub max_evals: Option<f64>,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 1000,
            ftol: 1e-6,
            max_evals: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmOutput {
    pub estimate: MixtureEstimate,
    pub params: GmmParams,
    /// Penalized objective (maximization convention) before the first and
    /// after every iteration.
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub evals: f64,
    pub stop: StopReason,
    /// Trace in the minimization convention shared with the solvers.
    pub trace: ConvergenceTrace,
}

/// The penalized lifted objective at `est`, by delegation.
pub fn em_objective(est: &MixtureEstimate, data: &DMatrix<f64>, cfg: &PenaltyConfig) -> Result<f64> {
    penalized_objective(&embed_mixture(est)?, &augment(data)?, cfg)
}

/// One iteration from `params`: returns the updated parameters and the
/// penalized objective at the input.
pub fn em_step(params: &GmmParams, data: &AugmentedData, cfg: &PenaltyConfig) -> Result<(GmmParams, f64)> {
    let stats = objective::suff_stats(params, data.columns(), true)?;
    let value = stats.loglik
        + params.components().iter().map(|s| objective::penalty_psi(s, cfg)).sum::<f64>()
        + objective::penalty_phi(params.logits(), cfg.zeta);
    let scatter = stats.scatter.as_ref().expect("requested");
    let comps = (0..params.k())
        .map(|j| {
            let denom = stats.counts[j] + cfg.rho;
            if !(denom > 0.0) {
                return Err(Error::NotPositiveDefinite { min_eig: 0.0 }.at_component(j));
            }
            let s = (&scatter[j] + &cfg.psi * cfg.beta) / denom;
            SpdPoint::new(s).map_err(|e| e.at_component(j))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = params.k();
    let mass: Vec<f64> = stats.counts.iter().map(|n| n + cfg.zeta).collect();
    if mass.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::NonFinite("mixture weight (empty component without a weight prior)"));
    }
    let last = mass[k - 1].ln();
    let logits = DVector::from_iterator(k - 1, mass.iter().take(k - 1).map(|m| m.ln() - last));
    Ok((GmmParams::new(comps, logits)?, value))
}

/// Runs EM from `init` until the objective changes by less than `ftol`.
pub fn em_fit(data: &DMatrix<f64>, cfg: &PenaltyConfig, init: &MixtureEstimate, opts: &EmOptions) -> Result<EmOutput> {
    let k = init.k();
    if data.nrows() <= k {
        return Err(Error::arg(format!("EM needs more samples ({}) than components ({k})", data.nrows())));
    }
    if init.d() != data.ncols() {
        return Err(Error::Dimension {
            expected: data.ncols(),
            found: init.d(),
        });
    }
    let y = augment(data)?;
    em_fit_lifted(&y, cfg, embed_mixture(init)?, opts)
}

/// [`em_fit`] on already-lifted data and parameters.
pub fn em_fit_lifted(y: &AugmentedData, cfg: &PenaltyConfig, init: GmmParams, opts: &EmOptions) -> Result<EmOutput> {
    let started = std::time::Instant::now();
    let ms = || started.elapsed().as_secs_f64() * 1e3;
    let mut params = init;
    let mut trace = ConvergenceTrace::new();
    let mut objectives = Vec::new();
    let mut evals = 0.0;
    let mut iterations = 0;
    let mut pending = em_step(&params, y, cfg)?;
    let stop = loop {
        let (next, value) = pending;
        evals += 2.0;
        objectives.push(value);
        trace.push(TraceRecord {
            evals,
            objective: -value,
            grad_norm: f64::NAN,
            wall_ms: ms(),
        });
        if let [.., before, after] = objectives.as_slice() {
            if (after - before).abs() < opts.ftol {
                break StopReason::FunctionTolerance;
            }
        }
        if iterations >= opts.max_iter {
            break StopReason::IterationLimit;
        }
        if opts.max_evals.is_some_and(|cap| evals >= cap) {
            break StopReason::EvaluationLimit;
        }
        // Evaluating the next step also scores `next`, so the objective of an
        // accepted iterate is never computed twice.
        let candidate = em_step(&next, y, cfg)?;
        params = next;
        iterations += 1;
        pending = candidate;
    };
    Ok(EmOutput {
        estimate: recover_mixture(&params)?,
        params,
        objectives,
        iterations,
        evals,
        stop,
        trace,
    })
}
