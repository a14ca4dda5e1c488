//! Riemannian solvers over any [`Manifold`]: LBFGS, conjugate gradients and
//! stochastic gradient descent, all in the minimization convention.
//!
//! Evaluation accounting: a value or a gradient counts 1 each, a line-search
//! probe (value and gradient) counts 2, and a stochastic gradient on `b` of
//! `n` samples counts `b/n`.

mod cg;
mod lbfgs;
mod sgd;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linesearch::WolfeConfig;
use crate::manifold::Manifold;

pub use cg::cg;
pub use lbfgs::lbfgs;
pub use sgd::{
    iterate_bound_monitor, iterate_bounds, randomized_output_probabilities, sgd, sgd_observed, sgd_randomized_output, BoundReport, Sampling,
    ScheduleKind, SgdOptions, SgdOutput, SgdSchedule,
};

pub type PointOf<O> = <<O as Objective>::M as Manifold>::Point;
pub type TangentOf<O> = <<O as Objective>::M as Manifold>::Tangent;

/// A smooth cost on a manifold with its Riemannian gradient.
pub trait Objective: Sync {
    type M: Manifold;

    fn manifold(&self) -> &Self::M;

    fn value(&self, x: &PointOf<Self>) -> Result<f64>;

    fn value_and_grad(&self, x: &PointOf<Self>) -> Result<(f64, TangentOf<Self>)>;
}

/// A finite-sum cost `Σᵢ fᵢ` whose gradient can be estimated from a subset.
pub trait StochasticObjective: Objective {
    fn sample_count(&self) -> usize;

    /// `(n/b) Σ_{i∈batch} ∇fᵢ(x)`, unbiased for the full gradient.
    fn stochastic_grad(&self, x: &PointOf<Self>, batch: &[usize]) -> Result<TangentOf<Self>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub evals: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

/// Per-iterate records with strictly increasing evaluation counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; a record that does not advance the evaluation count
    /// replaces the previous one.
    pub fn push(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last_mut() {
            if record.evals <= last.evals {
                *last = record;
                return;
            }
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn best_objective(&self) -> Option<f64> {
        self.records.iter().map(|r| r.objective).reduce(f64::min)
    }

    /// Smallest objective among records with at most `evals` evaluations.
    pub fn best_within(&self, evals: f64) -> Option<f64> {
        self.records.iter().take_while(|r| r.evals <= evals).map(|r| r.objective).reduce(f64::min)
    }

    /// First evaluation count at which the objective is within `gap` of `target`.
    pub fn evals_to_reach(&self, target: f64, gap: f64) -> Option<f64> {
        self.records.iter().find(|r| r.objective - target <= gap).map(|r| r.evals)
    }

    /// Writes `evals,objective,grad_norm,wall_ms`. Objectives are multiplied
    /// by `sign`; wall times are written as 0 unless `with_wall_time`; an
    /// unavailable gradient norm is an empty field.
    pub fn write_csv<W: Write>(&self, out: W, sign: f64, with_wall_time: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["evals", "objective", "grad_norm", "wall_ms"]).map_err(csv_err)?;
        for r in &self.records {
            let wall = if with_wall_time { r.wall_ms } else { 0.0 };
            w.write_record([
                r.evals.to_string(),
                (sign * r.objective).to_string(),
                if r.grad_norm.is_finite() {
                    r.grad_norm.to_string()
                } else {
                    String::new()
                },
                wall.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    FunctionTolerance,
    GradientTolerance,
    IterationLimit,
    EvaluationLimit,
    EpochBudget,
    /// The line search found no decrease even along the negative gradient.
    LineSearchFailure,
}

impl StopReason {
    pub fn is_degraded(&self) -> bool {
        matches!(self, StopReason::LineSearchFailure)
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::FunctionTolerance => "function-tolerance",
            StopReason::GradientTolerance => "gradient-tolerance",
            StopReason::IterationLimit => "iteration-limit",
            StopReason::EvaluationLimit => "evaluation-limit",
            StopReason::EpochBudget => "epoch-budget",
            StopReason::LineSearchFailure => "line-search-failure",
        })
    }
}

/// Options shared by the batch solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOptions {
    pub max_iter: usize,
    /// Absolute change in objective between iterates that stops the run.
    pub ftol: f64,
    /// Gradient norm (in the manifold metric) that stops the run.
    pub gtol: f64,
    pub max_evals: Option<f64>,
    /// LBFGS memory length; ignored by CG.
    pub memory: usize,
    pub wolfe: WolfeConfig,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            max_iter: 1000,
            ftol: 1e-6,
            gtol: 1e-10,
            max_evals: None,
            memory: 10,
            wolfe: WolfeConfig::default(),
        }
    }
}

impl BatchOptions {
    /// Defaults with the tighter curvature constant suited to CG.
    pub fn for_cg() -> Self {
        BatchOptions {
            wolfe: WolfeConfig {
                c2: 0.1,
                ..WolfeConfig::default()
            },
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        self.wolfe.validate()?;
        if !(self.ftol >= 0.0) || !(self.gtol >= 0.0) {
            return Err(crate::error::Error::arg("tolerances must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutput<P> {
    pub x: P,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evals: f64,
    pub stop: StopReason,
    pub trace: ConvergenceTrace,
}

pub(crate) struct Clock(Instant);

impl Clock {
    pub fn start() -> Self {
        Clock(Instant::now())
    }

    pub fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// A point reached by a line-search probe together with what the solver
/// needs if the step is accepted.
pub(crate) struct Probed<P, T> {
    pub alpha: f64,
    pub x: P,
    pub value: f64,
    pub grad: T,
    /// The search direction moved to the new point.
    pub direction: T,
}

/// Runs a strong-Wolfe search along `R_x(α d)`; `φ′(α)` uses the transported
/// direction. Returns the accepted probe and the probe count.
pub(crate) fn search_along<O: Objective>(
    problem: &O,
    x: &PointOf<O>,
    value: f64,
    direction: &TangentOf<O>,
    slope: f64,
    wolfe: &WolfeConfig,
) -> (Result<(Probed<PointOf<O>, TangentOf<O>>, bool)>, usize) {
    use crate::manifold::Tangent;
    let m = problem.manifold();
    let mut seen: Vec<Probed<PointOf<O>, TangentOf<O>>> = Vec::new();
    let mut count = 0usize;
    let mut probe = |a: f64| -> (f64, f64) {
        count += 1;
        let step = direction.scaled(a);
        let eval = m.retract(x, &step).and_then(|xn| {
            let (f, g) = problem.value_and_grad(&xn)?;
            let td = m.transport(x, &xn, &[direction])?.pop().expect("one vector");
            Ok((xn, f, g, td))
        });
        match eval {
            Ok((xn, f, g, td)) if f.is_finite() => {
                let dphi = m.inner(&xn, &g, &td);
                seen.push(Probed {
                    alpha: a,
                    x: xn,
                    value: f,
                    grad: g,
                    direction: td,
                });
                (f, dphi)
            }
            _ => (f64::INFINITY, f64::NAN),
        }
    };
    let result = crate::linesearch::wolfe_search(&mut probe, value, slope, wolfe);
    let out = result.map(|r| {
        let idx = seen.iter().rposition(|p| p.alpha == r.alpha).expect("accepted step was probed");
        (seen.swap_remove(idx), r.wolfe)
    });
    (out, count)
}
