use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Clock, ConvergenceTrace, PointOf, SolverOutput, StochasticObjective, StopReason, TraceRecord};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{Manifold, Tangent};
use crate::objective::PenaltyConfig;
use crate::product::GmmParams;
use crate::random::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Geometric interpolation from `start` to `end` over the horizon.
    ExponentialDecay,
    /// Constant `c/√T`.
    InvSqrt,
    /// Constant `min(1/L, c/(σ√T))`.
    LipschitzCapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdSchedule {
    pub kind: ScheduleKind,
    pub start: f64,
    pub end: f64,
    /// Total number of updates `T`.
    pub horizon: usize,
    pub c: f64,
    pub lipschitz: f64,
    pub sigma: f64,
}

impl SgdSchedule {
    pub fn exponential(start: f64, end: f64, horizon: usize) -> Result<Self> {
        let s = SgdSchedule {
            kind: ScheduleKind::ExponentialDecay,
            start,
            end,
            horizon,
            c: 0.0,
            lipschitz: 0.0,
            sigma: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn inv_sqrt(c: f64, horizon: usize) -> Result<Self> {
        let s = SgdSchedule {
            kind: ScheduleKind::InvSqrt,
            start: 0.0,
            end: 0.0,
            horizon,
            c,
            lipschitz: 0.0,
            sigma: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn lipschitz_capped(lipschitz: f64, sigma: f64, c: f64, horizon: usize) -> Result<Self> {
        let s = SgdSchedule {
            kind: ScheduleKind::LipschitzCapped,
            start: 0.0,
            end: 0.0,
            horizon,
            c,
            lipschitz,
            sigma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::arg("schedule horizon must be positive"));
        }
        let ok = match self.kind {
            ScheduleKind::ExponentialDecay => self.end > 0.0 && self.start >= self.end && self.start.is_finite(),
            ScheduleKind::InvSqrt => self.c > 0.0 && self.c.is_finite(),
            ScheduleKind::LipschitzCapped => self.lipschitz > 0.0 && self.sigma > 0.0 && self.c > 0.0 && self.lipschitz.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid step-size schedule {self:?}")))
        }
    }

    /// Step size of update `t` (0-based).
    pub fn step(&self, t: usize) -> f64 {
        let horizon = self.horizon as f64;
        match self.kind {
            ScheduleKind::ExponentialDecay => {
                if self.horizon == 1 {
                    self.start
                } else {
                    let frac = t.min(self.horizon - 1) as f64 / (horizon - 1.0);
                    self.start * (self.end / self.start).powf(frac)
                }
            }
            ScheduleKind::InvSqrt => self.c / horizon.sqrt(),
            ScheduleKind::LipschitzCapped => (1.0 / self.lipschitz).min(self.c / (self.sigma * horizon.sqrt())),
        }
    }

    pub fn steps(&self) -> Vec<f64> {
        (0..self.horizon).map(|t| self.step(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Each epoch visits a fresh random partition of the samples.
    #[default]
    WithoutReplacement,
    /// Every batch is drawn uniformly with replacement.
    WithReplacement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdOptions {
    pub batch_size: usize,
    pub epochs: usize,
    pub sampling: Sampling,
    pub seed: u64,
    /// Full objective/gradient checkpoints per epoch. These are diagnostics
    /// and are not counted as evaluations.
    pub checkpoints_per_epoch: usize,
    /// Keep every iterate (for randomized output).
    pub keep_iterates: bool,
    pub max_halvings: usize,
}

impl Default for SgdOptions {
    fn default() -> Self {
        SgdOptions {
            batch_size: 1,
            epochs: 10,
            sampling: Sampling::default(),
            seed: 0,
            checkpoints_per_epoch: 10,
            keep_iterates: false,
            max_halvings: 30,
        }
    }
}

impl SgdOptions {
    pub fn updates_per_epoch(&self, n: usize) -> usize {
        (n / self.batch_size.max(1)).max(1)
    }

    pub fn total_updates(&self, n: usize) -> usize {
        self.updates_per_epoch(n) * self.epochs
    }
}

#[derive(Debug, Clone)]
pub struct SgdOutput<P> {
    /// Final iterate and checkpoint trace.
    pub result: SolverOutput<P>,
    /// Checkpointed iterate with the smallest objective.
    pub best: P,
    pub best_value: f64,
    /// Iterates before every update and the final one, when requested.
    pub iterates: Vec<P>,
    /// Step size actually used for every update (after any halving).
    pub steps: Vec<f64>,
}

/// Riemannian SGD: `x ← R_x(−η_t/n · ĝ)` with `ĝ` the unbiased batch
/// estimate, i.e. a step along the batch-mean per-sample gradient.
pub fn sgd<O: StochasticObjective>(problem: &O, x0: PointOf<O>, schedule: &SgdSchedule, opts: &SgdOptions) -> Result<SgdOutput<PointOf<O>>> {
    sgd_observed(problem, x0, schedule, opts, |_, _| Ok(()))
}

/// [`sgd`] with a callback after every update, given the update count and
/// the new iterate. A callback error aborts the run.
pub fn sgd_observed<O: StochasticObjective>(
    problem: &O,
    x0: PointOf<O>,
    schedule: &SgdSchedule,
    opts: &SgdOptions,
    mut observer: impl FnMut(usize, &PointOf<O>) -> Result<()>,
) -> Result<SgdOutput<PointOf<O>>> {
    schedule.validate()?;
    let n = problem.sample_count();
    let b = opts.batch_size;
    if b == 0 || b > n {
        return Err(Error::arg(format!("batch size {b} must be in 1..={n}")));
    }
    if opts.epochs == 0 {
        return Err(Error::arg("epoch budget must be positive"));
    }
    let m = problem.manifold();
    let clock = Clock::start();
    let mut rng = random::seeded(opts.seed);
    let per_epoch = opts.updates_per_epoch(n);
    let total = per_epoch * opts.epochs;
    let every = per_epoch.div_ceil(opts.checkpoints_per_epoch.max(1)).max(1);
    let cost = b as f64 / n as f64;

    let mut x = x0;
    let mut trace = ConvergenceTrace::new();
    let (f0, g0) = problem.value_and_grad(&x)?;
    let mut last = (f0, m.norm(&x, &g0));
    trace.push(TraceRecord {
        evals: 0.0,
        objective: last.0,
        grad_norm: last.1,
        wall_ms: clock.ms(),
    });
    let mut best = (x.clone(), f0);
    let mut iterates = Vec::new();
    let mut steps = Vec::with_capacity(total);
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch = vec![0usize; b];

    for t in 0..total {
        let slot = t % per_epoch;
        match opts.sampling {
            Sampling::WithoutReplacement => {
                if slot == 0 {
                    order.shuffle(&mut rng);
                }
                batch.copy_from_slice(&order[slot * b..(slot + 1) * b]);
            }
            Sampling::WithReplacement => {
                for v in batch.iter_mut() {
                    *v = rng.random_range(0..n);
                }
            }
        }
        if opts.keep_iterates {
            iterates.push(x.clone());
        }
        let g = problem.stochastic_grad(&x, &batch)?;
        let mut eta = schedule.step(t);
        let mut halvings = 0;
        x = loop {
            match m.retract(&x, &g.scaled(-eta / n as f64)) {
                Ok(next) => break next,
                Err(e @ Error::RetractionFailure { .. }) | Err(e @ Error::Overflow(_)) => {
                    if halvings == opts.max_halvings {
                        return Err(Error::arg(format!("update {t}: step still infeasible after {halvings} halvings ({e})")));
                    }
                    halvings += 1;
                    eta *= 0.5;
                }
                Err(e) => return Err(e),
            }
        };
        steps.push(eta);
        observer(t + 1, &x)?;
        let done = t + 1;
        if done % every == 0 || done == total {
            let (f, g) = problem.value_and_grad(&x)?;
            last = (f, m.norm(&x, &g));
            if f < best.1 {
                best = (x.clone(), f);
            }
            trace.push(TraceRecord {
                evals: done as f64 * cost,
                objective: f,
                grad_norm: last.1,
                wall_ms: clock.ms(),
            });
        }
    }
    if opts.keep_iterates {
        iterates.push(x.clone());
    }
    Ok(SgdOutput {
        result: SolverOutput {
            x,
            value: last.0,
            grad_norm: last.1,
            iterations: total,
            evals: total as f64 * cost,
            stop: StopReason::EpochBudget,
            trace,
        },
        best: best.0,
        best_value: best.1,
        iterates,
        steps,
    })
}

/// `p_t = (2η_t − Lη_t²) / Σ_s (2η_s − Lη_s²)`.
pub fn randomized_output_probabilities(steps: &[f64], lipschitz: f64) -> Result<Vec<f64>> {
    if steps.is_empty() {
        return Err(Error::arg("no steps to choose from"));
    }
    let mass: Vec<f64> = steps.iter().map(|e| 2.0 * e - lipschitz * e * e).collect();
    if mass.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::arg("every 2η − Lη² must be positive"));
    }
    let z: f64 = mass.iter().sum();
    Ok(mass.into_iter().map(|p| p / z).collect())
}

/// Draws one of `iterates` (paired with `steps`) with probability `p_t`.
pub fn sgd_randomized_output<P: Clone>(iterates: &[P], steps: &[f64], lipschitz: f64, rng: &mut Rng) -> Result<P> {
    if iterates.len() != steps.len() {
        return Err(Error::arg("iterates and steps differ in length"));
    }
    let p = randomized_output_probabilities(steps, lipschitz)?;
    let dist = WeightedIndex::new(&p).map_err(|e| Error::arg(e.to_string()))?;
    Ok(iterates[dist.sample(rng)].clone())
}

/// `(lower, upper)` eigenvalue bounds that SGD iterates with `η ≤ 1` and
/// the Euclidean retraction cannot leave:
/// `βλmin(Ψ)/(n+ρ)` and `max_{w∈[0,1]} (w n maxᵢ‖yᵢ‖² + β‖Ψ‖)/(w n + ρ)`.
pub fn iterate_bounds(cfg: &PenaltyConfig, n: usize, max_norm_sq: f64) -> (f64, f64) {
    let n = n as f64;
    let lower = linalg::min_eigenvalue(&cfg.psi).max(0.0) * cfg.beta / (n + cfg.rho);
    let psi_norm = linalg::max_eigenvalue(&cfg.psi).max(0.0);
    // The ratio is monotone in w, so an endpoint attains the maximum.
    let at = |w: f64| (w * n * max_norm_sq + cfg.beta * psi_norm) / (w * n + cfg.rho);
    let upper = if cfg.rho > 0.0 { at(0.0).max(at(1.0)) } else { at(1.0) };
    (lower, upper)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lower: f64,
    pub upper: f64,
    /// `(λmin, λmax)` of each component.
    pub extremes: Vec<(f64, f64)>,
    pub within: bool,
}

/// Checks every component's spectrum against [`iterate_bounds`], with a
/// relative slack of 1e-10 for rounding.
pub fn iterate_bound_monitor(params: &GmmParams, cfg: &PenaltyConfig, n: usize, max_norm_sq: f64) -> BoundReport {
    let (lower, upper) = iterate_bounds(cfg, n, max_norm_sq);
    let extremes: Vec<(f64, f64)> = params
        .components()
        .iter()
        .map(|s| {
            let ev = linalg::sym_eigenvalues(s.matrix());
            (ev.min(), ev.max())
        })
        .collect();
    let within = extremes
        .iter()
        .all(|(lo, hi)| *lo >= lower * (1.0 - 1e-10) && *hi <= upper * (1.0 + 1e-10));
    BoundReport {
        lower,
        upper,
        extremes,
        within,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_schedule_interpolates_geometrically() {
        let s = SgdSchedule::exponential(1.0, 1e-3, 4).unwrap();
        let steps = s.steps();
        for (got, want) in steps.iter().zip([1.0, 1e-1, 1e-2, 1e-3]) {
            assert!((got - want).abs() < 1e-15 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(SgdSchedule::exponential(1e-3, 1.0, 4).is_err());
        assert!(SgdSchedule::exponential(1.0, 0.0, 4).is_err());
        assert!(SgdSchedule::inv_sqrt(1.0, 0).is_err());
        let s = SgdSchedule::inv_sqrt(2.0, 16).unwrap();
        assert_eq!(s.step(0), 0.5);
        assert_eq!(s.step(15), 0.5);
        let s = SgdSchedule::lipschitz_capped(4.0, 1.0, 10.0, 4).unwrap();
        assert_eq!(s.step(0), 0.25);
    }

    #[test]
    fn randomized_output_weights() {
        let l = 2.0;
        let p = randomized_output_probabilities(&[1.0 / l, 0.5 / l], l).unwrap();
        assert!((p[0] - 1.0 / 1.75).abs() < 1e-15);
        assert!((p[1] - 0.75 / 1.75).abs() < 1e-15);
        let p = randomized_output_probabilities(&[0.1; 5], 1.0).unwrap();
        assert!(p.iter().all(|v| (v - 0.2).abs() < 1e-15));
        assert!(randomized_output_probabilities(&[1.0], 2.0).is_err());
    }

    #[test]
    fn randomized_output_frequencies() {
        let steps = [0.1, 0.2, 0.3, 0.05];
        let l = 1.5;
        let p = randomized_output_probabilities(&steps, l).unwrap();
        let mut rng = random::seeded(11);
        let idx = [0usize, 1, 2, 3];
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[sgd_randomized_output(&idx, &steps, l, &mut rng).unwrap()] += 1;
        }
        for (c, pt) in counts.iter().zip(&p) {
            let sd = (draws as f64 * pt * (1.0 - pt)).sqrt();
            assert!((*c as f64 - draws as f64 * pt).abs() <= 3.0 * sd, "{counts:?} {p:?}");
        }
    }
}
