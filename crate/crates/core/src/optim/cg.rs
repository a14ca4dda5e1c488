use super::{search_along, BatchOptions, Clock, ConvergenceTrace, Objective, PointOf, SolverOutput, StopReason, TraceRecord};
use crate::error::Result;
use crate::linesearch::{initial_step, WolfeConfig};
use crate::manifold::{Manifold, Tangent};

/// Riemannian nonlinear conjugate gradients with the Polak–Ribière+
/// coefficient. The previous direction is transported to the new point;
/// whenever the combined direction is not a descent direction the method
/// restarts from the negative gradient.
pub fn cg<O: Objective>(problem: &O, x0: PointOf<O>, opts: &BatchOptions) -> Result<SolverOutput<PointOf<O>>> {
    opts.validate()?;
    let m = problem.manifold();
    let clock = Clock::start();
    let mut x = x0;
    let (mut f, mut g) = problem.value_and_grad(&x)?;
    let mut gnorm = m.norm(&x, &g);
    let mut evals = 2.0;
    let mut trace = ConvergenceTrace::new();
    trace.push(TraceRecord {
        evals,
        objective: f,
        grad_norm: gnorm,
        wall_ms: clock.ms(),
    });
    let mut d = g.scaled(-1.0);
    let mut restarted = true;
    let mut f_prev: Option<f64> = None;
    let mut iterations = 0;
    let stop = loop {
        if gnorm <= opts.gtol {
            break StopReason::GradientTolerance;
        }
        if iterations >= opts.max_iter {
            break StopReason::IterationLimit;
        }
        if opts.max_evals.is_some_and(|cap| evals >= cap) {
            break StopReason::EvaluationLimit;
        }
        let mut slope = m.inner(&x, &g, &d);
        if !(slope < 0.0) || !slope.is_finite() {
            d = g.scaled(-1.0);
            slope = -gnorm * gnorm;
            restarted = true;
        }
        let alpha_init = match f_prev {
            None => (1.0 / gnorm).min(1.0),
            Some(_) => initial_step(f, f_prev, slope),
        };
        let wolfe = WolfeConfig { alpha_init, ..opts.wolfe };
        let (found, probes) = search_along(problem, &x, f, &d, slope, &wolfe);
        evals += 2.0 * probes as f64;
        let step = match found {
            Ok((step, _)) => step,
            Err(_) if !restarted => {
                d = g.scaled(-1.0);
                restarted = true;
                continue;
            }
            Err(_) => break StopReason::LineSearchFailure,
        };
        iterations += 1;

        let g_old = m.transport(&x, &step.x, &[&g])?.pop().expect("one vector");
        let old_sq = gnorm * gnorm;
        let mut diff = step.grad.clone();
        diff.axpy(-1.0, &g_old);
        let beta = (m.inner(&step.x, &step.grad, &diff) / old_sq).max(0.0);
        let mut next = step.grad.scaled(-1.0);
        if beta.is_finite() {
            next.axpy(beta, &step.direction);
        }
        d = next;
        restarted = false;

        f_prev = Some(f);
        x = step.x;
        f = step.value;
        g = step.grad;
        gnorm = m.norm(&x, &g);
        trace.push(TraceRecord {
            evals,
            objective: f,
            grad_norm: gnorm,
            wall_ms: clock.ms(),
        });
        if (f_prev.expect("set above") - f).abs() < opts.ftol {
            break StopReason::FunctionTolerance;
        }
    };
    Ok(SolverOutput {
        x,
        value: f,
        grad_norm: gnorm,
        iterations,
        evals,
        stop,
        trace,
    })
}
