use std::collections::VecDeque;

use super::{search_along, BatchOptions, Clock, ConvergenceTrace, Objective, PointOf, SolverOutput, StopReason, TangentOf, TraceRecord};
use crate::error::Result;
use crate::linesearch::{initial_step, WolfeConfig};
use crate::manifold::{Manifold, Tangent};

/// A curvature pair at the current point with `⟨s, y⟩ > 1e-10 ‖s‖‖y‖`.
struct Pair<T> {
    s: T,
    y: T,
    sy: f64,
}

fn two_loop<M: Manifold>(m: &M, x: &M::Point, g: &M::Tangent, memory: &VecDeque<Pair<M::Tangent>>) -> M::Tangent {
    let mut q = g.clone();
    let mut coeffs = Vec::with_capacity(memory.len());
    for p in memory.iter().rev() {
        let a = m.inner(x, &p.s, &q) / p.sy;
        q.axpy(-a, &p.y);
        coeffs.push(a);
    }
    if let Some(newest) = memory.back() {
        let yy = m.inner(x, &newest.y, &newest.y);
        q.scale_mut(newest.sy / yy);
    }
    for (p, a) in memory.iter().zip(coeffs.into_iter().rev()) {
        let b = m.inner(x, &p.y, &q) / p.sy;
        q.axpy(a - b, &p.s);
    }
    q.scale_mut(-1.0);
    q
}

/// Riemannian LBFGS with strong-Wolfe steps.
///
/// Every stored pair is transported to the new iterate each iteration and
/// the two-loop recursion runs in the tangent space at the current point.
/// Memory is cleared whenever the recursion fails to produce a descent
/// direction or the line search returns a non-Wolfe step.
pub fn lbfgs<O: Objective>(problem: &O, x0: PointOf<O>, opts: &BatchOptions) -> Result<SolverOutput<PointOf<O>>> {
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
    let mut memory: VecDeque<Pair<TangentOf<O>>> = VecDeque::with_capacity(opts.memory);
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
        let mut d = two_loop(m, &x, &g, &memory);
        let mut slope = m.inner(&x, &g, &d);
        if !(slope < 0.0) || !slope.is_finite() {
            memory.clear();
            d = g.scaled(-1.0);
            slope = -gnorm * gnorm;
        }
        let alpha_init = match f_prev {
            None => (1.0 / gnorm).min(1.0),
            Some(_) if memory.is_empty() => initial_step(f, f_prev, slope),
            Some(_) => initial_step(f, f_prev, slope).min(1.0),
        };
        let wolfe = WolfeConfig { alpha_init, ..opts.wolfe };
        let (found, probes) = search_along(problem, &x, f, &d, slope, &wolfe);
        evals += 2.0 * probes as f64;
        let (step, is_wolfe) = match found {
            Ok(v) => v,
            Err(_) if !memory.is_empty() => {
                memory.clear();
                continue;
            }
            Err(_) => break StopReason::LineSearchFailure,
        };
        iterations += 1;

        let mut carry: Vec<&TangentOf<O>> = vec![&g];
        for p in &memory {
            carry.push(&p.s);
            carry.push(&p.y);
        }
        let mut moved = m.transport(&x, &step.x, &carry)?.into_iter();
        let g_old = moved.next().expect("gradient transported");
        let mut fresh = VecDeque::with_capacity(opts.memory);
        if is_wolfe {
            // Non-isometric transports change inner products, so old pairs are
            // re-admitted under the same test as new ones.
            while let (Some(s), Some(y)) = (moved.next(), moved.next()) {
                let sy = m.inner(&step.x, &s, &y);
                if sy > 1e-10 * m.norm(&step.x, &s) * m.norm(&step.x, &y) {
                    fresh.push_back(Pair { s, y, sy });
                }
            }
            let s = step.direction.scaled(step.alpha);
            let mut y = step.grad.clone();
            y.axpy(-1.0, &g_old);
            let sy = m.inner(&step.x, &s, &y);
            let bound = 1e-10 * m.norm(&step.x, &s) * m.norm(&step.x, &y);
            if sy > bound {
                if fresh.len() == opts.memory.max(1) {
                    fresh.pop_front();
                }
                fresh.push_back(Pair { s, y, sy });
            }
        }
        memory = fresh;

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
