//! Constant step η = c/√T on a fixed small mixture: the smallest squared
//! full-gradient norm seen within T updates, averaged over sampling seeds,
//! for horizons T and 4T.
//!
//! Usage: `sgd_rate [c] [T]`.

use riemmix::data::{kmeanspp_init, random_mixture, sample_gmm};
use riemmix::manifold::{Manifold, RetractionKind};
use riemmix::objective::{augment, embed_mixture, GmmProblem, PenaltyConfig};
use riemmix::optim::{sgd_observed, Objective, SgdOptions, SgdSchedule};

fn min_grad_sq(problem: &GmmProblem, x0: &riemmix::product::GmmParams, c: f64, horizon: usize, seed: u64) -> f64 {
    let n = 200;
    let batch = 2;
    let opts = SgdOptions {
        batch_size: batch,
        epochs: horizon.div_ceil(n / batch),
        seed,
        checkpoints_per_epoch: 1,
        ..SgdOptions::default()
    };
    let schedule = SgdSchedule::inv_sqrt(c, horizon).unwrap();
    let mut best = f64::INFINITY;
    let g0 = problem.value_and_grad(x0).unwrap().1;
    best = best.min(problem.manifold().norm(x0, &g0).powi(2));
    sgd_observed(problem, x0.clone(), &schedule, &opts, |t, x| {
        if t <= horizon {
            let (_, g) = problem.value_and_grad(x)?;
            best = best.min(problem.manifold().norm(x, &g).powi(2));
        }
        Ok(())
    })
    .unwrap();
    best
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let c: f64 = args.first().map_or(0.5, |s| s.parse().expect("number"));
    let horizon: usize = args.get(1).map_or(500, |s| s.parse().expect("integer"));
    let truth = random_mixture(2, 2, 4.0, 11).unwrap();
    let rows = sample_gmm(&truth, 200, 11).unwrap().rows;
    let cfg = PenaltyConfig::from_data(&rows, 2.0, 1.0, 1.0, None, 0.01).unwrap();
    let init = kmeanspp_init(&rows, 2, 1, 3, &cfg).unwrap();
    let x0 = embed_mixture(&init.estimate).unwrap();
    let problem = GmmProblem::new(augment(&rows).unwrap(), cfg, RetractionKind::Euclidean).unwrap();
    let mean = |h: usize| (0..10).map(|s| min_grad_sq(&problem, &x0, c, h, s)).sum::<f64>() / 10.0;
    let (short, long) = (mean(horizon), mean(4 * horizon));
    println!(
        "c={c} T={horizon}: mean min |grad|^2 {short:.4e} at T, {long:.4e} at 4T, ratio {:.3}",
        long / short
    );
}
