//! Penalized EM from a k-means++ start; prints the monotone objective path.

use riemmix::data::{kmeanspp_init, random_mixture, sample_gmm};
use riemmix::em::{em_fit, EmOptions};
use riemmix::objective::PenaltyConfig;

fn main() {
    let x = sample_gmm(&random_mixture(4, 3, 2.0, 5).unwrap(), 2000, 5).unwrap().rows;
    let cfg = PenaltyConfig::from_data(&x, 2.0, 1.0, 1.0, None, 0.01).unwrap();
    let init = kmeanspp_init(&x, 4, 30, 1, &cfg).unwrap();
    let out = em_fit(&x, &cfg, &init.estimate, &EmOptions::default()).unwrap();
    println!("stop: {}, {} iterations, {} evaluations", out.stop, out.iterations, out.evals);
    for (i, v) in out.objectives.iter().enumerate().step_by(out.objectives.len().div_ceil(10)) {
        println!("iteration {i:>4}: {v:.8}");
    }
    println!("final: {:.8}", out.objectives.last().unwrap());
    println!("weights: {:.4?}", out.estimate.weights.as_slice());
}
