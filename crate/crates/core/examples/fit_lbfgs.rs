//! Fits a three-component mixture with Riemannian LBFGS from a k-means++
//! start and compares the recovered weights and means with the truth.

use riemmix::data::{kmeanspp_init, random_mixture, sample_gmm};
use riemmix::manifold::RetractionKind;
use riemmix::objective::{augment, embed_mixture, recover_mixture, GmmProblem, PenaltyConfig};
use riemmix::optim::{lbfgs, BatchOptions};

fn main() {
    let (k, d, n) = (3, 5, 3000);
    let truth = random_mixture(k, d, 6.0, 42).unwrap();
    let x = sample_gmm(&truth, n, 42).unwrap().rows;
    let cfg = PenaltyConfig::from_data(&x, 2.0, 1.0, 1.0, None, 0.01).unwrap();
    let init = kmeanspp_init(&x, k, 30, 0, &cfg).unwrap();
    let problem = GmmProblem::new(augment(&x).unwrap(), cfg, RetractionKind::Exp).unwrap();
    let out = lbfgs(&problem, embed_mixture(&init.estimate).unwrap(), &BatchOptions::default()).unwrap();
    println!(
        "stop: {}, {} iterations, {} evaluations, penalized log-likelihood {:.6}, |grad| {:.2e}",
        out.stop, out.iterations, out.evals, -out.value, out.grad_norm
    );
    let est = recover_mixture(&out.x).unwrap();
    let perm = est.alignment_to(&truth);
    let est = est.reordered(&perm);
    for j in 0..k {
        println!(
            "component {j}: weight {:.3} (truth {:.3}), mean error {:.3}",
            est.weights[j],
            truth.weights[j],
            (&est.means[j] - &truth.means[j]).norm()
        );
    }
}
