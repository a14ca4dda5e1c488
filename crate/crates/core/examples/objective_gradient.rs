//! The penalized lifted objective of a random mixture, its Riemannian
//! gradient, and a central-difference check along one tangent direction.

use riemmix::data::{random_mixture, sample_gmm};
use riemmix::manifold::{RetractionKind, Tangent};
use riemmix::objective::{augment, penalized_objective, penalized_value_and_grad, recover_mixture, PenaltyConfig};
use riemmix::product::{product_metric, product_retract};
use riemmix::random::{random_gmm_params, random_gmm_tangent, seeded};

fn main() {
    let (k, d) = (3, 4);
    let x = sample_gmm(&random_mixture(k, d, 3.0, 1).unwrap(), 500, 1).unwrap().rows;
    let y = augment(&x).unwrap();
    let cfg = PenaltyConfig::from_data(&x, 2.0, 1.0, 1.0, None, 0.01).unwrap();
    let mut rng = seeded(2);
    let params = random_gmm_params(k, d, &mut rng);
    let (value, grad) = penalized_value_and_grad(&params, &y, &cfg).unwrap();
    println!("penalized log-likelihood: {value:.6}");
    println!("weights at this point: {:.4?}", recover_mixture(&params).unwrap().weights.as_slice());

    let xi = random_gmm_tangent(k, d, 1.0, &mut rng);
    let h = 1e-5;
    let at = |t: f64| penalized_objective(&product_retract(&params, &xi.scaled(t), RetractionKind::Exp).unwrap(), &y, &cfg).unwrap();
    let fd = (at(h) - at(-h)) / (2.0 * h);
    let exact = product_metric(&params, &grad, &xi).unwrap();
    println!("directional derivative: gradient {exact:.8}, central difference {fd:.8}");
}
