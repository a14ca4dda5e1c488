//! Strong-Wolfe search on a one-dimensional function with a narrow valley.

use riemmix::linesearch::{wolfe_search, WolfeConfig};

fn main() {
    // φ(α) = (α - 3)² + 0.5 sin(4α)
    let mut calls = Vec::new();
    let mut phi = |a: f64| {
        calls.push(a);
        ((a - 3.0).powi(2) + 0.5 * (4.0 * a).sin(), 2.0 * (a - 3.0) + 2.0 * (4.0 * a).cos())
    };
    let (f0, g0) = phi(0.0);
    let cfg = WolfeConfig::default();
    let r = wolfe_search(&mut phi, f0, g0, &cfg).unwrap();
    println!("accepted α = {:.6} after {} probes (strong Wolfe: {})", r.alpha, r.evals, r.wolfe);
    println!("φ(0) = {f0:.4}, φ(α) = {:.4}, φ′(0) = {g0:.4}, φ′(α) = {:.4}", r.phi_alpha, r.dphi_alpha);
    println!("sufficient decrease: {}", r.phi_alpha <= f0 + cfg.c1 * r.alpha * g0);
    println!("curvature: {}", r.dphi_alpha.abs() <= cfg.c2 * g0.abs());
    println!("probed steps: {:?}", &calls[1..]);
}
