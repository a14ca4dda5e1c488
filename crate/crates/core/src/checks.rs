//! Randomized property suites shared by `riemmix selftest` and the
//! acceptance tests. Every suite recomputes its reference quantity by a
//! route independent of the code under test.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::{frobenius_dot, relative_diff, sym_apply};
use crate::linesearch::{wolfe_search, WolfeConfig};
use crate::manifold::RetractionKind;
use crate::objective::{augment, penalized_objective, riemannian_grad, AugmentedData, PenaltyConfig};
use crate::product::{product_metric, product_retract};
use crate::random::{
    derive_rng, random_gmm_params, random_gmm_tangent, random_spd, random_symmetric, standard_normal_matrix, standard_normal_vector, uniform, Rng,
};
use crate::spd::{self, SpdPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Largest observed violation measure; compare with `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckReport {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        CheckReport {
            name: name.into(),
            trials: 0,
            failures: 0,
            worst: 0.0,
            tolerance,
        }
    }

    /// Records one trial whose violation measure is `v` (NaN fails).
    fn record(&mut self, v: f64) {
        self.trials += 1;
        if !(v <= self.tolerance) {
            self.failures += 1;
        }
        if !(v <= self.worst) {
            self.worst = v;
        }
    }

    pub fn passed(&self) -> bool {
        self.trials > 0 && self.failures == 0
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {}/{} ok, worst {:.3e} (tolerance {:.1e})",
            self.name,
            self.trials - self.failures,
            self.trials,
            self.worst,
            self.tolerance
        )
    }
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    relative_diff(a, b)
}

/// Retraction axioms, geodesic endpoints, transport isometry and linearity,
/// and the exp/log round trip on SPD(d) for every `d` in `dims`.
pub fn manifold_suite(trials: usize, dims: &[usize], seed: u64) -> Result<Vec<CheckReport>> {
    let mut zero = CheckReport::new("retraction R(x,0)=x", 0.0);
    let mut first = CheckReport::new("retraction dR(x,0)=id", 1e-6);
    let mut ends = CheckReport::new("geodesic endpoints", 1e-10);
    let mut iso = CheckReport::new("transport isometry", 1e-10);
    let mut lin = CheckReport::new("transport linearity", 1e-10);
    let mut round = CheckReport::new("exp/log round trip", 1e-8);
    for (s, &d) in dims.iter().enumerate() {
        let mut rng = derive_rng(seed, s as u64);
        for _ in 0..trials {
            let x = random_spd(d, &mut rng);
            let y = random_spd(d, &mut rng);
            let xi = random_symmetric(d, 1.0, &mut rng);
            let eta = random_symmetric(d, 1.0, &mut rng);
            let h = 1e-5;
            for kind in [RetractionKind::Exp, RetractionKind::Euclidean] {
                let r = |t: f64| -> Result<DMatrix<f64>> {
                    let v = xi.scale(t);
                    Ok(match kind {
                        RetractionKind::Exp => spd::exp_map(&x, &v)?,
                        RetractionKind::Euclidean => spd::euclidean_retraction(&x, &v)?,
                    }
                    .into_matrix())
                };
                zero.record(rel(&r(0.0)?, x.matrix()));
                let slope = (r(h)? - r(-h)?) / (2.0 * h);
                first.record(rel(&slope, xi.matrix()));
            }
            ends.record(rel(spd::geodesic(&x, &y, 0.0)?.matrix(), x.matrix()).max(rel(spd::geodesic(&x, &y, 1.0)?.matrix(), y.matrix())));

            let pxi = spd::parallel_transport(&x, &y, &xi)?;
            let peta = spd::parallel_transport(&x, &y, &eta)?;
            let before = spd::metric(&x, &xi, &eta)?;
            let after = spd::metric(&y, &pxi, &peta)?;
            let scale = spd::metric(&x, &xi, &xi)?.sqrt() * spd::metric(&x, &eta, &eta)?.sqrt();
            iso.record((before - after).abs() / scale);
            let (a, b) = (uniform(-2.0, 2.0, &mut rng), uniform(-2.0, 2.0, &mut rng));
            let combo = spd::TangentVector::new(xi.matrix() * a + eta.matrix() * b)?;
            let lhs = spd::parallel_transport(&x, &y, &combo)?;
            lin.record(rel(lhs.matrix(), &(pxi.matrix() * a + peta.matrix() * b)));

            round.record(rel(spd::exp_map(&x, &spd::log_map(&x, &y)?)?.matrix(), y.matrix()));
        }
    }
    Ok(vec![zero, first, ends, iso, lin, round])
}

fn directional_fd(f: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    // Fourth-order central difference.
    Ok((8.0 * (f(h)? - f(-h)?) - (f(2.0 * h)? - f(-2.0 * h)?)) / (12.0 * h))
}

/// Riemannian gradient against finite differences along exp-map curves,
/// for the plain and penalized objectives, `K ∈ {1,3}`, `d ∈ {2,5}`.
///
/// The error is `|D_fd − ⟨grad, ξ⟩| / (‖grad‖‖ξ‖)`, i.e. relative to the
/// largest directional derivative the gradient allows. `perturb` scales the
/// analytic gradient by `1 + perturb` and exists to prove the suite can fail.
pub fn gradient_suite(directions: usize, seed: u64, perturb: f64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let mut stream = 0;
    for penalized in [false, true] {
        for k in [1, 3] {
            for d in [2, 5] {
                let mut rng = derive_rng(seed, stream);
                stream += 1;
                let n = 60;
                let x = standard_normal_matrix(n, d, &mut rng) * 2.0;
                let data = augment(&x)?;
                let cfg = if penalized {
                    PenaltyConfig::from_data(&x, 2.0, 1.0, 1.0, None, 0.1)?
                } else {
                    PenaltyConfig::none(d)
                };
                let label = format!("gradient {} K={k} d={d}", if penalized { "penalized" } else { "plain" });
                let mut report = CheckReport::new(label, 1e-5);
                let p = random_gmm_params(k, d, &mut rng);
                let g = riemannian_grad(&p, &data, &cfg, n)?;
                let gnorm = product_metric(&p, &g, &g)?.sqrt();
                for _ in 0..directions {
                    let xi = random_gmm_tangent(k, d, 1.0, &mut rng);
                    let analytic = (1.0 + perturb) * product_metric(&p, &g, &xi)?;
                    let f = |t: f64| {
                        let moved = product_retract(&p, &crate::manifold::Tangent::scaled(&xi, t), RetractionKind::Exp)?;
                        penalized_objective(&moved, &data, &cfg)
                    };
                    let numeric = directional_fd(f, 1e-4)?;
                    let scale = gnorm * product_metric(&p, &xi, &xi)?.sqrt();
                    report.record((analytic - numeric).abs() / scale.max(f64::MIN_POSITIVE));
                }
                out.push(report);
            }
        }
    }
    Ok(out)
}

/// A random smooth convex function of one variable with `φ′(0) < 0`:
/// `a(α−m)² + b(α−m)⁴ + e·log(1 + exp(s(α−c)))`.
struct ConvexProbe {
    a: f64,
    b: f64,
    m: f64,
    e: f64,
    s: f64,
    c: f64,
}

impl ConvexProbe {
    fn random(rng: &mut Rng) -> Self {
        ConvexProbe {
            a: 10f64.powf(uniform(-2.0, 2.0, rng)),
            b: if uniform(0.0, 1.0, rng) < 0.5 {
                0.0
            } else {
                10f64.powf(uniform(-2.0, 1.0, rng))
            },
            m: 10f64.powf(uniform(-2.0, 2.0, rng)),
            e: uniform(0.0, 1.0, rng),
            s: uniform(-3.0, 3.0, rng),
            c: uniform(-2.0, 2.0, rng),
        }
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        let u = t - self.m;
        let z = self.s * (t - self.c);
        let softplus = if z > 30.0 { z } else { z.exp().ln_1p() };
        let sigmoid = 1.0 / (1.0 + (-z).exp());
        (
            self.a * u * u + self.b * u.powi(4) + self.e * softplus,
            2.0 * self.a * u + 4.0 * self.b * u.powi(3) + self.e * self.s * sigmoid,
        )
    }
}

/// Strong-Wolfe conditions verified post hoc on every accepted step.
pub fn wolfe_suite(probes: usize, seed: u64) -> Result<CheckReport> {
    let cfg = WolfeConfig::default();
    let mut report = CheckReport::new("strong Wolfe (post hoc)", 0.0);
    let mut rng = derive_rng(seed, 0);
    let mut done = 0;
    while done < probes {
        let f = ConvexProbe::random(&mut rng);
        let (phi0, dphi0) = f.eval(0.0);
        if !(dphi0 < 0.0) {
            continue;
        }
        done += 1;
        let mut probe = |t: f64| f.eval(t);
        let res = wolfe_search(&mut probe, phi0, dphi0, &cfg)?;
        let (phi, dphi) = f.eval(res.alpha);
        let armijo = phi - (phi0 + cfg.c1 * res.alpha * dphi0);
        let curvature = dphi.abs() - cfg.c2 * dphi0.abs();
        let violation = armijo.max(curvature).max(0.0) + if res.wolfe { 0.0 } else { 1.0 };
        report.record(violation);
    }
    Ok(report)
}

fn lifted_loglik(s: &SpdPoint, y: &AugmentedData) -> Result<f64> {
    crate::objective::reformulated_loglik(&crate::product::GmmParams::new(vec![s.clone()], DVector::zeros(0))?, y)
}

/// Midpoint geodesic concavity of the single-component lifted
/// log-likelihood: `L̂(S #½ R) ≥ ½L̂(S) + ½L̂(R)`.
pub fn concavity_suite(trials: usize, seed: u64) -> Result<CheckReport> {
    let mut report = CheckReport::new("midpoint geodesic concavity", 1e-10);
    let mut rng = derive_rng(seed, 0);
    for t in 0..trials {
        let d = 1 + t % 5;
        let s = random_spd(d + 1, &mut rng);
        let r = random_spd(d + 1, &mut rng);
        let y = augment(&(standard_normal_matrix(20, d, &mut rng) * 2.0))?;
        let mid = lifted_loglik(&geometric_midpoint(&s, &r)?, &y)?;
        let chord = 0.5 * lifted_loglik(&s, &y)? + 0.5 * lifted_loglik(&r, &y)?;
        report.record(chord - mid);
    }
    Ok(report)
}

/// `S^{1/2}(S^{-1/2} R S^{-1/2})^{1/2} S^{1/2}` through eigendecompositions,
/// independent of the Cholesky route used by [`spd::geodesic`].
pub fn geometric_midpoint(s: &SpdPoint, r: &SpdPoint) -> Result<SpdPoint> {
    let root = sym_apply(s.matrix(), f64::sqrt);
    let inv_root = sym_apply(s.matrix(), |v| 1.0 / v.sqrt());
    let inner = sym_apply(&(&inv_root * r.matrix() * &inv_root), f64::sqrt);
    SpdPoint::new(&root * inner * &root)
}

/// `xᵀ(S⁻¹ # R⁻¹)x ≤ √(xᵀS⁻¹x) √(xᵀR⁻¹x)` with `#` the geometric mean,
/// written `S^{-1/2}(S^{1/2}R⁻¹S^{1/2})^{1/2}S^{-1/2}`.
pub fn mean_bound_suite(trials: usize, seed: u64) -> Result<CheckReport> {
    let mut report = CheckReport::new("geometric-mean quadratic form bound", 1e-10);
    let mut rng = derive_rng(seed, 0);
    for t in 0..trials {
        let d = 1 + t % 6;
        let s = random_spd(d, &mut rng);
        let r = random_spd(d, &mut rng);
        let x = standard_normal_vector(d, &mut rng);
        let root = sym_apply(s.matrix(), f64::sqrt);
        let inv_root = sym_apply(s.matrix(), |v| 1.0 / v.sqrt());
        let r_inv = r.inverse();
        let mean = &inv_root * sym_apply(&(&root * &r_inv * &root), f64::sqrt) * &inv_root;
        let lhs = frobenius_dot(&(&x * x.transpose()), &mean);
        let rhs = (x.dot(&(s.inverse() * &x)) * x.dot(&(r_inv * &x))).sqrt();
        report.record(lhs - rhs);
    }
    Ok(report)
}

/// One selftest group: its name and reports.
pub struct Group {
    pub name: &'static str,
    pub reports: Vec<CheckReport>,
}

impl Group {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(CheckReport::passed)
    }
}

/// The fast suite run by `riemmix selftest`.
pub fn selftest_groups(seed: u64, perturb_gradient: f64) -> Result<Vec<Group>> {
    Ok(vec![
        Group {
            name: "manifold",
            reports: manifold_suite(20, &[1, 2, 5], seed)?,
        },
        Group {
            name: "gradient",
            reports: gradient_suite(5, seed, perturb_gradient)?,
        },
        Group {
            name: "wolfe",
            reports: vec![wolfe_suite(200, seed)?],
        },
        Group {
            name: "concavity",
            reports: vec![concavity_suite(50, seed)?, mean_bound_suite(50, seed)?],
        },
    ])
}
