//! Strong-Wolfe line search: a bracketing phase followed by zooming with
//! safeguarded cubic interpolation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeConfig {
    pub c1: f64,
    pub c2: f64,
    pub i_max: usize,
    pub alpha_init: f64,
}

impl Default for WolfeConfig {
    fn default() -> Self {
        WolfeConfig {
            c1: 1e-4,
            c2: 0.9,
            i_max: 50,
            alpha_init: 1.0,
        }
    }
}

impl WolfeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::arg(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1 (got c1 = {}, c2 = {})",
                self.c1, self.c2
            )));
        }
        if self.i_max == 0 {
            return Err(Error::arg("line-search iteration cap must be positive"));
        }
        Ok(())
    }
}

/// `φ(α)` and `φ′(α)` along a search curve. A probe that cannot be evaluated
/// (overflow, retraction failure) reports `φ = +∞`.
pub trait ScalarProbe {
    fn probe(&mut self, alpha: f64) -> (f64, f64);
}

impl<F: FnMut(f64) -> (f64, f64)> ScalarProbe for F {
    fn probe(&mut self, alpha: f64) -> (f64, f64) {
        self(alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub phi_alpha: f64,
    pub dphi_alpha: f64,
    /// Number of probes; the caller-supplied values at 0 are not counted.
    pub evals: usize,
    /// False when the cap ran out and the best sufficient-decrease point
    /// was returned instead.
    pub wolfe: bool,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    a: f64,
    f: f64,
    g: f64,
}

/// Minimizer over `[a, b]` of the Hermite cubic through `(a, φa, φ′a)` and
/// `(b, φb, φ′b)`, clamped to the middle 80% of the interval. A cubic with
/// no interior local minimizer is minimized at the better endpoint; data
/// that are not finite give the midpoint.
pub fn cubic_min(a: f64, phi_a: f64, dphi_a: f64, b: f64, phi_b: f64, dphi_b: f64) -> f64 {
    let lo = a.min(b);
    let hi = a.max(b);
    let margin = 0.1 * (hi - lo);
    let x = if [phi_a, dphi_a, phi_b, dphi_b].iter().all(|v| v.is_finite()) && a != b {
        let endpoint = if phi_a <= phi_b { a } else { b };
        match cubic_raw(a, phi_a, dphi_a, b, phi_b, dphi_b) {
            Some(x) if x > lo && x < hi => {
                let h = hermite(a, phi_a, dphi_a, b, phi_b, dphi_b);
                if h(x) <= phi_a.min(phi_b) {
                    x
                } else {
                    endpoint
                }
            }
            _ => endpoint,
        }
    } else {
        0.5 * (a + b)
    };
    x.clamp(lo + margin, hi - margin)
}

fn hermite(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> impl Fn(f64) -> f64 {
    let h = b - a;
    move |t| {
        let s = (t - a) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * fa + (s3 - 2.0 * s2 + s) * h * ga + (3.0 * s2 - 2.0 * s3) * fb + (s3 - s2) * h * gb
    }
}

fn cubic_raw(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> Option<f64> {
    if a == b || ![fa, ga, fb, gb].iter().all(|v| v.is_finite()) {
        return None;
    }
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let x = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    x.is_finite().then_some(x)
}

/// `α₁ = 2(f_k − f_{k−1}) / (Df(x_k)ξ_k)`, or 1 when that is unavailable,
/// nonpositive or not finite.
pub fn initial_step(f_curr: f64, f_prev: Option<f64>, slope_curr: f64) -> f64 {
    match f_prev {
        Some(prev) => {
            let a = 2.0 * (f_curr - prev) / slope_curr;
            if a.is_finite() && a > 0.0 {
                a
            } else {
                1.0
            }
        }
        None => 1.0,
    }
}

struct Search<'a, P: ScalarProbe> {
    probe: &'a mut P,
    cfg: WolfeConfig,
    phi0: f64,
    dphi0: f64,
    evals: usize,
    best: Option<Sample>,
}

impl<P: ScalarProbe> Search<'_, P> {
    fn eval(&mut self, a: f64) -> Sample {
        self.evals += 1;
        let (f, g) = self.probe.probe(a);
        if f.is_finite() && g.is_finite() {
            Sample { a, f, g }
        } else {
            Sample {
                a,
                f: f64::INFINITY,
                g: f64::NAN,
            }
        }
    }

    fn armijo(&self, s: &Sample) -> bool {
        s.f <= self.phi0 + self.cfg.c1 * s.a * self.dphi0
    }

    fn curvature(&self, s: &Sample) -> bool {
        s.g.abs() <= self.cfg.c2 * self.dphi0.abs()
    }

    fn note(&mut self, s: Sample) {
        if self.armijo(&s) && self.best.is_none_or(|b| s.f < b.f) {
            self.best = Some(s);
        }
    }

    fn accept(&self, s: Sample) -> LineSearchResult {
        LineSearchResult {
            alpha: s.a,
            phi_alpha: s.f,
            dphi_alpha: s.g,
            evals: self.evals,
            wolfe: true,
        }
    }

    fn zoom(&mut self, mut lo: Sample, mut hi: Sample) -> Option<LineSearchResult> {
        for _ in 0..self.cfg.i_max {
            let width = (hi.a - lo.a).abs();
            if width <= f64::EPSILON * lo.a.abs().max(hi.a.abs()) {
                return None;
            }
            let a = cubic_min(lo.a, lo.f, lo.g, hi.a, hi.f, hi.g);
            let s = self.eval(a);
            if !self.armijo(&s) || s.f >= lo.f {
                hi = s;
            } else {
                self.note(s);
                if self.curvature(&s) {
                    return Some(self.accept(s));
                }
                if s.g * (hi.a - lo.a) >= 0.0 {
                    hi = lo;
                }
                lo = s;
            }
        }
        None
    }

    fn run(&mut self) -> Option<LineSearchResult> {
        let mut prev = Sample {
            a: 0.0,
            f: self.phi0,
            g: self.dphi0,
        };
        let mut a = self.cfg.alpha_init;
        for i in 1..=self.cfg.i_max {
            let s = self.eval(a);
            if !self.armijo(&s) || (i > 1 && s.f >= prev.f) {
                return self.zoom(prev, s);
            }
            self.note(s);
            if self.curvature(&s) {
                return Some(self.accept(s));
            }
            if s.g >= 0.0 {
                return self.zoom(s, prev);
            }
            let raw = cubic_raw(0.0, self.phi0, self.dphi0, s.a, s.f, s.g)
                .filter(|x| *x > s.a)
                .unwrap_or(10.0 * s.a);
            a = (10.0 * s.a).min((1.1 * s.a).max(raw));
            prev = s;
        }
        None
    }
}

/// Finds a step satisfying `φ(α) ≤ φ(0) + c1 α φ′(0)` and
/// `|φ′(α)| ≤ c2 |φ′(0)|`.
///
/// When the budget runs out, the best probed point with sufficient decrease
/// is returned with `wolfe = false`; if there is none, the search fails.
pub fn wolfe_search<P: ScalarProbe>(probe: &mut P, phi0: f64, dphi0: f64, cfg: &WolfeConfig) -> Result<LineSearchResult> {
    cfg.validate()?;
    if !(dphi0 < 0.0) {
        return Err(Error::arg(format!("not a descent direction: φ′(0) = {dphi0}")));
    }
    if !phi0.is_finite() {
        return Err(Error::NonFinite("line-search start value"));
    }
    if !(cfg.alpha_init > 0.0 && cfg.alpha_init.is_finite()) {
        return Err(Error::arg("initial step must be positive and finite"));
    }
    let mut search = Search {
        probe,
        cfg: *cfg,
        phi0,
        dphi0,
        evals: 0,
        best: None,
    };
    if let Some(found) = search.run() {
        return Ok(found);
    }
    match search.best {
        Some(s) => Ok(LineSearchResult {
            alpha: s.a,
            phi_alpha: s.f,
            dphi_alpha: s.g,
            evals: search.evals,
            wolfe: false,
        }),
        None => Err(Error::LineSearch(format!("no sufficient decrease after {} probes", search.evals))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn certify(r: &LineSearchResult, phi0: f64, dphi0: f64, cfg: &WolfeConfig) {
        assert!(r.wolfe);
        assert!(r.phi_alpha <= phi0 + cfg.c1 * r.alpha * dphi0, "{r:?}");
        assert!(r.dphi_alpha.abs() <= cfg.c2 * dphi0.abs(), "{r:?}");
    }

    #[test]
    fn exact_minimizer_is_accepted_first() {
        let mut p = |a: f64| (0.5 * (a - 1.0).powi(2), a - 1.0);
        let cfg = WolfeConfig::default();
        let r = wolfe_search(&mut p, 0.5, -1.0, &cfg).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.evals, 1);
    }

    #[test]
    fn overshooting_quadratic() {
        let mut p = |a: f64| (-a + a * a, -1.0 + 2.0 * a);
        let cfg = WolfeConfig::default();
        let r = wolfe_search(&mut p, 0.0, -1.0, &cfg).unwrap();
        certify(&r, 0.0, -1.0, &cfg);
    }

    #[test]
    fn extrapolates_towards_a_far_minimizer() {
        let mut trial = Vec::new();
        let mut p = |a: f64| {
            trial.push(a);
            ((a - 50.0).powi(2) / 100.0, (a - 50.0) / 50.0)
        };
        let cfg = WolfeConfig {
            c2: 0.1,
            ..WolfeConfig::default()
        };
        let r = wolfe_search(&mut p, 25.0, -1.0, &cfg).unwrap();
        certify(&r, 25.0, -1.0, &cfg);
        assert!(trial.len() > 1);
        for w in trial.windows(2).take_while(|w| w[1] > w[0]) {
            let ratio = w[1] / w[0];
            assert!((1.1 - 1e-12..=10.0 + 1e-12).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn rejects_ascent_direction() {
        let mut p = |a: f64| (a, 1.0);
        assert!(wolfe_search(&mut p, 0.0, 1.0, &WolfeConfig::default()).is_err());
        assert!(wolfe_search(&mut p, 0.0, 0.0, &WolfeConfig::default()).is_err());
    }

    #[test]
    fn failed_probes_are_bracketed_away() {
        let mut p = |a: f64| {
            if a > 0.3 {
                (f64::INFINITY, f64::NAN)
            } else {
                ((a - 0.2).powi(2), 2.0 * (a - 0.2))
            }
        };
        let cfg = WolfeConfig::default();
        let r = wolfe_search(&mut p, 0.04, -0.4, &cfg).unwrap();
        certify(&r, 0.04, -0.4, &cfg);
    }

    #[test]
    fn exhausted_budget_returns_sufficient_decrease_point() {
        // Slope stays steep everywhere below the cap, so curvature never holds.
        let mut p = |a: f64| (-a, -1.0);
        let cfg = WolfeConfig {
            i_max: 3,
            ..WolfeConfig::default()
        };
        let r = wolfe_search(&mut p, 0.0, -1.0, &cfg).unwrap();
        assert!(!r.wolfe);
        assert!(r.phi_alpha < 0.0);
        assert!(r.evals <= 2 * cfg.i_max + 2);
    }

    #[test]
    fn no_decrease_anywhere_is_an_error() {
        let mut p = |_a: f64| (1.0, 1.0);
        let cfg = WolfeConfig {
            i_max: 5,
            ..WolfeConfig::default()
        };
        assert!(matches!(wolfe_search(&mut p, 0.0, -1.0, &cfg), Err(Error::LineSearch(_))));
    }

    #[test]
    fn cubic_of_a_quadratic_is_its_vertex() {
        let f = |a: f64| (a - 1.0).powi(2);
        let g = |a: f64| 2.0 * (a - 1.0);
        let x = cubic_min(0.0, f(0.0), g(0.0), 3.0, f(3.0), g(3.0));
        assert!((x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_data_gives_midpoint() {
        assert!((cubic_min(0.0, 1.0, -1.0, 2.0, 1.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((cubic_min(2.0, 1.0, 1.0, 0.0, 1.0, -1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_min_matches_grid_search_on_quartic() {
        let (a, b) = (0.5f64, 2.0f64);
        let x = cubic_min(a, a.powi(4), 4.0 * a.powi(3), b, b.powi(4), 4.0 * b.powi(3));
        // Hermite cubic on [a, b] in monomial form, minimized on a fine grid.
        let (fa, ga, fb, gb) = (a.powi(4), 4.0 * a.powi(3), b.powi(4), 4.0 * b.powi(3));
        let h = b - a;
        let hermite = |t: f64| {
            let s = (t - a) / h;
            let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
            let h10 = s.powi(3) - 2.0 * s * s + s;
            let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
            let h11 = s.powi(3) - s * s;
            h00 * fa + h10 * h * ga + h01 * fb + h11 * h * gb
        };
        let lo = a + 0.1 * h;
        let hi = b - 0.1 * h;
        let grid = (0..=200_000).map(|i| lo + (hi - lo) * i as f64 / 200_000.0);
        let best = grid.min_by(|p, q| hermite(*p).total_cmp(&hermite(*q))).unwrap();
        assert!((x - best).abs() < 1e-4, "{x} vs {best}");
        assert!((x - 0.65).abs() < 1e-12);
    }

    #[test]
    fn monotone_cubic_goes_to_better_endpoint() {
        // Decreasing data whose cubic has no critical point.
        let fb = -5.0 / 3.0;
        assert!(cubic_raw(0.0, 0.0, -1.0, 1.0, fb, -4.0).is_none());
        assert!((cubic_min(0.0, 0.0, -1.0, 1.0, fb, -4.0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn non_finite_data_gives_midpoint() {
        assert_eq!(cubic_min(0.0, 1.0, -1.0, 2.0, f64::INFINITY, f64::NAN), 1.0);
    }

    #[test]
    fn initial_step_examples() {
        assert_eq!(initial_step(0.5, Some(1.0), -1.0), 1.0);
        assert_eq!(initial_step(1.0, Some(1.0), -1.0), 1.0);
        assert_eq!(initial_step(1.0, None, -1.0), 1.0);
        assert_eq!(initial_step(2.0, Some(1.0), -1.0), 1.0);
        assert!((initial_step(0.9, Some(1.0), -4.0) - 0.05).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn interpolant_stays_strictly_inside(
            a in -10.0f64..10.0, w in 1e-3f64..10.0,
            fa in -5.0f64..5.0, ga in -5.0f64..5.0, fb in -5.0f64..5.0, gb in -5.0f64..5.0,
            flip in any::<bool>()
        ) {
            let b = a + w;
            let x = if flip { cubic_min(b, fb, gb, a, fa, ga) } else { cubic_min(a, fa, ga, b, fb, gb) };
            prop_assert!(x > a && x < b);
        }

        #[test]
        fn convex_quadratics_and_quartics_succeed(
            c in 0.01f64..100.0, m in 0.01f64..100.0, q in 0.0f64..10.0, init in 1e-3f64..100.0
        ) {
            // φ(α) = c(α − m)² + q(α − m)⁴, minimizer at m > 0.
            let phi = |a: f64| c * (a - m).powi(2) + q * (a - m).powi(4);
            let dphi = |a: f64| 2.0 * c * (a - m) + 4.0 * q * (a - m).powi(3);
            let cfg = WolfeConfig { alpha_init: init, ..WolfeConfig::default() };
            let mut p = |a: f64| (phi(a), dphi(a));
            let r = wolfe_search(&mut p, phi(0.0), dphi(0.0), &cfg).unwrap();
            prop_assert!(r.wolfe);
            prop_assert!(r.phi_alpha <= phi(0.0) + cfg.c1 * r.alpha * dphi(0.0));
            prop_assert!(r.dphi_alpha.abs() <= cfg.c2 * dphi(0.0).abs());
            prop_assert!(r.evals <= 2 * cfg.i_max + 2);
        }
    }
}
