//! The product manifold `(P^{d+1})^K × R^{K-1}` carrying mixture parameters.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{Manifold, RetractionKind, Tangent};
use crate::spd::{self, ParallelTransport, SpdPoint, TangentVector};

/// K augmented SPD blocks of size `(d+1)×(d+1)` and `K-1` weight logits;
/// the logit of the last component is fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    components: Vec<SpdPoint>,
    logits: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmTangent {
    pub components: Vec<TangentVector>,
    pub logits: DVector<f64>,
}

impl GmmParams {
    pub fn new(components: Vec<SpdPoint>, logits: DVector<f64>) -> Result<Self> {
        let k = components.len();
        if k == 0 {
            return Err(Error::arg("a mixture needs at least one component"));
        }
        if logits.len() != k - 1 {
            return Err(Error::Dimension {
                expected: k - 1,
                found: logits.len(),
            });
        }
        let dim = components[0].dim();
        if dim < 2 {
            return Err(Error::arg("augmented blocks must be at least 2x2"));
        }
        for c in &components {
            if c.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: c.dim(),
                });
            }
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        Ok(GmmParams { components, logits })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Ambient data dimension `d` (blocks are `d+1` square).
    pub fn d(&self) -> usize {
        self.components[0].dim() - 1
    }

    pub fn components(&self) -> &[SpdPoint] {
        &self.components
    }

    pub fn logits(&self) -> &DVector<f64> {
        &self.logits
    }

    /// Mixture weights `softmax([ω, 0])`.
    pub fn weights(&self) -> DVector<f64> {
        linalg::softmax_with_zero(&self.logits)
    }

    /// Reorders components; logits are re-derived so the weights follow.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let k = self.k();
        if perm.len() != k {
            return Err(Error::Dimension {
                expected: k,
                found: perm.len(),
            });
        }
        let w = self.weights();
        let comps = perm.iter().map(|&p| self.components[p].clone()).collect();
        let last = w[perm[k - 1]].ln();
        let logits = DVector::from_iterator(k - 1, perm[..k - 1].iter().map(|&p| w[p].ln() - last));
        GmmParams::new(comps, logits)
    }
}

impl GmmTangent {
    pub fn zeros_like(params: &GmmParams) -> Self {
        let dim = params.d() + 1;
        GmmTangent {
            components: (0..params.k()).map(|_| TangentVector::zeros(dim)).collect(),
            logits: DVector::zeros(params.k() - 1),
        }
    }

    fn check_shape(&self, params: &GmmParams) -> Result<()> {
        if self.components.len() != params.k() {
            return Err(Error::Dimension {
                expected: params.k(),
                found: self.components.len(),
            });
        }
        if self.logits.len() != params.k() - 1 {
            return Err(Error::Dimension {
                expected: params.k() - 1,
                found: self.logits.len(),
            });
        }
        for c in &self.components {
            if c.dim() != params.d() + 1 {
                return Err(Error::Dimension {
                    expected: params.d() + 1,
                    found: c.dim(),
                });
            }
        }
        Ok(())
    }
}

impl Tangent for GmmTangent {
    fn scale_mut(&mut self, a: f64) {
        for c in &mut self.components {
            c.scale_mut(a);
        }
        self.logits *= a;
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        for (c, xc) in self.components.iter_mut().zip(&x.components) {
            c.axpy(a, xc);
        }
        self.logits.axpy(a, &x.logits, 1.0);
    }
}

/// Sum of the SPD metrics plus the Euclidean dot product of logit directions.
pub fn product_metric(base: &GmmParams, xi: &GmmTangent, eta: &GmmTangent) -> Result<f64> {
    xi.check_shape(base)?;
    eta.check_shape(base)?;
    Ok(product_metric_unchecked(base, xi, eta))
}

fn product_metric_unchecked(base: &GmmParams, xi: &GmmTangent, eta: &GmmTangent) -> f64 {
    let spd_part: f64 = base
        .components
        .iter()
        .zip(xi.components.iter().zip(&eta.components))
        .map(|(s, (a, b))| spd::metric_unchecked(s, a, b))
        .sum();
    spd_part + xi.logits.dot(&eta.logits)
}

/// Factor-wise retraction; logits move additively.
pub fn product_retract(base: &GmmParams, xi: &GmmTangent, kind: RetractionKind) -> Result<GmmParams> {
    xi.check_shape(base)?;
    let mut comps = Vec::with_capacity(base.k());
    for (j, (s, v)) in base.components.iter().zip(&xi.components).enumerate() {
        let next = match kind {
            RetractionKind::Exp => spd::exp_map(s, v),
            RetractionKind::Euclidean => spd::euclidean_retraction(s, v),
        }
        .map_err(|e| e.at_component(j))?;
        comps.push(next);
    }
    GmmParams::new(comps, &base.logits + &xi.logits)
}

/// Parallel transport on each SPD factor; logit directions are unchanged.
pub fn product_transport(from: &GmmParams, to: &GmmParams, xi: &GmmTangent) -> Result<GmmTangent> {
    xi.check_shape(from)?;
    if from.k() != to.k() || from.d() != to.d() {
        return Err(Error::Dimension {
            expected: from.k(),
            found: to.k(),
        });
    }
    let mut out = transport_many(from, to, &[xi])?;
    Ok(out.remove(0))
}

fn transport_many(from: &GmmParams, to: &GmmParams, vs: &[&GmmTangent]) -> Result<Vec<GmmTangent>> {
    let ops = from
        .components
        .iter()
        .zip(&to.components)
        .map(|(a, b)| ParallelTransport::between(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(vs
        .iter()
        .map(|v| GmmTangent {
            components: ops.iter().zip(&v.components).map(|(op, c)| op.apply(c)).collect(),
            logits: v.logits.clone(),
        })
        .collect())
}

/// [`GmmParams`] viewed as a Riemannian manifold with a chosen retraction.
#[derive(Debug, Clone, Copy, Default)]
pub struct GmmManifold {
    pub retraction: RetractionKind,
}

impl GmmManifold {
    pub fn new(retraction: RetractionKind) -> Self {
        GmmManifold { retraction }
    }
}

impl Manifold for GmmManifold {
    type Point = GmmParams;
    type Tangent = GmmTangent;

    fn inner(&self, at: &GmmParams, a: &GmmTangent, b: &GmmTangent) -> f64 {
        product_metric_unchecked(at, a, b)
    }

    fn retract(&self, at: &GmmParams, v: &GmmTangent) -> Result<GmmParams> {
        product_retract(at, v, self.retraction)
    }

    fn transport(&self, from: &GmmParams, to: &GmmParams, vs: &[&GmmTangent]) -> Result<Vec<GmmTangent>> {
        match self.retraction {
            RetractionKind::Exp => transport_many(from, to, vs),
            RetractionKind::Euclidean => Ok(vs.iter().map(|v| (*v).clone()).collect()),
        }
    }
}
