//! The seam between geometry and solvers.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which retraction a product manifold uses. Each retraction carries its own
/// vector transport: the exponential map moves vectors by parallel transport,
/// the Euclidean retraction `Σ + ξ` by the identity (its differential).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RetractionKind {
    #[default]
    Exp,
    Euclidean,
}

impl std::str::FromStr for RetractionKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exp" => Ok(RetractionKind::Exp),
            "euclidean" => Ok(RetractionKind::Euclidean),
            other => Err(format!("unknown retraction `{other}` (expected exp or euclidean)")),
        }
    }
}

impl std::fmt::Display for RetractionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RetractionKind::Exp => "exp",
            RetractionKind::Euclidean => "euclidean",
        })
    }
}

/// Vector-space operations on tangent vectors.
pub trait Tangent: Clone + Send + Sync {
    fn scale_mut(&mut self, a: f64);

    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);

    fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(a);
        out
    }
}

pub trait Manifold: Sync {
    type Point: Clone + Send + Sync;
    type Tangent: Tangent;

    fn inner(&self, at: &Self::Point, a: &Self::Tangent, b: &Self::Tangent) -> f64;

    fn norm(&self, at: &Self::Point, v: &Self::Tangent) -> f64 {
        self.inner(at, v, v).max(0.0).sqrt()
    }

    fn retract(&self, at: &Self::Point, v: &Self::Tangent) -> Result<Self::Point>;

    /// Moves each vector from the tangent space at `from` to the one at `to`.
    fn transport(&self, from: &Self::Point, to: &Self::Point, vs: &[&Self::Tangent]) -> Result<Vec<Self::Tangent>>;
}
