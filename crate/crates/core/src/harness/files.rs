use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::objective::MixtureEstimate;

/// JSON form of a mixture: covariances as row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureJson {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl MixtureJson {
    pub fn from_estimate(est: &MixtureEstimate) -> Self {
        MixtureJson {
            weights: est.weights.iter().copied().collect(),
            means: est.means.iter().map(|m| m.iter().copied().collect()).collect(),
            covariances: est
                .covariances
                .iter()
                .map(|c| c.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
        }
    }

    pub fn to_estimate(&self) -> crate::Result<MixtureEstimate> {
        let d = self.means.first().map_or(0, Vec::len);
        let mut covs = Vec::with_capacity(self.covariances.len());
        for c in &self.covariances {
            if c.len() != d || c.iter().any(|r| r.len() != d) {
                return Err(crate::Error::arg(format!("covariance must be {d}x{d}")));
            }
            covs.push(DMatrix::from_fn(d, d, |i, j| c[i][j]));
        }
        MixtureEstimate::new(
            DVector::from_vec(self.weights.clone()),
            self.means.iter().map(|m| DVector::from_vec(m.clone())).collect(),
            covs,
        )
    }
}

/// The `truth.json` sidecar written next to generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub seed: u64,
    pub n: usize,
    pub truth: MixtureJson,
}

pub fn read_truth(path: &Path) -> Result<TruthFile, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::config(format!("invalid truth file {}: {e}", path.display())))
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let fail = |e: std::io::Error| HarnessError::config(format!("cannot write {}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| HarnessError::config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes).map_err(fail)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        fail(e)
    })
}
