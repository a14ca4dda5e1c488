//! Datasets, synthetic mixtures with known truth, and k-means++ initialization.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky_lower, symmetrize};
use crate::objective::{augment, embed_mixture, penalized_objective, sample_moments, MixtureEstimate, PenaltyConfig};
use crate::random::{derive_rng, random_spd, seeded, standard_normal_vector, Rng};

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    InMemory,
    File(PathBuf),
    Generated { seed: u64, truth: MixtureEstimate },
}

/// An `n×d` sample matrix, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: DMatrix<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if !linalg::all_finite(&rows) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Dataset {
            rows,
            provenance: Provenance::InMemory,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn d(&self) -> usize {
        self.rows.ncols()
    }

    pub fn truth(&self) -> Option<&MixtureEstimate> {
        match &self.provenance {
            Provenance::Generated { truth, .. } => Some(truth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            header: false,
        }
    }
}

/// Parses a numeric CSV file. Every row must have the width of the first.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut ds = read_csv(file, opts)?;
    ds.provenance = Provenance::File(path.to_path_buf());
    Ok(ds)
}

/// [`load_csv`] on any reader.
pub fn read_csv(reader: impl std::io::Read, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                line,
                column: record.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: c + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: c + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    let d = width.ok_or_else(|| Error::Parse {
        line: 0,
        column: 0,
        message: "no data rows".into(),
    })?;
    Dataset::new(DMatrix::from_row_slice(n, d, &values))
}

/// Writes rows with full round-trip precision and no header.
pub fn write_csv(rows: &DMatrix<f64>, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in rows.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// `n` i.i.d. draws from the mixture `truth`.
pub fn sample_gmm(truth: &MixtureEstimate, n: usize, seed: u64) -> Result<Dataset> {
    truth.validate()?;
    let factors = truth
        .covariances
        .iter()
        .enumerate()
        .map(|(j, c)| cholesky_lower(c).map_err(|_| Error::arg(format!("covariance {j} of the generating mixture is not positive definite"))))
        .collect::<Result<Vec<_>>>()?;
    let pick = WeightedIndex::new(truth.weights.iter().copied()).map_err(|e| Error::arg(e.to_string()))?;
    let d = truth.d();
    let mut rng = seeded(seed);
    let mut rows = DMatrix::zeros(n, d);
    for i in 0..n {
        let j = pick.sample(&mut rng);
        let z = standard_normal_vector(d, &mut rng);
        let x = &truth.means[j] + &factors[j] * z;
        rows.row_mut(i).copy_from(&x.transpose());
    }
    Ok(Dataset {
        rows,
        provenance: Provenance::Generated { seed, truth: truth.clone() },
    })
}

/// A random `K`-component mixture in `d` dimensions whose means are about
/// `separation` apart: means `separation/√(2d) · z` with Gaussian `z`,
/// covariances with eigenvalues of order one, weights uniform on `[1, 2]`
/// before normalization.
pub fn random_mixture(k: usize, d: usize, separation: f64, seed: u64) -> Result<MixtureEstimate> {
    if k == 0 || d == 0 {
        return Err(Error::arg("a mixture needs K >= 1 and d >= 1"));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::arg("separation must be finite and nonnegative"));
    }
    let mut rng = seeded(seed);
    let spread = separation / (2.0 * d as f64).sqrt();
    let means = (0..k).map(|_| standard_normal_vector(d, &mut rng) * spread).collect();
    let covs = (0..k).map(|_| random_spd(d, &mut rng).into_matrix()).collect();
    let mut weights = DVector::from_fn(k, |_, _| rng.random_range(1.0..2.0));
    weights /= weights.sum();
    MixtureEstimate::new(weights, means, covs)
}

/// One k-means++ seeding turned into mixture parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct InitCandidate {
    /// Seeded centers, each a data row.
    pub centers: Vec<DVector<f64>>,
    /// Sum of squared distances to the nearest center.
    pub cost: f64,
    pub estimate: MixtureEstimate,
    /// Penalized lifted objective of `estimate` (maximization convention).
    pub objective: f64,
}

/// Row indices of a k-means++ seeding: the first uniformly, each further one
/// with probability proportional to the squared distance to the chosen set.
pub fn kmeanspp_seed(rows: &DMatrix<f64>, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let n = rows.nrows();
    if k == 0 || n < k {
        return Err(Error::arg(format!("k-means++ needs 1 <= K <= n, got K={k}, n={n}")));
    }
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n).map(|i| (rows.row(i) - rows.row(chosen[0])).norm_squared()).collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&dist) {
            Ok(w) => w.sample(rng),
            // Remaining points coincide with centers: pick uniformly among unchosen rows.
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        chosen.push(next);
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min((rows.row(i) - rows.row(next)).norm_squared());
        }
        dist[next] = 0.0;
    }
    Ok(chosen)
}

fn global_covariance(rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (_, cov) = sample_moments(rows)?;
    if cholesky_lower(&cov).is_ok() {
        return Ok(cov);
    }
    // Rank-deficient sample: a small ridge keeps every blended covariance SPD.
    let d = cov.nrows();
    let scale = (cov.trace() / d as f64).max(1.0);
    Ok(cov + DMatrix::identity(d, d) * (1e-6 * scale))
}

/// Mixture parameters from centers by one nearest-center assignment pass.
///
/// Means are cluster averages, covariances are `0.99·Σⱼ + 0.01·Σ_global`
/// (plain `Σ_global` for clusters with fewer than two points), weights are
/// cluster fractions floored at `1/(10K)` and renormalized.
pub fn estimate_from_centers(rows: &DMatrix<f64>, centers: &[DVector<f64>], global: &DMatrix<f64>) -> Result<(MixtureEstimate, f64)> {
    let n = rows.nrows();
    let k = centers.len();
    let mut members = vec![Vec::new(); k];
    let mut cost = 0.0;
    for i in 0..n {
        let x = rows.row(i).transpose();
        let (best, dist) = centers
            .iter()
            .map(|c| (&x - c).norm_squared())
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, v)| if v < acc.1 { (j, v) } else { acc });
        members[best].push(i);
        cost += dist;
    }
    let floor = 1.0 / (10.0 * k as f64);
    let mut weights = DVector::from_iterator(k, members.iter().map(|m| (m.len() as f64 / n as f64).max(floor)));
    weights /= weights.sum();
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for (j, m) in members.iter().enumerate() {
        if m.len() < 2 {
            means.push(if m.len() == 1 { rows.row(m[0]).transpose() } else { centers[j].clone() });
            covs.push(global.clone());
            continue;
        }
        let (mean, cov) = sample_moments(&rows.select_rows(m))?;
        means.push(mean);
        covs.push(symmetrize(&(cov * 0.99 + global * 0.01)));
    }
    Ok((MixtureEstimate::new(weights, means, covs)?, cost))
}

/// All `candidates` k-means++ seedings, scored by the penalized objective.
/// Candidate `c` draws from sub-stream `c` of `seed`.
pub fn kmeanspp_candidates(rows: &DMatrix<f64>, k: usize, candidates: usize, seed: u64, cfg: &PenaltyConfig) -> Result<Vec<InitCandidate>> {
    if candidates == 0 {
        return Err(Error::arg("need at least one k-means++ candidate"));
    }
    if rows.nrows() < k {
        return Err(Error::arg(format!("k-means++ needs n >= K, got n={}, K={k}", rows.nrows())));
    }
    let y = augment(rows)?;
    let global = global_covariance(rows)?;
    (0..candidates)
        .into_par_iter()
        .map(|c| {
            let mut rng = derive_rng(seed, c as u64);
            let idx = kmeanspp_seed(rows, k, &mut rng)?;
            let centers: Vec<DVector<f64>> = idx.iter().map(|&i| rows.row(i).transpose()).collect();
            let (estimate, cost) = estimate_from_centers(rows, &centers, &global)?;
            let objective = penalized_objective(&embed_mixture(&estimate)?, &y, cfg)?;
            Ok(InitCandidate {
                centers,
                cost,
                estimate,
                objective,
            })
        })
        .collect()
}

/// The best of `candidates` k-means++ seedings; ties go to the lowest index.
pub fn kmeanspp_init(rows: &DMatrix<f64>, k: usize, candidates: usize, seed: u64, cfg: &PenaltyConfig) -> Result<InitCandidate> {
    let all = kmeanspp_candidates(rows, k, candidates, seed, cfg)?;
    let best = all
        .iter()
        .enumerate()
        .fold(0, |b, (i, c)| if c.objective > all[b].objective { i } else { b });
    Ok(all.into_iter().nth(best).expect("nonempty"))
}
