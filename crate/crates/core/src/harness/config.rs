use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::manifold::RetractionKind;
use crate::optim::{Sampling, ScheduleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Lbfgs,
    Cg,
    Sgd,
    Em,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::Lbfgs, SolverKind::Cg, SolverKind::Sgd, SolverKind::Em];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Lbfgs => "lbfgs",
            SolverKind::Cg => "cg",
            SolverKind::Sgd => "sgd",
            SolverKind::Em => "em",
        }
    }

    /// SGD defaults to the Euclidean retraction, batch solvers to the exponential map.
    pub fn default_retraction(self) -> RetractionKind {
        match self {
            SolverKind::Sgd => RetractionKind::Euclidean,
            _ => RetractionKind::Exp,
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SolverKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let valid: Vec<_> = SolverKind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown solver `{s}` (valid solvers: {})", valid.join(", "))
        })
    }
}

/// One experiment, as a flat JSON document with kebab-case keys. Every field
/// has a default; command-line flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct RunConfig {
    /// CSV file with one observation per row.
    pub data: Option<PathBuf>,
    pub delimiter: char,
    pub header: bool,

    /// Number of samples to generate; selects the generator as data source.
    pub gen_n: Option<usize>,
    /// Truth sidecar to sample from instead of a random mixture.
    pub truth: Option<PathBuf>,
    pub gen_k: usize,
    pub gen_d: usize,
    pub gen_separation: f64,
    /// Generator seed; `seed` when absent.
    pub gen_seed: Option<u64>,

    pub k: usize,
    pub solver: SolverKind,
    /// Solvers run by `compare`.
    pub solvers: Vec<SolverKind>,
    pub init_candidates: usize,

    /// False switches every penalty term off (plain maximum likelihood).
    pub penalty: bool,
    pub kappa: f64,
    /// Inverse-Wishart degrees of freedom; `d + 1` when absent.
    pub nu: Option<f64>,
    pub beta: f64,
    pub zeta: f64,
    /// Prior scale matrix as a multiple of the sample covariance.
    pub scale_factor: f64,
    /// Raw override: with `raw-alpha` set, ρ, κ, α, β are used independently.
    pub raw_rho: Option<f64>,
    pub raw_alpha: Option<f64>,

    pub max_iter: usize,
    pub ftol: f64,
    pub gtol: f64,
    pub max_evals: Option<f64>,
    pub memory: usize,

    /// Mini-batch size; the data dimension when absent.
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    pub schedule: ScheduleKind,
    pub step_start: f64,
    pub step_end: f64,
    pub step_c: f64,
    pub lipschitz: Option<f64>,
    pub sigma: Option<f64>,
    pub sampling: Sampling,
    pub checkpoints_per_epoch: usize,

    /// Per-solver default when absent.
    pub retraction: Option<RetractionKind>,
    pub seed: u64,
    pub out: PathBuf,
    /// Wall-clock columns make output files non-reproducible and are off by default.
    pub record_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            delimiter: ',',
            header: false,
            gen_n: None,
            truth: None,
            gen_k: 2,
            gen_d: 2,
            gen_separation: 4.0,
            gen_seed: None,
            k: 2,
            solver: SolverKind::Lbfgs,
            solvers: SolverKind::ALL.to_vec(),
            init_candidates: 30,
            penalty: true,
            kappa: 2.0,
            nu: None,
            beta: 1.0,
            zeta: 1.0,
            scale_factor: 0.01,
            raw_rho: None,
            raw_alpha: None,
            max_iter: 1000,
            ftol: 1e-6,
            gtol: 1e-10,
            max_evals: None,
            memory: 10,
            batch_size: None,
            max_epochs: 10,
            schedule: ScheduleKind::ExponentialDecay,
            step_start: 1.0,
            step_end: 1e-3,
            step_c: 1.0,
            lipschitz: None,
            sigma: None,
            sampling: Sampling::WithoutReplacement,
            checkpoints_per_epoch: 10,
            retraction: None,
            seed: 0,
            out: PathBuf::from("riemmix-out"),
            record_wall_time: false,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub solver: Option<SolverKind>,
    pub k: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub retraction: Option<RetractionKind>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.solver {
            self.solver = v;
        }
        if let Some(v) = o.k {
            self.k = v;
        }
        if let Some(v) = o.batch_size {
            self.batch_size = Some(v);
        }
        if let Some(v) = o.max_epochs {
            self.max_epochs = v;
        }
        if let Some(v) = o.retraction {
            self.retraction = Some(v);
        }
    }

    /// Checks what can be checked without the data.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::config(m.to_string()));
        match (&self.data, self.gen_n) {
            (Some(_), Some(_)) => return bad("give exactly one data source: `data` or `gen-n`, not both"),
            (None, None) => return bad("no data source: set `data` (CSV path) or `gen-n` (generator)"),
            _ => {}
        }
        if self.truth.is_some() && self.gen_n.is_none() {
            return bad("`truth` only applies to the generator (`gen-n`)");
        }
        if !self.delimiter.is_ascii() {
            return bad("delimiter must be a single ASCII character");
        }
        if self.k == 0 || self.gen_k == 0 || self.gen_d == 0 {
            return bad("k, gen-k and gen-d must be positive");
        }
        if self.init_candidates == 0 {
            return bad("init-candidates must be positive");
        }
        if self.solvers.is_empty() {
            return bad("solvers must name at least one solver");
        }
        if self.max_epochs == 0 || self.batch_size == Some(0) || self.checkpoints_per_epoch == 0 {
            return bad("max-epochs, batch-size and checkpoints-per-epoch must be positive");
        }
        if !(self.ftol >= 0.0) || !(self.gtol >= 0.0) {
            return bad("ftol and gtol must be nonnegative");
        }
        if self.raw_rho.is_some() != self.raw_alpha.is_some() {
            return bad("raw penalty override needs both raw-rho and raw-alpha");
        }
        Ok(())
    }

    pub fn retraction_for(&self, solver: SolverKind) -> RetractionKind {
        self.retraction.unwrap_or(solver.default_retraction())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let c = RunConfig::from_json(r#"{"gen-n": 10, "solver": "cg", "retraction": "euclidean"}"#).unwrap();
        assert_eq!(c.gen_n, Some(10));
        assert_eq!(c.solver, SolverKind::Cg);
        assert_eq!(c.k, 2);
        let echo = c.to_json();
        assert_eq!(RunConfig::from_json(&echo).unwrap().to_json(), echo);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_documents() {
        let e = RunConfig::from_json(r#"{"solver": "newton"}"#).unwrap_err();
        assert!(e.message.contains("lbfgs") && e.message.contains("em"), "{}", e.message);
        assert!(RunConfig::from_json(r#"{"typo-key": 1}"#).is_err());
        let both = RunConfig::from_json(r#"{"gen-n": 5, "data": "x.csv"}"#).unwrap();
        assert!(both.validate().is_err());
        assert!(RunConfig::default().validate().is_err());
        assert_eq!("sgd".parse::<SolverKind>(), Ok(SolverKind::Sgd));
        assert!("bfgs".parse::<SolverKind>().unwrap_err().contains("lbfgs, cg, sgd, em"));
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::from_json(r#"{"gen-n": 5, "seed": 1, "k": 3}"#).unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            k: Some(4),
            ..Default::default()
        });
        assert_eq!((c.seed, c.k), (9, 4));
        assert_eq!(c.retraction_for(SolverKind::Sgd), RetractionKind::Euclidean);
        assert_eq!(c.retraction_for(SolverKind::Lbfgs), RetractionKind::Exp);
    }
}
