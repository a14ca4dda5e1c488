//! Run configuration, solver dispatch and persistence behind the `riemmix`
//! binary. Every command is a library function so it can be tested without
//! spawning a process.
//!
//! Exit codes: 0 success, 1 selftest failure, 2 configuration or I/O error,
//! 3 numerical failure, 4 partial failure in `compare`.

mod config;
mod files;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use config::{Overrides, RunConfig, SolverKind};
pub use files::{read_truth, write_atomic, MixtureJson, TruthFile};

use crate::data::{kmeanspp_init, load_csv, random_mixture, sample_gmm, write_csv, CsvOptions, Dataset};
use crate::em::{em_fit_lifted, EmOptions};
use crate::error::Error;
use crate::objective::{augment, embed_mixture, recover_mixture, GmmProblem, MixtureEstimate, PenaltyConfig};
use crate::optim::{cg, lbfgs, sgd, BatchOptions, ConvergenceTrace, SgdOptions, SgdSchedule, StopReason};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessError {
    pub code: i32,
    pub message: String,
}

impl HarnessError {
    pub fn config(message: impl Into<String>) -> Self {
        HarnessError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        HarnessError {
            code: 3,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for HarnessError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Io(_) | Error::Parse { .. } | Error::Dimension { .. } => HarnessError::config(e.to_string()),
            _ => HarnessError::numeric(e.to_string()),
        }
    }
}

type HResult<T> = std::result::Result<T, HarnessError>;

/// The dataset named by `cfg`, loaded or generated.
pub fn load_data(cfg: &RunConfig) -> HResult<Dataset> {
    cfg.validate()?;
    if let Some(path) = &cfg.data {
        let opts = CsvOptions {
            delimiter: cfg.delimiter as u8,
            header: cfg.header,
        };
        return Ok(load_csv(path, &opts)?);
    }
    let n = cfg.gen_n.expect("validated");
    let seed = cfg.gen_seed.unwrap_or(cfg.seed);
    let truth = match &cfg.truth {
        Some(path) => read_truth(path)?.truth.to_estimate()?,
        None => random_mixture(cfg.gen_k, cfg.gen_d, cfg.gen_separation, seed)?,
    };
    Ok(sample_gmm(&truth, n, seed)?)
}

/// The penalty configuration `cfg` asks for on `rows`.
pub fn penalty_for(cfg: &RunConfig, rows: &DMatrix<f64>) -> HResult<PenaltyConfig> {
    let d = rows.ncols();
    if !cfg.penalty {
        return Ok(PenaltyConfig::none(d));
    }
    let derived = PenaltyConfig::from_data(rows, cfg.kappa, cfg.beta, cfg.zeta, cfg.nu, cfg.scale_factor)?;
    match (cfg.raw_rho, cfg.raw_alpha) {
        (Some(rho), Some(alpha)) => Ok(PenaltyConfig::raw(
            rho,
            cfg.kappa,
            alpha,
            cfg.beta,
            cfg.zeta,
            &derived.scale_matrix,
            &derived.prior_mean,
        )?),
        _ => Ok(derived),
    }
}

/// Outcome of one solver run, in the minimization convention.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub solver: SolverKind,
    pub estimate: MixtureEstimate,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evals: f64,
    pub stop: StopReason,
    pub trace: ConvergenceTrace,
    pub wall_ms: f64,
}

/// Runs `solver` from `init` on `rows` with the options in `cfg`.
pub fn run_solver(solver: SolverKind, rows: &DMatrix<f64>, pen: &PenaltyConfig, init: &MixtureEstimate, cfg: &RunConfig) -> crate::Result<SolverRun> {
    let started = std::time::Instant::now();
    let y = augment(rows)?;
    let x0 = embed_mixture(init)?;
    let problem = GmmProblem::new(y.clone(), pen.clone(), cfg.retraction_for(solver))?;
    let batch = |base: BatchOptions| BatchOptions {
        max_iter: cfg.max_iter,
        ftol: cfg.ftol,
        gtol: cfg.gtol,
        max_evals: cfg.max_evals,
        memory: cfg.memory,
        ..base
    };
    let finish = |x, objective, grad_norm, iterations, evals, stop, trace| -> crate::Result<SolverRun> {
        Ok(SolverRun {
            solver,
            estimate: recover_mixture(&x)?,
            objective,
            grad_norm,
            iterations,
            evals,
            stop,
            trace,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    };
    match solver {
        SolverKind::Lbfgs | SolverKind::Cg => {
            let out = if solver == SolverKind::Lbfgs {
                lbfgs(&problem, x0, &batch(BatchOptions::default()))?
            } else {
                cg(&problem, x0, &batch(BatchOptions::for_cg()))?
            };
            finish(out.x, out.value, out.grad_norm, out.iterations, out.evals, out.stop, out.trace)
        }
        SolverKind::Sgd => {
            let opts = SgdOptions {
                batch_size: cfg.batch_size.unwrap_or(rows.ncols()).min(rows.nrows()),
                epochs: cfg.max_epochs,
                sampling: cfg.sampling,
                seed: cfg.seed,
                checkpoints_per_epoch: cfg.checkpoints_per_epoch,
                ..SgdOptions::default()
            };
            let horizon = opts.total_updates(rows.nrows());
            let schedule = match cfg.schedule {
                crate::optim::ScheduleKind::ExponentialDecay => SgdSchedule::exponential(cfg.step_start, cfg.step_end, horizon)?,
                crate::optim::ScheduleKind::InvSqrt => SgdSchedule::inv_sqrt(cfg.step_c, horizon)?,
                crate::optim::ScheduleKind::LipschitzCapped => {
                    let (l, s) = cfg
                        .lipschitz
                        .zip(cfg.sigma)
                        .ok_or_else(|| Error::arg("the lipschitz-capped schedule needs `lipschitz` and `sigma`"))?;
                    SgdSchedule::lipschitz_capped(l, s, cfg.step_c, horizon)?
                }
            };
            let out = sgd(&problem, x0, &schedule, &opts)?.result;
            finish(out.x, out.value, out.grad_norm, out.iterations, out.evals, out.stop, out.trace)
        }
        SolverKind::Em => {
            let opts = EmOptions {
                max_iter: cfg.max_iter,
                ftol: cfg.ftol,
                max_evals: cfg.max_evals,
            };
            let out = em_fit_lifted(&y, pen, x0, &opts)?;
            let objective = -out.objectives.last().copied().expect("at least one evaluation");
            finish(out.params, objective, f64::NAN, out.iterations, out.evals, out.stop, out.trace)
        }
    }
}

/// What `fit` writes as `report.json`. Objectives are log-likelihoods
/// (maximization convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunReport {
    pub version: String,
    pub rng: String,
    pub solver: SolverKind,
    pub stop: StopReason,
    pub n: usize,
    pub d: usize,
    pub iterations: usize,
    pub evals: f64,
    pub penalized_loglik: f64,
    /// Absent for EM, which computes no gradient.
    pub grad_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<f64>,
    pub initial_penalized_loglik: f64,
    pub estimate: MixtureJson,
    pub config: RunConfig,
}

fn trace_bytes(trace: &ConvergenceTrace, cfg: &RunConfig) -> HResult<Vec<u8>> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf, -1.0, cfg.record_wall_time)?;
    Ok(buf)
}

fn ensure_dir(dir: &Path) -> HResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::config(format!("cannot create output directory {}: {e}", dir.display())))
}

fn summary_line(run: &SolverRun) -> String {
    format!(
        "{}: stop={} iterations={} evals={} penalized-loglik={:.10e}",
        run.solver, run.stop, run.iterations, run.evals, -run.objective
    )
}

/// Data, penalty and shared k-means++ start for `cfg`.
pub fn prepare(cfg: &RunConfig) -> HResult<(Dataset, PenaltyConfig, MixtureEstimate, f64)> {
    let ds = load_data(cfg)?;
    if ds.n() <= cfg.k {
        return Err(HarnessError::config(format!(
            "need more samples ({}) than components ({})",
            ds.n(),
            cfg.k
        )));
    }
    let pen = penalty_for(cfg, &ds.rows)?;
    let init = kmeanspp_init(&ds.rows, cfg.k, cfg.init_candidates, cfg.seed, &pen)?;
    Ok((ds, pen, init.estimate, init.objective))
}

/// `fit`: one solver end to end; writes `report.json` and `trace.csv`.
pub fn cmd_fit(cfg: &RunConfig) -> HResult<RunReport> {
    let (ds, pen, init, init_obj) = prepare(cfg)?;
    let run = run_solver(cfg.solver, &ds.rows, &pen, &init, cfg)?;
    ensure_dir(&cfg.out)?;
    let report = RunReport {
        version: VERSION.to_string(),
        rng: crate::random::RNG_IDENTITY.to_string(),
        solver: cfg.solver,
        stop: run.stop,
        n: ds.n(),
        d: ds.d(),
        iterations: run.iterations,
        evals: run.evals,
        penalized_loglik: -run.objective,
        grad_norm: run.grad_norm.is_finite().then_some(run.grad_norm),
        wall_ms: cfg.record_wall_time.then_some(run.wall_ms),
        initial_penalized_loglik: init_obj,
        estimate: MixtureJson::from_estimate(&run.estimate),
        config: cfg.clone(),
    };
    write_atomic(&cfg.out.join("trace.csv"), &trace_bytes(&run.trace, cfg)?)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&cfg.out.join("report.json"), json.as_bytes())?;
    println!("{}", summary_line(&run));
    Ok(report)
}

/// Per-solver result of `compare`.
#[derive(Debug)]
pub struct CompareEntry {
    pub solver: SolverKind,
    pub result: Result<SolverRun, String>,
}

#[derive(Debug)]
pub struct CompareReport {
    pub entries: Vec<CompareEntry>,
    /// Smallest objective reached by any solver (minimization convention).
    pub best: f64,
}

impl CompareReport {
    pub fn any_failed(&self) -> bool {
        self.entries.iter().any(|e| e.result.is_err())
    }

    /// `(evals, best-so-far gap)` for one solver.
    pub fn gaps(&self, solver: SolverKind) -> Vec<(f64, f64)> {
        let Some(Ok(run)) = self.entries.iter().find(|e| e.solver == solver).map(|e| &e.result) else {
            return Vec::new();
        };
        let mut best = f64::INFINITY;
        run.trace
            .records()
            .iter()
            .map(|r| {
                best = best.min(r.objective);
                (r.evals, best - self.best)
            })
            .collect()
    }
}

/// Runs every solver of `cfg.solvers` from one shared start, without
/// writing files.
pub fn compare_runs(cfg: &RunConfig) -> HResult<CompareReport> {
    let (ds, pen, init, _) = prepare(cfg)?;
    let entries: Vec<CompareEntry> = cfg
        .solvers
        .iter()
        .map(|&solver| CompareEntry {
            solver,
            result: run_solver(solver, &ds.rows, &pen, &init, cfg).map_err(|e| e.to_string()),
        })
        .collect();
    let best = entries
        .iter()
        .filter_map(|e| e.result.as_ref().ok())
        .flat_map(|r| r.trace.records().iter().map(|t| t.objective))
        .fold(f64::INFINITY, f64::min);
    Ok(CompareReport { entries, best })
}

/// `compare`: writes `trace_<solver>.csv` for every surviving solver and
/// `compare.csv` with columns `solver,evals,gap`.
pub fn cmd_compare(cfg: &RunConfig) -> HResult<CompareReport> {
    let report = compare_runs(cfg)?;
    ensure_dir(&cfg.out)?;
    let mut combined = csv::Writer::from_writer(Vec::new());
    combined
        .write_record(["solver", "evals", "gap"])
        .map_err(|e| HarnessError::config(e.to_string()))?;
    for entry in &report.entries {
        match &entry.result {
            Ok(run) => {
                write_atomic(&cfg.out.join(format!("trace_{}.csv", entry.solver)), &trace_bytes(&run.trace, cfg)?)?;
                for (evals, gap) in report.gaps(entry.solver) {
                    combined
                        .write_record([entry.solver.name().to_string(), evals.to_string(), gap.to_string()])
                        .map_err(|e| HarnessError::config(e.to_string()))?;
                }
                println!("{}", summary_line(run));
            }
            Err(msg) => println!("{}: FAILED: {msg}", entry.solver),
        }
    }
    let bytes = combined.into_inner().map_err(|e| HarnessError::config(e.to_string()))?;
    write_atomic(&cfg.out.join("compare.csv"), &bytes)?;
    Ok(report)
}

/// `gen`: writes `data.csv` and the `truth.json` sidecar.
pub fn cmd_gen(cfg: &RunConfig) -> HResult<Dataset> {
    if cfg.gen_n.is_none() {
        return Err(HarnessError::config("gen needs `gen-n` (number of samples)"));
    }
    let ds = load_data(cfg)?;
    ensure_dir(&cfg.out)?;
    let mut buf = Vec::new();
    write_csv(&ds.rows, &mut buf)?;
    write_atomic(&cfg.out.join("data.csv"), &buf)?;
    let truth = TruthFile {
        seed: cfg.gen_seed.unwrap_or(cfg.seed),
        n: ds.n(),
        truth: MixtureJson::from_estimate(ds.truth().expect("generated")),
    };
    let json = serde_json::to_string_pretty(&truth).expect("truth serializes");
    write_atomic(&cfg.out.join("truth.json"), json.as_bytes())?;
    println!("wrote {} samples of dimension {} to {}", ds.n(), ds.d(), cfg.out.display());
    Ok(ds)
}

/// `selftest`: prints one line per check and returns the exit code.
pub fn cmd_selftest(perturb_gradient: bool, out: &mut impl std::io::Write) -> i32 {
    let groups = match crate::checks::selftest_groups(0, if perturb_gradient { 1e-3 } else { 0.0 }) {
        Ok(g) => g,
        Err(e) => {
            let _ = writeln!(out, "selftest aborted: {e}");
            return 3;
        }
    };
    let mut failed = Vec::new();
    for g in &groups {
        let _ = writeln!(out, "[{}] {}", if g.passed() { "pass" } else { "FAIL" }, g.name);
        for r in &g.reports {
            let _ = writeln!(out, "    {r}");
        }
        if !g.passed() {
            failed.push(g.name);
        }
    }
    if failed.is_empty() {
        let _ = writeln!(out, "selftest passed");
        0
    } else {
        let _ = writeln!(out, "selftest failed: {}", failed.join(", "));
        1
    }
}

#[cfg(test)]
mod tests;
