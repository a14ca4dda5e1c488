use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riemmix::harness::{self, HarnessError, Overrides, RunConfig, SolverKind};
use riemmix::manifold::RetractionKind;

/// Gaussian mixture fitting by Riemannian optimization.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one solver and write report.json and trace.csv.
    Fit(RunArgs),
    /// Run several solvers from one shared start and write aligned traces.
    Compare(RunArgs),
    /// Generate synthetic data and a truth sidecar.
    Gen(RunArgs),
    /// Run the fast property suite.
    Selftest {
        #[arg(long, hide = true)]
        perturb_gradient: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    solver: Option<SolverKind>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    retraction: Option<RetractionKind>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            solver: self.solver,
            k: self.k,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            retraction: self.retraction,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn configure_threads() -> Result<(), HarnessError> {
    let Ok(value) = std::env::var("RIEMMIX_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| HarnessError::config(format!("RIEMMIX_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| HarnessError::config(e.to_string()))
}

fn run(cli: Cli) -> Result<u8, HarnessError> {
    configure_threads()?;
    match cli.command {
        Command::Fit(args) => harness::cmd_fit(&args.resolve()?).map(|_| 0),
        Command::Compare(args) => harness::cmd_compare(&args.resolve()?).map(|r| if r.any_failed() { 4 } else { 0 }),
        Command::Gen(args) => harness::cmd_gen(&args.resolve()?).map(|_| 0),
        Command::Selftest { perturb_gradient } => Ok(harness::cmd_selftest(perturb_gradient, &mut std::io::stdout()) as u8),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
