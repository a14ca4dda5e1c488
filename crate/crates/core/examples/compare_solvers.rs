//! LBFGS, CG, SGD and EM from one shared k-means++ start on a synthetic
//! mixture. Prints, per solver, evaluations to reach a 1e-3 gap to the
//! common best objective and the best gap within the first 10% of the
//! evaluation axis.
//!
//! Usage: `compare_solvers [K] [d] [n] [seed] [separation]`.

use riemmix::harness::{compare_runs, RunConfig, SolverKind};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: usize| args.get(i).map_or(default, |s| s.parse().expect("integer argument"));
    let (k, d, n, seed) = (arg(0, 3), arg(1, 10), arg(2, 5000), arg(3, 0) as u64);
    let separation: f64 = args.get(4).map_or(1.0, |s| s.parse().expect("number"));
    let cfg = RunConfig {
        gen_n: Some(n),
        gen_k: k,
        gen_d: d,
        gen_separation: separation,
        k,
        seed,
        ..RunConfig::default()
    };
    let t = std::time::Instant::now();
    let report = compare_runs(&cfg).expect("comparison runs");
    let total = report
        .entries
        .iter()
        .filter_map(|e| e.result.as_ref().ok())
        .map(|r| r.evals)
        .fold(0.0, f64::max);
    println!(
        "K={k} d={d} n={n} seed={seed}: {:.1}s, evaluation axis 0..{total}",
        t.elapsed().as_secs_f64()
    );
    for s in SolverKind::ALL {
        let gaps = report.gaps(s);
        let reach = gaps.iter().find(|g| g.1 <= 1e-3).map(|g| g.0);
        let early = gaps.iter().take_while(|g| g.0 <= 0.1 * total).map(|g| g.1).fold(f64::INFINITY, f64::min);
        let last = gaps.last().map_or(f64::NAN, |g| g.1);
        println!("  {s:>5}: reaches 1e-3 at {reach:?}, best gap in first 10% {early:.4e}, final gap {last:.3e}");
    }
}
