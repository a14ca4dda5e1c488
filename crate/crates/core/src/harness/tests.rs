use super::*;
use crate::objective::sample_moments;

fn config(json: &str, out: &Path) -> RunConfig {
    let mut c = RunConfig::from_json(json).unwrap();
    c.out = out.to_path_buf();
    c
}

#[test]
fn fit_single_gaussian_matches_the_mle() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        r#"{"gen-n": 400, "gen-k": 1, "gen-d": 3, "k": 1, "penalty": false, "ftol": 0, "gtol": 1e-9}"#,
        dir.path(),
    );
    let report = cmd_fit(&c).unwrap();
    let (mean, cov) = sample_moments(&load_data(&c).unwrap().rows).unwrap();
    let est = report.estimate.to_estimate().unwrap();
    assert!((&est.means[0] - &mean).amax() < 1e-4 * mean.amax().max(1.0));
    assert!((&est.covariances[0] - &cov).amax() < 1e-4 * cov.amax());
    assert!(dir.path().join("trace.csv").exists());
    let back: RunReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.config.to_json(), c.to_json());
}

#[test]
fn fit_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for solver in ["lbfgs", "sgd", "em"] {
        let json = format!(r#"{{"gen-n": 300, "gen-k": 2, "gen-d": 2, "solver": "{solver}", "max-epochs": 2}}"#);
        let c = config(&json, dir.path());
        cmd_fit(&c).unwrap();
        let first: Vec<Vec<u8>> = ["trace.csv", "report.json"]
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
            .collect();
        cmd_fit(&c).unwrap();
        for (f, before) in ["trace.csv", "report.json"].iter().zip(&first) {
            assert!(std::fs::read(dir.path().join(f)).unwrap() == *before, "{solver} {f}");
        }
    }
}

#[test]
fn compare_shares_the_start_and_gaps_never_increase() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        r#"{"gen-n": 400, "gen-k": 2, "gen-d": 2, "gen-separation": 6, "max-epochs": 3}"#,
        dir.path(),
    );
    let report = cmd_compare(&c).unwrap();
    assert!(!report.any_failed());
    for s in SolverKind::ALL {
        let gaps = report.gaps(s);
        assert!(!gaps.is_empty());
        assert!(gaps.windows(2).all(|w| w[1].1 <= w[0].1));
        assert!(gaps.iter().all(|g| g.1 >= 0.0));
        assert!(dir.path().join(format!("trace_{s}.csv")).exists());
    }
    // lbfgs and em reach the common best objective.
    for s in [SolverKind::Lbfgs, SolverKind::Em] {
        assert!(report.gaps(s).last().unwrap().1 < 1e-3, "{s}");
    }
    let text = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert!(text.starts_with("solver,evals,gap\n"));
}

#[test]
fn compare_reports_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        r#"{"gen-n": 200, "solvers": ["lbfgs", "sgd"], "schedule": "lipschitz-capped"}"#,
        dir.path(),
    );
    let report = cmd_compare(&c).unwrap();
    assert!(report.any_failed());
    assert!(dir.path().join("trace_lbfgs.csv").exists());
    assert!(!dir.path().join("trace_sgd.csv").exists());
}

#[test]
fn gen_round_trips_and_handles_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(r#"{"gen-n": 100, "gen-k": 2, "gen-d": 3, "seed": 5}"#, dir.path());
    let ds = cmd_gen(&c).unwrap();
    let back = load_csv(dir.path().join("data.csv"), &CsvOptions::default()).unwrap();
    assert_eq!(back.rows, ds.rows);
    let truth = read_truth(&dir.path().join("truth.json")).unwrap();
    assert_eq!(&truth.truth.to_estimate().unwrap(), ds.truth().unwrap());
    assert_eq!((truth.seed, truth.n), (5, 100));

    // Sampling from the sidecar reproduces the data.
    let again = tempfile::tempdir().unwrap();
    let mut c2 = config(r#"{"gen-n": 100, "seed": 5}"#, again.path());
    c2.truth = Some(dir.path().join("truth.json"));
    assert_eq!(cmd_gen(&c2).unwrap().rows, ds.rows);

    let empty = tempfile::tempdir().unwrap();
    cmd_gen(&config(r#"{"gen-n": 0}"#, empty.path())).unwrap();
    assert_eq!(std::fs::read(empty.path().join("data.csv")).unwrap(), b"");
    assert_eq!(read_truth(&empty.path().join("truth.json")).unwrap().n, 0);
}

#[test]
fn error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = config(r#"{"data": "/nonexistent/x.csv"}"#, dir.path());
    assert_eq!(cmd_fit(&missing).unwrap_err().code, 2);
    let blocked = dir.path().join("file");
    std::fs::write(&blocked, b"").unwrap();
    let unwritable = config(r#"{"gen-n": 10}"#, &blocked.join("sub"));
    assert_eq!(cmd_gen(&unwritable).unwrap_err().code, 2);
    assert_eq!(cmd_fit(&config(r#"{"gen-n": 2, "k": 2}"#, dir.path())).unwrap_err().code, 2);
    assert_eq!(HarnessError::from(Error::NonFinite("x")).code, 3);
}

#[test]
fn selftest_reports_groups() {
    let mut out = Vec::new();
    assert_eq!(cmd_selftest(false, &mut out), 0);
    let text = String::from_utf8(out).unwrap();
    for g in ["manifold", "gradient", "wolfe", "concavity"] {
        assert!(text.contains(&format!("[pass] {g}")), "{text}");
    }
    let mut out = Vec::new();
    assert_eq!(cmd_selftest(true, &mut out), 1);
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("[FAIL] gradient") && text.contains("selftest failed: gradient"), "{text}");
}

#[test]
fn atomic_write_leaves_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.txt");
    write_atomic(&p, b"one").unwrap();
    write_atomic(&p, b"two").unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), b"two");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}
