use std::path::Path;
use std::process::{Command, Output};

fn riemmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riemmix"))
        .args(args)
        .env("RIEMMIX_THREADS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn fit_and_gen_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"gen-n": 300, "gen-k": 2, "gen-d": 3}"#);
    for sub in ["fit", "gen"] {
        let outs: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(format!("{sub}-{n}"))).collect();
        for o in &outs {
            let r = riemmix(&[sub, "--config", &cfg, "--seed", "4", "--out", o.to_str().unwrap()]);
            assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        }
        let files: &[&str] = if sub == "fit" { &["trace.csv"] } else { &["data.csv", "truth.json"] };
        for f in files {
            assert_eq!(
                std::fs::read(outs[0].join(f)).unwrap(),
                std::fs::read(outs[1].join(f)).unwrap(),
                "{sub} {f}"
            );
        }
    }
}

#[test]
fn unknown_solver_is_a_usage_error() {
    let r = riemmix(&["fit", "--solver", "newton"]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("lbfgs, cg, sgd, em"), "{err}");
}

#[test]
fn missing_data_source_is_a_config_error() {
    let r = riemmix(&["fit"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no data source"));
}

#[test]
fn selftest_exit_codes() {
    let ok = riemmix(&["selftest"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = riemmix(&["selftest", "--perturb-gradient"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("selftest failed: gradient"));
}

#[test]
fn compare_with_a_failing_solver_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"gen-n": 200, "solvers": ["lbfgs", "sgd"], "schedule": "lipschitz-capped"}"#,
    );
    let out = dir.path().join("cmp");
    let r = riemmix(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(4));
    assert!(out.join("trace_lbfgs.csv").exists());
    assert!(out.join("compare.csv").exists());
}
