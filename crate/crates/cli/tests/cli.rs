//! Drives the `qlspb` binary end to end in a scratch directory.

use std::path::Path;
use std::process::{Command, Output};

fn qlspb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlspb"))
        .current_dir(dir)
        .env("QLSPB_THREADS", "2")
        .args(args)
        .output()
        .expect("spawn qlspb")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qlspb(dir, args);
    assert!(
        out.status.success(),
        "qlspb {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn generate_small(dir: &Path) {
    ok(
        dir,
        &["generate", "--kind", "nh", "--n", "8", "--kappa", "20", "--count", "4", "--seed", "3", "--out", "ens.json"],
    );
}

#[test]
fn generate_calibrate_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate_small(d);
    ok(d, &["calibrate", "--ensemble", "ens.json", "--target-delta", "0.3", "--nodes", "12", "--out", "cal.json"]);
    let csv = ok(d, &["report", "--input", "cal.json", "--format", "csv"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "series,kind,dimension,kappa,delta,epsilon,id,metric,value");
    assert!(csv.contains(",eta,"));
    assert_eq!(csv.lines().filter(|l| l.contains(",error,")).count(), 4);
    let json = ok(d, &["report", "--input", "cal.json", "--format", "json"]);
    assert!(json.trim_start().starts_with('{'));
}

#[test]
fn known_and_unknown_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate_small(d);
    let out = ok(d, &["run-known", "--ensemble", "ens.json", "--epsilon", "0.01", "--eta-rule", "worst-case"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 4);
    assert!(v["mean_error"].as_f64().unwrap() <= 0.01);

    let out = ok(d, &["run-unknown", "--ensemble", "ens.json", "--eta", "0.1"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["nodes"].as_u64(), Some(30));
    assert!(v["runs"][0]["q_succ"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate_small(d);
    std::fs::write(
        d.join("run.toml"),
        "[sweep]\nensemble = \"ens.json\"\ndelta-grid = [0.4, 0.3, 0.2]\nepsilons = [0.05]\nnodes = 12\nout = \"sweep.json\"\n\n\
         [compare]\nsweep = \"sweep.json\"\nbaseline = \"qw.csv\"\nout = \"cmp.json\"\n",
    )
    .unwrap();
    std::fs::write(
        d.join("qw.csv"),
        "method,kappa,delta,cost,mean_error,alpha_avg\nqw,20,0.4,70,0.39,0.2\nqw,20,0.3,84,0.29,0.2\n",
    )
    .unwrap();
    ok(d, &["--config", "run.toml", "sweep"]);
    ok(d, &["--config", "run.toml", "compare"]);
    ok(d, &["--config", "run.toml", "compare", "--double-stage1", "--out", "cmp2.json"]);
    let read = |f: &str| -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(d.join(f)).unwrap()).unwrap() };
    let (one, two) = (read("cmp.json"), read("cmp2.json"));
    let rows = one["comparison"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for (a, b) in rows.iter().zip(two["comparison"]["rows"].as_array().unwrap()) {
        assert_eq!(2.0 * a["rho"].as_f64().unwrap(), b["rho"].as_f64().unwrap());
    }
    let csv = ok(d, &["report", "--input", "cmp.json"]);
    assert!(csv.contains(",rho,"));
}

#[test]
fn validation_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate_small(d);
    let bad_grid = qlspb(d, &["sweep", "--ensemble", "ens.json", "--delta-grid", "0.3,0.2"]);
    assert_eq!(bad_grid.status.code(), Some(2));
    let missing = qlspb(d, &["calibrate", "--ensemble", "ens.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--target-delta"));
    let threads = Command::new(env!("CARGO_BIN_EXE_qlspb"))
        .current_dir(d)
        .env("QLSPB_THREADS", "zero")
        .args(["report", "--input", "ens.json"])
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
    let not_a_report = qlspb(d, &["report", "--input", "ens.json"]);
    assert_eq!(not_a_report.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // A rank-one matrix with a finite recorded κ cannot be solved.
    std::fs::write(
        d.join("sing.json"),
        r#"{"header":{"kind":"non_hermitian","n":2,"kappa_spec":{"exact":4.0},"count":1,"base_seed":0,"format_version":1},
            "instances":[{"id":"s","seed":0,"kappa_measured":4.0,"entries":[1.0,1.0,1.0,1.0],"b":[1.0,0.0]}]}"#,
    )
    .unwrap();
    let out = qlspb(d, &["run-known", "--ensemble", "sing.json", "--epsilon", "0.01"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
