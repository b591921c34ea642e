use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bloch-mca");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn bloch-mca")
}

fn read(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file))
        .unwrap_or_else(|e| panic!("{}: {e}", dir.join(file).display()))
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn explicit_defaults_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["solve"], &a).status.success());
    let explicit = [
        "solve",
        "--scenario",
        "eigenstate",
        "--omega",
        "5",
        "--beta",
        "0.1",
        "--gamma-max",
        "1",
        "--nodes",
        "1257",
        "--alphas",
        "-5,0,5",
        "--gammas",
        "0,1",
    ];
    assert!(run(&explicit, &b).status.success());
    for f in ["value.csv", "policy.csv", "report.json"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
}

#[test]
fn config_errors_exit_one_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    for (args, field) in [
        (vec!["solve", "--nodes", "2"], "nodes"),
        (vec!["solve", "--omega", "-1"], "omega"),
        (vec!["compare", "--beta", "zero"], "beta"),
        (vec!["simulate", "--paths", "0"], "paths"),
        (vec!["solve", "--gammas", "0,2"], "gammas"),
    ] {
        let out = run(&args, &tmp.path().join("x"));
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(field), "{args:?}: {stderr}");
    }
    let out = run(&["solve", "--no-such-flag"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_two_and_still_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "solve",
            "--nodes",
            "101",
            "--acceleration",
            "none",
            "--max-iters",
            "10",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_str(&read(tmp.path(), "report.json")).unwrap();
    assert_eq!(report["report"]["converged"], false);
    assert_eq!(report["report"]["iterations"], 10);
}

#[test]
fn without_measurement_dynamic_equals_rotation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "compare",
            "--scenario",
            "custom",
            "--lo",
            "-1",
            "--hi",
            "2",
            "--gamma-max",
            "0",
            "--nodes",
            "301",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(tmp.path(), "comparison.csv");
    let dynamic = column(&csv, "cost_dynamic");
    let rotation = column(&csv, "cost_rotation");
    assert_eq!(dynamic.len(), 301);
    for (d, r) in dynamic.iter().zip(&rotation) {
        assert!((d - r).abs() <= 1e-9, "{d} vs {r}");
    }
    assert!(column(&csv, "gamma_opt").iter().all(|g| *g == 0.0));
}

#[test]
fn deterministic_policy_ignores_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let common = [
        "simulate",
        "--policy",
        "pure_rotation",
        "--nodes",
        "401",
        "--paths",
        "200",
    ];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&[&common[..], &["--seed", "1"]].concat(), &a)
        .status
        .success());
    assert!(run(&[&common[..], &["--seed", "99"]].concat(), &b)
        .status
        .success());
    let csv = read(&a, "mc.csv");
    assert_eq!(csv, read(&b, "mc.csv"));
    assert!(column(&csv, "std_error").iter().all(|s| *s == 0.0));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn config_file_round_trip_and_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let args = [
        "solve",
        "--scenario",
        "non_eigenstate",
        "--nodes",
        "401",
        "--beta",
        "0.2",
    ];
    assert!(run(&args, &first).status.success());

    let replay = tmp.path().join("replay");
    let cfg = first.join("config.json");
    assert!(run(&["solve", "--config", cfg.to_str().unwrap()], &replay)
        .status
        .success());
    assert_eq!(read(&first, "value.csv"), read(&replay, "value.csv"));

    let kv = tmp.path().join("run.cfg");
    fs::write(&kv, "scenario = non_eigenstate\nnodes = 401\nbeta = 0.5\n").unwrap();
    let flagged = tmp.path().join("flagged");
    assert!(run(
        &["solve", "--config", kv.to_str().unwrap(), "--beta", "0.2"],
        &flagged
    )
    .status
    .success());
    assert_eq!(read(&first, "value.csv"), read(&flagged, "value.csv"));
    let resolved: serde_json::Value = serde_json::from_str(&read(&flagged, "config.json")).unwrap();
    assert_eq!(resolved["beta"], 0.2);
}

#[test]
fn simulate_from_saved_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let solved = tmp.path().join("solved");
    let args = ["--scenario", "non_eigenstate", "--nodes", "801"];
    assert!(run(&[&["solve"][..], &args].concat(), &solved)
        .status
        .success());

    let direct = tmp.path().join("direct");
    let loaded = tmp.path().join("loaded");
    let sim = ["simulate", "--paths", "300", "--theta0", "0.1,2.5"];
    assert!(run(&[&sim[..], &args].concat(), &direct).status.success());
    let from = ["--from", solved.to_str().unwrap()];
    assert!(run(&[&sim[..], &args, &from].concat(), &loaded)
        .status
        .success());

    let csv = read(&loaded, "mc.csv");
    assert_eq!(csv, read(&direct, "mc.csv"));
    assert_eq!(column(&csv, "theta0"), vec![0.1, 2.5]);
}

#[test]
fn compare_writes_table_and_crossings() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&["compare", "--nodes", "629"], tmp.path())
        .status
        .success());
    let csv = read(tmp.path(), "comparison.csv");
    assert_eq!(
        csv.lines().next().unwrap(),
        "theta,cost_dynamic,cost_fixed,cost_rotation,alpha_opt,gamma_opt"
    );
    assert_eq!(csv.lines().count(), 630);
    let crossings: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "crossings.json")).unwrap();
    assert_eq!(crossings["gamma_switches"].as_array().unwrap().len(), 2);
    let reports: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "reports.json")).unwrap();
    for k in ["dynamic", "fixed_measurement", "pure_rotation"] {
        assert_eq!(reports[k]["converged"], true, "{k}");
    }
}
