use std::path::Path;
use std::process::{Command, Output};

fn cpomdp(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpomdp"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn compile_writes_minimal_automata() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpomdp(dir.path(), &["compile", "--spec", "F a & G !b", "--dot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&dir.path().join("dfa.json"))["n_states"], 3);
    assert!(dir.path().join("dfa.dot").exists());
    assert_eq!(json(&dir.path().join("manifest.json"))["command"], "compile");

    let out = cpomdp(dir.path(), &["compile", "--spec", "true"]);
    assert!(out.status.success());
    let dfa = json(&dir.path().join("dfa.json"));
    assert_eq!(dfa["n_states"], 1);
    assert_eq!(dfa["accepting"], serde_json::json!([0]));
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpomdp(dir.path(), &["compile", "--spec", "a U"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let out = cpomdp(
        dir.path(),
        &["solve", "--model", "chain3", "--spec", "F a", "--threshold", "0.5", "--B", "2", "--K", "0"],
    );
    assert_eq!(out.status.code(), Some(2));

    let out = cpomdp(dir.path(), &["product", "--model", "M42", "--spec", "F a"]);
    assert_eq!(out.status.code(), Some(3));

    let out = cpomdp(
        dir.path(),
        &["solve", "--model", "chain3", "--spec", "F a", "--threshold", "1.5", "--B", "2", "--K", "3"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn model_files_feed_the_product_command() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cpomdp(dir.path(), &["model", "M1"]).status.success());
    let path = dir.path().join("M1.model");
    let out = cpomdp(dir.path(), &["product", "--model", path.to_str().unwrap(), "--spec", "phi1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("product.json").exists());
}

#[test]
fn bench_dry_run_plans_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpomdp(dir.path(), &["bench", "--rows", "all", "--dry-run"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with('M')).count(), 9);

    let out = cpomdp(dir.path(), &["bench", "--rows", "M1", "--dry-run"]);
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with('M')).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].contains("threshold=0.75") && rows[0].contains("B=5") && rows[0].contains("K=100"));
}

fn small_solve(dir: &Path, k: &str) -> Output {
    cpomdp(
        dir,
        &[
            "--seed", "7", "solve", "--model", "chain3", "--spec", "F a", "--threshold", "0.5",
            "--B", "5", "--K", k, "--simu", "50", "--eval-rollouts", "50",
        ],
    )
}

#[test]
fn solve_records_the_resolved_learning_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_solve(dir.path(), "100");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(&dir.path().join("manifest.json"));
    let eta = manifest["config"]["eta"].as_f64().unwrap();
    assert!((eta - 0.011774).abs() < 5e-7, "{eta}");
    for f in ["product.json", "policies.json", "result.json", "bfs.json", "theorem2.json", "trace.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("k,lambda,r_hat,p_hat"));
    assert_eq!(trace.lines().count(), 101);
}

#[test]
fn reruns_reproduce_results_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_solve(a.path(), "5").status.success());
    assert!(small_solve(b.path(), "5").status.success());
    for f in ["result.json", "policies.json", "bfs.json", "trace.csv", "manifest.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn saved_policies_can_be_evaluated_and_traced() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_solve(dir.path(), "3").status.success());
    let policies = dir.path().join("policies.json");
    let p = policies.to_str().unwrap();
    let out = cpomdp(
        dir.path(),
        &["evaluate", "--model", "chain3", "--spec", "F a", "--policies", p, "--rollouts", "100"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = json(&dir.path().join("evaluation.json"));
    assert_eq!(est["n"], 100);
    let out = cpomdp(dir.path(), &["trace", "--model", "chain3", "--spec", "F a", "--policies", p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,s,q,a,o,r"));
}
