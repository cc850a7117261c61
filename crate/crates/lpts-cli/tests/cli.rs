//! Black-box tests for the `lpts` binary: exit codes, file outputs, JSON
//! mode, and solver resolution.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lpts"))
}

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../lpts/tests/fixtures")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn validate_reports_basic_facts() {
    let f = fixture("models/u_half.lpts");
    let out = run(&["validate", f.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("valid:"));
}

#[test]
fn missing_file_is_a_usage_error() {
    let out = run(&["validate", "/nonexistent/x.lpts"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn classify_distinguishes_trees() {
    let out = run(&["classify", fixture("learnmin/pos/p.lpts").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("tree: true"));
    let out = run(&["classify", fixture("models/u_half.lpts").to_str().unwrap()]);
    assert!(stdout(&out).contains("tree: false"));
}

#[test]
fn check_sim_reflexive_succeeds() {
    let f = fixture("models/u_half.lpts");
    let out = run(&["check-sim", f.to_str().unwrap(), f.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("simulation holds"));
}

#[test]
fn check_sim_failure_exits_one_and_writes_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let cex = dir.path().join("cex.txt");
    let out = run(&[
        "check-sim",
        fixture("models/u_half.lpts").to_str().unwrap(),
        fixture("models/u_quarter.lpts").to_str().unwrap(),
        "--cex",
        cex.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let text = std::fs::read_to_string(&cex).unwrap();
    assert!(text.contains("lpts"), "counterexample file is written");
}

#[test]
fn check_equiv_json_has_direction_fields() {
    let out = run(&[
        "--json",
        "check-equiv",
        fixture("models/u_quarter.lpts").to_str().unwrap(),
        fixture("models/u_half.lpts").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["equal"], false);
    assert_eq!(v["forward_holds"], true); // u_quarter is below u_half
    assert_eq!(v["backward_holds"], false);
}

#[test]
fn compose_output_is_a_valid_model() {
    let dir = tempfile::tempdir().unwrap();
    let outf = dir.path().join("composed.lpts");
    let out = run(&[
        "compose",
        fixture("models/m1.lpts").to_str().unwrap(),
        fixture("models/m2.lpts").to_str().unwrap(),
        "--output",
        outf.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let out = run(&["validate", outf.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
}

#[test]
fn learn_consistent_without_negatives_needs_one_state() {
    let out = run(&[
        "learn-consistent",
        "--pos",
        fixture("learnmin/pos/p.lpts").to_str().unwrap(),
        "--backend",
        "enumerate",
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("least size: 1"));
}

#[test]
fn learn_consistent_accepts_sample_directories() {
    let out = run(&[
        "learn-consistent",
        "--pos",
        fixture("learnmin/pos").to_str().unwrap(),
        "--neg",
        fixture("learnmin/neg").to_str().unwrap(),
        "--backend",
        "enumerate",
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("least size: 3"));
}

#[test]
fn inconsistent_samples_exit_one() {
    let f = fixture("learnmin/pos/p.lpts");
    let out = run(&[
        "learn-consistent",
        "--pos",
        f.to_str().unwrap(),
        "--neg",
        f.to_str().unwrap(),
        "--backend",
        "enumerate",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn exhausted_size_bound_exits_four() {
    let out = run(&[
        "learn-consistent",
        "--pos",
        fixture("learnmin/pos").to_str().unwrap(),
        "--neg",
        fixture("learnmin/neg").to_str().unwrap(),
        "--backend",
        "enumerate",
        "--max-k",
        "1",
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn broken_solver_command_exits_three() {
    let out = run(&[
        "--solver-cmd",
        "/bin/false",
        "learn-consistent",
        "--pos",
        fixture("learnmin/pos").to_str().unwrap(),
        "--neg",
        fixture("learnmin/neg").to_str().unwrap(),
        "--backend",
        "solver",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn solver_env_var_is_honored() {
    let out = bin()
        .env("LPTS_SOLVER_CMD", "/bin/false")
        .args([
            "learn-consistent",
            "--pos",
            fixture("learnmin/pos").to_str().unwrap(),
            "--neg",
            fixture("learnmin/neg").to_str().unwrap(),
            "--backend",
            "solver",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn emit_smt_writes_a_script() {
    let dir = tempfile::tempdir().unwrap();
    let outf = dir.path().join("script.smt2");
    let out = run(&[
        "emit-smt",
        "--pos",
        fixture("learnmin/pos").to_str().unwrap(),
        "--neg",
        fixture("learnmin/neg").to_str().unwrap(),
        "--k",
        "3",
        "--output",
        outf.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&outf).unwrap();
    assert!(text.starts_with("(set-option"));
    assert!(text.contains("(check-sat)"));
}

#[test]
fn generate_is_reproducible_for_a_seed() {
    let a = run(&["generate", "--seed", "42", "--kind", "reactive"]);
    let b = run(&["generate", "--seed", "42", "--kind", "reactive"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    assert_ne!(stdout(&a), stdout(&run(&["generate", "--seed", "43", "--kind", "reactive"])));
}

#[test]
fn active_learn_converges_on_a_fixture_target() {
    let out = run(&[
        "active-learn",
        "--target",
        fixture("models/u_half.lpts").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("converged"));
}

#[test]
fn agr_holds_and_writes_the_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.lpts");
    let assumption = dir.path().join("assumption.lpts");
    let out = run(&[
        "compose",
        fixture("models/m1.lpts").to_str().unwrap(),
        fixture("models/m2.lpts").to_str().unwrap(),
        "--output",
        spec.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let out = run(&[
        "agr",
        "--l1",
        fixture("models/m1.lpts").to_str().unwrap(),
        "--l2",
        fixture("models/m2.lpts").to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--assumption",
        assumption.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("property holds"));
    let out = run(&["validate", assumption.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
}

#[test]
fn agr_violation_exits_one_with_a_counterexample_file() {
    let dir = tempfile::tempdir().unwrap();
    let cex = dir.path().join("cex.lpts");
    let out = run(&[
        "agr",
        "--l1",
        fixture("models/idle.lpts").to_str().unwrap(),
        "--l2",
        fixture("models/u_half.lpts").to_str().unwrap(),
        "--spec",
        fixture("models/u_quarter.lpts").to_str().unwrap(),
        "--cex",
        cex.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("property fails"));
    let out = run(&["validate", cex.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
}
