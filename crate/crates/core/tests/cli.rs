//! End-to-end runs of the `trustclear` binary on the checked-in instances.

mod common;

use std::process::{Command, Output};

fn trustclear(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trustclear")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

fn instance(name: &str) -> String {
    common::instance(name).to_string_lossy().into_owned()
}

#[test]
fn solve_third_party_trust_picks_agent_2() {
    let o = trustclear(&["solve", &instance("third_party_trust.json"), "--oracle"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("winner: agent 2, objective 0.8000"), "{s}");
    assert!(s.contains("oracle: objective 0.8000, match"), "{s}");
}

#[test]
fn solve_three_performers_picks_agent_2_at_120() {
    let s = stdout(&trustclear(&["solve", &instance("three_performers.json")]));
    assert!(s.contains("winner: agent 2, objective 120.0000"), "{s}");
}

#[test]
fn solve_writes_hypergraph_dump() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("graph.txt");
    let o = trustclear(&["solve", &instance("three_performers.json"), "--dump", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let dump = std::fs::read_to_string(&path).unwrap();
    assert!(dump.lines().any(|l| l.starts_with("v ")), "{dump}");
    assert!(dump.lines().any(|l| l.starts_with("c ")), "{dump}");
}

#[test]
fn porter_pays_overstating_agent_on_success() {
    let s = stdout(&trustclear(&["pay", &instance("three_performers_overstated.json"), "--mechanism", "porter", "--outcome", "success"]));
    assert!(s.contains("agent 1: 180.0000"), "{s}");
}

#[test]
fn naive_vickrey_payment_on_three_performers() {
    let s = stdout(&trustclear(&["pay", &instance("three_performers.json"), "--mechanism", "naive-vickrey", "--outcome", "success"]));
    assert!(s.contains("agent 2: 170.0000"), "{s}");
}

#[test]
fn single_task_fixed_discount_schedule() {
    let s = stdout(&trustclear(&["pay", &instance("single_task_discount.json"), "--mechanism", "single-task-tbm", "--policy", "fixed:0.6"]));
    assert!(s.contains("0b0: -0.6000"), "{s}");
    assert!(s.contains("0b1: 0.4000"), "{s}");
}

#[test]
fn all_fail_outcome_settles() {
    let o = trustclear(&["pay", &instance("third_party_trust.json"), "--outcome", "all-fail"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("outcome: 0b0"), "{s}");
    assert!(s.contains("centre balance:"), "{s}");
}

#[test]
fn gtbm_audit_on_third_party_trust_passes() {
    let o = trustclear(&["audit", &instance("third_party_trust.json"), "--step", "0.1", "--scalings", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn porter_extension_audit_on_third_party_trust_fails() {
    let o = trustclear(&["audit", &instance("third_party_trust.json"), "--mechanism", "porter-extension", "--step", "0.1", "--scalings", "3"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn count_all_bundles() {
    let s = stdout(&trustclear(&["count", "--all-bundles", "20x15x5"]));
    assert_eq!(s.trim(), "15187500");
}

#[test]
fn gen_is_deterministic() {
    let a = trustclear(&["gen", "--seed", "7"]);
    let b = trustclear(&["gen", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, trustclear(&["gen", "--seed", "8"]).stdout);
}

#[test]
fn generated_instance_solves_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let p = path.to_str().unwrap();
    assert_eq!(trustclear(&["gen", "--tasks", "3", "--requesters", "2", "--performers", "3", "--seed", "3", "--out", p]).status.code(), Some(0));
    let o = trustclear(&["solve", p, "--oracle"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(", match"));
}

#[test]
fn malformed_instance_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"tasks\": [0],").unwrap();
    let o = trustclear(&["solve", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn invalid_profile_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = std::fs::read_to_string(common::instance("third_party_trust.json")).unwrap().replace("0.6", "1.6");
    std::fs::write(&path, text).unwrap();
    let o = trustclear(&["solve", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).lines().count() >= 2);
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let o = trustclear(&["bench", "--sizes", "2x2x2,3x3x3", "--runs", "2", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("seed,n_tasks"));
}
