use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG: &str = r#"
algorithm = "async-linucb"
T = 200
seed = 4

[env]
mode = "homogeneous"
N = 4
K = 5
d = 3

[proto]
gamma = 2.0
"#;

fn fedbandit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedbandit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    (dir, cfg)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_a_trace_and_ledger() {
    let (dir, cfg) = setup();
    let out = dir.path().join("trace.csv");
    let ledger = dir.path().join("ledger.csv");
    let res = fedbandit(&["run", "--config", s(&cfg), "--out", s(&out), "--ledger", s(&ledger)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let trace = fs::read_to_string(&out).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("t,cum_regret,cum_comm"));
    assert_eq!(lines.count(), 200);
    assert!(!trace.contains('\r'));

    let ledger = fs::read_to_string(&ledger).unwrap();
    let last_comm: u64 = trace.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(ledger.lines().count() as u64, last_comm + 1);
}

#[test]
fn run_to_stdout_matches_file_output() {
    let (dir, cfg) = setup();
    let out = dir.path().join("trace.csv");
    assert!(fedbandit(&["run", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let stdout = fedbandit(&["run", "--config", s(&cfg)]);
    assert!(stdout.status.success());
    assert_eq!(stdout.stdout, fs::read(&out).unwrap());
}

#[test]
fn overrides_change_the_run() {
    let (_dir, cfg) = setup();
    let res = fedbandit(&["run", "--config", s(&cfg), "--set", "proto.gamma=\"inf\""]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn sweep_writes_one_row_per_cell_and_seed() {
    let (dir, cfg) = setup();
    let out = dir.path().join("sweep.csv");
    let res = fedbandit(&[
        "sweep", "--config", s(&cfg), "--grid", "proto.gamma=1.5,3,inf", "--seeds", "3", "--out", s(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("algorithm,param_name,param_value,seed,R_T,C_T,wall_ms"));
    assert_eq!(lines.count(), 9);
    assert!(String::from_utf8_lossy(&res.stderr).contains("proto.gamma=inf"));
}

#[test]
fn failing_sweep_cells_give_a_nonzero_exit() {
    let (_dir, cfg) = setup();
    let res = fedbandit(&["sweep", "--config", s(&cfg), "--grid", "proto.gamma=2,0.5", "--seeds", "2"]);
    assert!(!res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(String::from_utf8_lossy(&res.stderr).contains("failed"));
}

#[test]
fn preset_prints_a_loadable_config() {
    let (dir, cfg) = setup();
    let res = fedbandit(&["preset", "--name", "sync-D-centralrate", "--config", s(&cfg)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("sync-linucb"));
    let round_trip = dir.path().join("preset.toml");
    fs::write(&round_trip, &text).unwrap();
    assert!(fedbandit(&["run", "--config", s(&round_trip)]).status.success());
}

#[test]
fn bad_input_is_reported() {
    let (dir, cfg) = setup();
    let missing = dir.path().join("nope.toml");
    let res = fedbandit(&["run", "--config", s(&missing)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));

    let res = fedbandit(&["run", "--config", s(&cfg), "--set", "env.K=0"]);
    assert!(!res.status.success());

    let res = fedbandit(&["preset", "--name", "no-such-preset", "--config", s(&cfg)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("unknown preset"));
}
