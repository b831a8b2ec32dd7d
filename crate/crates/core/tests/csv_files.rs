use std::fmt::Write as _;
use std::fs;

use fedbandit::config::RunConfig;
use fedbandit::protocol::CommLedger;
use fedbandit::sim::{MetricsTrace, Score};
use fedbandit::sweep::{run_sweep, Grid, SweepTable};
use fedbandit::{run_simulation, Error};
use tempfile::TempDir;

fn config(pairs: &[&str]) -> RunConfig {
    let mut cfg = RunConfig::default();
    for p in pairs {
        cfg.set_str(p).unwrap();
    }
    cfg
}

#[test]
fn trace_files_round_trip_with_the_gamma_column() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&[
        "algorithm=\"async-linucb\"",
        "proto.gamma=1.5",
        "env.mode=\"homogeneous\"",
        "T=120",
        "diag.trace_gamma=true",
        "diag.trace_ledger=true",
    ]);
    let trace = run_simulation(&cfg).unwrap();
    let path = dir.path().join("trace.csv");
    trace.save_csv(&path).unwrap();

    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,cum_regret,cum_comm,gamma_diag\n"));
    let back = MetricsTrace::read_csv(text.as_bytes(), &path).unwrap();
    assert_eq!(back.cum_score, trace.cum_score);
    assert_eq!(back.cum_comm, trace.cum_comm);
    assert_eq!(back.gamma, trace.gamma);
    assert!(back.gamma.unwrap().iter().all(|&g| g >= 1.0 - 1e-9));

    let ledger = trace.ledger.unwrap();
    let lpath = dir.path().join("ledger.csv");
    ledger.save_csv(&lpath).unwrap();
    let lback = CommLedger::read_csv(fs::File::open(&lpath).unwrap()).unwrap();
    assert_eq!(lback, ledger);
    assert_eq!(lback.total(), trace.cum_comm[119]);
}

#[test]
fn sweep_files_round_trip() {
    let dir = TempDir::new().unwrap();
    let base = config(&["algorithm=\"sync-linucb\"", "sync.D=1.0", "env.mode=\"homogeneous\"", "T=80"]);
    let grid: Grid = "sync.D=logspace:-1:1:3".parse().unwrap();
    let table = run_sweep(&base, &grid, 2).unwrap();
    assert_eq!(table.rows.len(), 6);
    let path = dir.path().join("sweep.csv");
    table.save_csv(&path).unwrap();
    let back = SweepTable::read_csv(fs::File::open(&path).unwrap(), &path).unwrap();
    assert_eq!(back.rows, table.rows);
    for row in &back.rows {
        assert_eq!(row.algorithm, "sync-linucb");
        assert_eq!(row.param_name, "sync.D");
        assert_eq!(row.c_t % 2, 0);
    }
}

#[test]
fn replay_runs_report_cumulative_reward() {
    let dir = TempDir::new().unwrap();
    let mut log = String::from("t,client_id,arm_index,reward,f_1,f_2\n");
    for t in 1..=30 {
        let client = t % 3;
        for k in 0..3 {
            let reward = u8::from(k == t % 3);
            writeln!(log, "{t},{client},{k},{reward},{},{}", 0.1 * k as f64, 0.3).unwrap();
        }
    }
    let replay = dir.path().join("log.csv");
    fs::write(&replay, log).unwrap();

    for alg in ["async-linucb", "async-linucb-am"] {
        let cfg = config(&[
            &format!("algorithm=\"{alg}\""),
            "proto.gamma=2.0",
            "env.mode=\"replay\"",
            &format!("env.replay={:?}", replay.to_str().unwrap()),
            "T=30",
        ]);
        let trace = run_simulation(&cfg).unwrap();
        assert_eq!(trace.score, Score::Reward);
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        assert!(out.starts_with(b"t,cum_reward,cum_comm\n"));
    }

    let long = config(&[
        "algorithm=\"centralized-linucb\"",
        "env.mode=\"replay\"",
        &format!("env.replay={:?}", replay.to_str().unwrap()),
        "T=31",
    ]);
    assert!(matches!(run_simulation(&long), Err(Error::Config(_))));
}

#[test]
fn malformed_trace_headers_are_rejected() {
    let path = std::path::Path::new("bad.csv");
    for text in ["t,regret,cum_comm\n1,0,0\n", "t,cum_regret,cum_comm,extra\n1,0,0,0\n"] {
        assert!(MetricsTrace::read_csv(text.as_bytes(), path).is_err(), "{text}");
    }
}
