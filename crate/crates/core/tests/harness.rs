use std::fs;
use std::path::Path;
use std::process::Command;

use proxyreg::harness::sweep::CellStore;
use proxyreg::harness::{run_sweep, GridAxis, SweepConfig, SweepMethod, SweepMode, SweepResult};
use proxyreg::model::ModelParams;
use proxyreg::Error;

fn small(mode: SweepMode) -> SweepConfig {
    let mut cfg = SweepConfig::defaults(GridAxis::N, false);
    cfg.grid = vec![600.0, 900.0];
    cfg.base = ModelParams::new(600, 5, 0.72, 0.6).with_seed(9);
    cfg.num_seeds = 2;
    cfg.holdouts = 12;
    if mode == SweepMode::Prediction {
        cfg = cfg.prediction();
    } else {
        cfg.methods = vec![SweepMethod::Naive, SweepMethod::Proxy];
    }
    cfg.validate().unwrap();
    cfg
}

fn csv_bytes(r: &SweepResult, cfg: &SweepConfig) -> Vec<u8> {
    let mut out = Vec::new();
    r.write_csv(&mut out, &cfg.header_comments()).unwrap();
    out
}

#[test]
fn row_counts_match_the_grid() {
    let cfg = small(SweepMode::Estimation);
    let r = run_sweep(&cfg, None).unwrap();
    assert_eq!(r.rows.len(), 2 * 2 * 2 * 2);
    let cfg = small(SweepMode::Prediction);
    let r = run_sweep(&cfg, None).unwrap();
    assert_eq!(r.rows.len(), 2 * 2 * 3 * 3);
    assert!(r.rows.iter().all(|row| row.value.is_finite()));
}

#[test]
fn resume_reproduces_a_fresh_run() {
    let cfg = small(SweepMode::Estimation);
    let dir = tempfile::tempdir().unwrap();
    let cells = dir.path().join("cells");
    let store = CellStore::open(&cells, &cfg, false).unwrap();
    let fresh = csv_bytes(&run_sweep(&cfg, Some(&store)).unwrap(), &cfg);

    // lose one cell, as after an interrupted run
    fs::remove_file(cells.join("cell_1_0.csv")).unwrap();
    let store = CellStore::open(&cells, &cfg, true).unwrap();
    assert_eq!(csv_bytes(&run_sweep(&cfg, Some(&store)).unwrap(), &cfg), fresh);
    assert!(cells.join("cell_1_0.csv").exists());
    assert_eq!(csv_bytes(&run_sweep(&cfg, None).unwrap(), &cfg), fresh);

    let mut other = cfg.clone();
    other.num_seeds = 3;
    assert!(matches!(CellStore::open(&cells, &other, true), Err(Error::InvalidConfig(_))));
    // without resume the old cells are discarded
    CellStore::open(&cells, &other, false).unwrap();
    assert!(!cells.join("cell_0_0.csv").exists());
}

fn cli(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_proxyreg"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_sweep_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep-eta", "--grid", "0.5,1.5", "--seeds", "2", "--n", "500", "--d", "4", "--seed", "3",
    ];
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(threads);
        let mut a = vec!["--threads", threads];
        a.extend(args);
        let o = cli(&out, &a);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("results.csv")).unwrap());
        assert!(out.join("rel_error.svg").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.lines().any(|l| l == "grid_value,seed,method,metric,value"));
}

#[test]
fn cli_rejects_bad_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["sweep-gamma", "--methods", ""]);
    assert_eq!(o.status.code(), Some(2));

    let toml = dir.path().join("bad.toml");
    fs::write(&toml, "no_such_key = 1\n").unwrap();
    let o = cli(dir.path(), &["sweep-gamma", "--config", toml.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = cli(dir.path(), &["predict", "--gcn-self-weight", "1.5", "--n", "300", "--d", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cli_diagnose_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["diagnose", "--n", "800", "--d", "6", "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let degrees = fs::read_to_string(dir.path().join("degrees.csv")).unwrap();
    assert!(degrees.starts_with("node,er_degree,geo_degree,union_degree,screened_block2,screened_block1"));
    assert_eq!(degrees.lines().count(), 801);
    let errors = fs::read_to_string(dir.path().join("proxy_error.csv")).unwrap();
    assert!(errors.starts_with("node,proxy_error,naive_error,fallback"));
}
