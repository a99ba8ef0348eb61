use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const QUICK: &str = r#"
replications = 2

[scenario]
num_mnos = 2
sbs_per_mno = 3
num_slices = 5
capacities = [2, 3]
rng_seed = 11

[qlearning]
episodes = 50
eval_draws = 20

[matching]
iterations = 40
"#;

fn moslice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moslice"))
        .args(args)
        .output()
        .unwrap()
}

fn setup() -> (TempDir, String) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("quick.toml");
    fs::write(&cfg, QUICK).unwrap();
    let cfg = cfg.to_string_lossy().into_owned();
    (dir, cfg)
}

fn run_ok(args: &[&str]) {
    let out = moslice(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Header line and data rows (the column line included).
fn read(path: &Path) -> (String, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().map(str::to_owned);
    let header = lines.next().unwrap();
    (header, lines.collect())
}

#[test]
fn converge_writes_one_row_per_iteration() {
    let (dir, cfg) = setup();
    let out = dir.path().join("a");
    run_ok(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let (header, rows) = read(&out.join("converge.csv"));
    assert!(header.starts_with("# "));
    let meta: serde_json::Value = serde_json::from_str(&header[2..]).unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["config"]["matching"]["iterations"], 40);
    assert_eq!(
        rows[0],
        "replication,iteration,welfare,best_welfare,accepted"
    );
    assert_eq!(rows.len(), 1 + 2 * 40);

    for r in ["0", "1"] {
        let best: Vec<f64> = rows[1..]
            .iter()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|c| c[0] == r)
            .map(|c| c[3].parse().unwrap())
            .collect();
        assert!(best.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (dir, cfg) = setup();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["converge", "--config", &cfg, "--out", a.to_str().unwrap()]);
    run_ok(&["converge", "--config", &cfg, "--out", b.to_str().unwrap()]);
    assert_eq!(
        read(&a.join("converge.csv")).1,
        read(&b.join("converge.csv")).1
    );
}

#[test]
fn seed_flag_changes_results() {
    let (dir, cfg) = setup();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["cdf", "--config", &cfg, "--out", a.to_str().unwrap()]);
    run_ok(&[
        "cdf",
        "--config",
        &cfg,
        "--seed",
        "12",
        "--out",
        b.to_str().unwrap(),
    ]);
    let (ha, ra) = read(&a.join("cdf.csv"));
    let (hb, rb) = read(&b.join("cdf.csv"));
    assert_ne!(ra, rb);
    assert!(ha.contains("\"seed\":11"));
    assert!(hb.contains("\"seed\":12"));
}

#[test]
fn cdf_sweep_cells() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    run_ok(&[
        "cdf",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--replications",
        "1",
        "--slices",
        "5,6",
        "--power-modes",
        "qlearning,uniform",
    ]);
    let (_, rows) = read(&out.join("cdf.csv"));
    assert_eq!(
        rows[0],
        "num_mnos,num_slices,power_mode,replication,seed,welfare"
    );
    assert_eq!(rows.len(), 1 + 4);
    assert!(rows[1..].iter().any(|r| r.contains(",uniform,")));
}

#[test]
fn knapsack_rows_per_cell() {
    let (dir, _) = setup();
    let out = dir.path().join("o");
    fs::write(
        dir.path().join("k.toml"),
        QUICK.replace("sbs_per_mno = 3", "sbs_per_mno = 8"),
    )
    .unwrap();
    let k = dir.path().join("k.toml");
    run_ok(&[
        "knapsack",
        "--config",
        k.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--replications",
        "1",
    ]);
    let (_, rows) = read(&out.join("knapsack.csv"));
    // three thresholds by two tolerances, eight SBSs each
    assert_eq!(rows.len(), 1 + 6 * 8);
}

#[test]
fn knapsack_cost_mismatch_is_an_error() {
    let (dir, cfg) = setup();
    let out = moslice(&[
        "knapsack",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("costs"));
}

#[test]
fn certify_small_instances() {
    let (dir, _) = setup();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        r#"
replications = 3
[scenario]
num_mnos = 2
sbs_per_mno = 2
num_slices = 4
capacities = [2, 2]
[matching]
power_mode = "uniform"
"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    run_ok(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let (_, rows) = read(&out.join("certify.csv"));
    assert_eq!(rows.len(), 1 + 3);
    assert!(rows[1..].iter().all(|r| r.contains(",true,true,true,")));
}

#[test]
fn config_errors_exit_nonzero() {
    let (dir, _) = setup();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[scenario]\nnum_mnos = 0\n").unwrap();
    let out = moslice(&["converge", "--config", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_mnos"));

    fs::write(&bad, "unknown_key = 1\n").unwrap();
    assert!(!moslice(&["cdf", "--config", bad.to_str().unwrap()])
        .status
        .success());
    assert!(!moslice(&["converge", "--config", "/nonexistent/x.toml"])
        .status
        .success());
    assert!(!moslice(&["converge", "--replications", "0"])
        .status
        .success());
}

#[test]
fn literal_mode_is_recorded() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    run_ok(&[
        "converge",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--literal-mode",
    ]);
    let (header, _) = read(&out.join("converge.csv"));
    let meta: serde_json::Value = serde_json::from_str(&header[2..]).unwrap();
    assert_eq!(meta["config"]["matching"]["literal_mode"], true);
    assert_eq!(meta["config"]["qlearning"]["literal_exploration"], true);
}
