//! End-to-end checks of the `ddpc` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
n_data = 200
n_monte_carlo = 3
test_length = 10
rho = 5
horizon = 10

[scheme]
kind = "gamma_ddpc"
"#;

fn ddpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddpc")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ddpc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn run_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    ok(&["run", "--config", &cfg, "--sequential", "--out", b.to_str().unwrap()]);
    for f in ["run_gamma_ddpc.csv", "run_gamma_ddpc_trajectories.csv", "summary.csv"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let runs = read(a.join("run_gamma_ddpc.csv"));
    assert_eq!(runs.lines().next().unwrap(), "run_id,scheme,J,J_u,status");
    assert_eq!(runs.lines().count(), 4);
    assert!(runs.lines().skip(1).all(|l| l.ends_with(",ok")), "{runs}");
    // 3 runs of 10 steps each.
    assert_eq!(read(a.join("run_gamma_ddpc_trajectories.csv")).lines().count(), 31);

    let c = dir.path().join("c");
    ok(&["run", "--config", &cfg, "--seed", "7", "--out", c.to_str().unwrap()]);
    assert_ne!(read(a.join("run_gamma_ddpc.csv")), read(c.join("run_gamma_ddpc.csv")));
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("sweep");
    ok(&[
        "sweep", "--config", &cfg, "--scheme", "gamma_ddpc_beta", "--param", "beta", "--grid", "1e-2:10:1",
        "--out", out.to_str().unwrap(),
    ]);
    let csv = read(out.join("sweep_beta.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,value,mean_dJ,std_dJ,mean_dJu,std_dJu");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("beta,0.01,"), "{}", lines[1]);
    assert!(lines[3].starts_with("beta,1,"), "{}", lines[3]);
}

#[test]
fn compare_tabulates_every_scheme() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("cmp");
    let o = ok(&[
        "compare", "--config", &cfg, "--runs", "2", "--schemes", "gamma_ddpc,spc_slack:1e4",
        "--out", out.to_str().unwrap(),
    ]);
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("oracle: mean J"), "{table}");
    assert!(table.contains("gamma_ddpc") && table.contains("spc_slack"), "{table}");
    let csv = read(out.join("compare.csv"));
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("gamma_ddpc,2,0,"));
}

#[test]
fn generate_then_select_rho() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data.csv");
    ok(&["generate", "--n-data", "300", "--out", data.to_str().unwrap()]);
    assert_eq!(read(&data).lines().count(), 301);
    let scores = dir.path().join("fpe.csv");
    let o = ok(&[
        "select-rho", "--data", data.to_str().unwrap(), "--min", "2", "--max", "8", "--out",
        scores.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("chosen rho = "));
    assert_eq!(read(&scores).lines().count(), 8);
}

#[test]
fn bad_inputs_fail_with_a_named_cause() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "n_data = \"many\"\n").unwrap();
    let o = ddpc(&["run", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("`n_data`"), "{o:?}");

    let missing = dir.path().join("nope.toml");
    let o = ddpc(&["run", "--config", missing.to_str().unwrap(), "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"), "{o:?}");

    let o = ddpc(&["run", "--scheme", "pid", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scheme `pid`"), "{o:?}");

    let o = ddpc(&["sweep", "--param", "beta", "--out", out]);
    assert!(!o.status.success());
    assert!(!Path::new(out).exists());
}
