use std::path::Path;
use std::process::{Command, Output};

use fris_core::harness::CSV_HEADER;

const TINY: &str = r#"
name = "tiny"
architectures = ["fris_spo", "ris_conventional_bf_ps"]
antennas = 2

geometry.n_h = 8
geometry.n_v = 8
geometry.m_h = 2
geometry.m_v = 2

budget.gamma_bar_b_db = [0, 10, 20]

learning.episodes = 5
learning.convergence_window = 2

fitting.t_sp = 1000
mc.trials = 1000
mc.seed = 5
"#;

fn fris(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fris"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_is_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let a = fris(&["run", &cfg]);
    let b = fris(&["run", &cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 6);

    let other = fris(&["run", &cfg, "--seed", "6"]);
    assert!(other.status.success());
    assert_ne!(other.stdout, text.as_bytes());
}

#[test]
fn run_writes_the_requested_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let out = dir.path().join("out.csv");
    let res = fris(&["run", &cfg, "--out", out.to_str().unwrap(), "--compare"]);
    assert!(res.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    assert!(String::from_utf8_lossy(&res.stderr).contains("gamma_bar_b_db = 0"));
}

#[test]
fn sweep_prefixes_the_swept_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let res = fris(&["sweep", &cfg, "--param", "antennas", "--values", "1,2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.starts_with(&format!("sweep_value,{CSV_HEADER}\n")));
    assert_eq!(text.lines().filter(|l| l.starts_with("1,")).count(), 6);
    assert_eq!(text.lines().filter(|l| l.starts_with("2,")).count(), 6);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "name = \"x\"\nunknown_key = 3\n");
    assert_eq!(fris(&["run", &bad]).status.code(), Some(2));
    let indivisible = write(
        dir.path(),
        "odd.toml",
        "name = \"x\"\ngeometry.n_h = 7\ngeometry.n_v = 8\ngeometry.m_h = 2\ngeometry.m_v = 2\n",
    );
    assert_eq!(fris(&["run", &indivisible]).status.code(), Some(2));
    assert_eq!(fris(&["run", "/nonexistent/file.toml"]).status.code(), Some(2));
}

#[test]
fn sop_prints_closed_and_integrated_values() {
    let res = fris(&["sop", "--kb", "1", "--rho", "1", "--rs", "1"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((row[1] - 2.0 / 3.0).abs() < 1e-9);
    assert_eq!(fris(&["sop", "--kb", "1", "--rho", "-1", "--rs", "1"]).status.code(), Some(2));
}

#[test]
fn fit_reads_magnitude_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("bob,eve\n");
    for i in 1..=200 {
        let x = i as f64 / 100.0;
        text.push_str(&format!("{x},{}\n", 2.0 * x));
    }
    let path = write(dir.path(), "mags.csv", &text);
    let res = fris(&["fit", &path]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let out = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "link,m,omega,k,theta");
    let field = |line: &str, i: usize| line.split(',').nth(i).unwrap().parse::<f64>().unwrap();
    assert!((field(lines[1], 1) - field(lines[2], 1)).abs() < 1e-9);
    assert!((field(lines[2], 2) / field(lines[1], 2) - 4.0).abs() < 1e-9);
}

#[test]
fn selftest_passes() {
    let res = fris(&["selftest"]);
    assert!(res.status.success());
    let out = String::from_utf8(res.stdout).unwrap();
    assert!(out.lines().all(|l| l.starts_with("PASS")));
}
