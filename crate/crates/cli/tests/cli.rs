use std::path::Path;
use std::process::{Command, Output};

fn krflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krflow"))
        .args(args)
        .env("KRFLOW_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_round_exits_zero_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let spec = write_spec(dir.path(), "round.cfg", "scenario = round, grid_n = 64\n");
    let o = krflow(&["run", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall = PASS"));
    let csv = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(csv.starts_with("t,dt,volume,diam,K_min,K_max,a,Y,Z,osc_u,"));
    assert!(out.join("report.txt").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "bad.cfg", "scenario = round\nfrobnicate = 1\n");
    let o = krflow(&["run", &spec]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("frobnicate"));
    assert_eq!(krflow(&["run", "/nonexistent/spec.cfg"]).status.code(), Some(2));
    assert_eq!(krflow(&["launch"]).status.code(), Some(2));
}

#[test]
fn volume_violation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.txt");
    std::fs::write(&w, "0.2\n".repeat(32)).unwrap();
    let spec = write_spec(
        dir.path(),
        "custom.cfg",
        &format!("scenario = custom_w({})\ngrid_n = 32\noutput_dir = {}\n", w.display(), dir.path().join("o").display()),
    );
    let o = krflow(&["run", &spec]);
    assert_eq!(o.status.code(), Some(3));
    let report = std::fs::read_to_string(dir.path().join("o/report.txt")).unwrap();
    assert!(report.contains("VolumeMismatch"));
}

#[test]
fn check_and_spectrum_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "bump.cfg", "scenario = legendre_bump(2, 1e-2)\ngrid_n = 64\n");
    let o = krflow(&["check", &spec, "--at", "0.02"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("[check.weighted_poincare]"));
    assert!(text.contains("state.lambda_g = "));
    let o = krflow(&["spectrum", &spec, "--at", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("m,k,lambda"));
    assert_eq!(text.lines().filter(|l| l.starts_with("-2,") || l.starts_with("2,")).count(), 6);
}

#[test]
fn sweep_subcommand_tabulates_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let spec = write_spec(
        dir.path(),
        "sweep.cfg",
        "scenario = legendre_bump(2, 0)\ngrid_n = 32\nsweep = 1e-3, 1e-2\n[flow]\nt_end = 0.02\n[monitors]\nchecks = futaki\nt0 = 0.01\n",
    );
    let o = krflow(&["sweep", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("successes = 2"));
    assert!(stdout.contains("slope = "));
    assert_eq!(std::fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 3);
    assert!(out.join("point_000/timeseries.csv").exists());
}
