use std::path::Path;
use std::process::{Command, Output};

fn phasefield(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_phasefield"));
    cmd.args(args).env_remove("PHASEFIELD_OUT");
    if let Some(dir) = env_out {
        cmd.env("PHASEFIELD_OUT", dir);
    }
    cmd.output().unwrap()
}

fn config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_LENS: &str = "benchmark = \"lens\"\n[mesh]\nnx = 10\nny = 5\n[time]\ndt = 1e-4\nt_end = 4e-4\n[output]\nstride = 2\n";

#[test]
fn list_prints_the_catalog() {
    let out = phasefield(&["list"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["lens", "two_bubbles", "spinodal2", "spinodal4", "bubbles_flow", "convergence_ic"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn run_writes_diagnostics_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL_LENS);
    let out_dir = dir.path().join("out");
    let out = phasefield(&["run", "--config", &cfg, "--scheme", "ntd1", "--out", out_dir.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("diagnostics.csv")).unwrap();
    // Header, initial row, steps 2 and 4.
    assert_eq!(csv.lines().count(), 4);
    assert!(out_dir.join("fields_000000.vtk").exists());
    assert!(out_dir.join("fields_000004.vtk").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("NTD1"));
}

#[test]
fn environment_overrides_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL_LENS);
    let env_dir = dir.path().join("from_env");
    let out = phasefield(&["run", "--config", &cfg], Some(&env_dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_dir.join("diagnostics.csv").exists());
}

#[test]
fn eoc_prints_and_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "benchmark = \"convergence_ic\"\n[mesh]\nnx = 6\nny = 6\n[time]\nt_end = 4e-4\n",
    );
    let out_dir = dir.path().join("eoc");
    let out = phasefield(
        &["eoc", "--config", &cfg, "--dts", "1e-4,5e-5,2.5e-5", "--ref-dt", "1e-5", "--out", out_dir.to_str().unwrap()],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(printed.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(out_dir.join("eoc.csv")).unwrap(), printed);
}

#[test]
fn unknown_benchmark_suggests_a_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let out = phasefield(&["run", "--config", &cfg, "--benchmark", "lenz"], None);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lens"), "{err}");
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "benchmark = \"lens\"\n[model]\nepsilon = 0.01\nlambda_penalty = 0\n");
    let out = phasefield(&["run", "--config", &cfg], None);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":4") || err.contains("line 4"), "{err}");
}

#[test]
fn missing_config_fails_cleanly() {
    let out = phasefield(&["run", "--config", "/nonexistent/run.toml"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
