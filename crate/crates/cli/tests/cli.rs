use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adarhd"))
}

const SWEEP: &str = r#"
name = "toy_sweep"
[problem]
kind = "toy_quadratic"
nx = 3
ny = 4
[solver]
algorithm = "adarhd"
T = 60
[sweep]
step_seeds = [1.0, 10.0]
seeds = [0, 1, 2]
"#;

#[test]
fn sweep_then_summarize() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("s.toml");
    fs::write(&spec, SWEEP).unwrap();
    let out = bin()
        .args(["sweep", spec.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "-j", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("toy_sweep");
    let traces = fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("adarhd-gd"))
        .count();
    assert_eq!(traces, 6);

    let out = bin().args(["summarize", dir.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("adarhd-gd_s1 "), "{table}");
    assert!(table.contains("adarhd-gd_s10 "), "{table}");
    let agg = fs::read_to_string(dir.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("one.toml");
    fs::write(&spec, SWEEP.replace("name = \"toy_sweep\"\n", "")).unwrap();
    let out = bin()
        .args(["run", spec.to_str().unwrap()])
        .env("ADARHD_OUTPUT_ROOT", tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("root/one");
    assert!(dir.join("summary.json").exists());
    assert!(dir.join("adarhd-gd_s1.csv").exists());
}

#[test]
fn bad_spec_is_rejected_with_exit_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("bad.toml");
    fs::write(&spec, SWEEP.replace("T = 60", "T = 60\nstepsize = 3")).unwrap();
    let out = bin()
        .args(["run", spec.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepsize"));

    let out = bin().args(["run", "/nonexistent/spec.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_passes_and_writes_json() {
    let tmp = tempfile::tempdir().unwrap();
    let json = tmp.path().join("checks.json");
    let out = bin()
        .args(["check", "--samples", "10", "--points", "3", "--json", json.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let reports: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert!(reports.as_array().unwrap().iter().all(|r| r["pass"] == true));
}
