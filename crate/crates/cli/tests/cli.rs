use std::path::Path;
use std::process::{Command, Output};

fn mmsgeo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmsgeo")).args(args).current_dir(cwd).env_remove("MMSGEO_OUT").output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const INTERVAL: &str = "[space]\nkind = \"grid\"\ndims = 1\nn = 1001\nbounds = [[0.0, 1.0]]\n";

#[test]
fn verify_three_point_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = mmsgeo(&["verify", "--space", "three-point", "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["passed"], true);
    assert!(run["verdicts"].as_array().unwrap().iter().all(|v| !v["anchor"].as_str().unwrap().is_empty()));
    let csv = std::fs::read_to_string(out.join("verify_semigroup_witnesses.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "0,2,2,2,1,0"), "{csv}");
}

#[test]
fn negative_tolerance_is_rejected_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &format!("task = \"perimeter\"\n{INTERVAL}[set]\nshape = \"box\"\nlo = [0.2]\nhi = [0.6]\n[params]\ntolerance = -0.1\n"),
    );
    let out = dir.path().join("o");
    let o = mmsgeo(&["perimeter", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tolerance"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &format!("task = \"minkowski\"\n{INTERVAL}colour = 3\n"));
    let o = mmsgeo(&["minkowski", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("colour"), "{err}");
    assert!(!dir.path().join("mmsgeo-out").exists());
}

#[test]
fn usage_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mmsgeo(&["frobnicate"], dir.path()).status.code(), Some(3));
    assert_eq!(mmsgeo(&["perimeter"], dir.path()).status.code(), Some(3));
    assert_eq!(mmsgeo(&["repro", "--suite", "nope"], dir.path()).status.code(), Some(3));
}

#[test]
fn failing_verdict_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        &format!("task = \"perimeter\"\n{INTERVAL}[set]\nshape = \"box\"\nlo = [0.4]\nhi = [0.6]\n[params]\nexpected = 3.0\n"),
    );
    let o = mmsgeo(&["perimeter", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("mmsgeo-out/run.json").exists());
}

#[test]
fn runtime_error_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.toml", &format!("task = \"eq13-gap\"\n{INTERVAL}"));
    let o = mmsgeo(&["eq13-gap", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.toml", &format!("task = \"verify\"\noutput = \"from-config\"\n{INTERVAL}"));
    assert_eq!(mmsgeo(&["verify", "--config", &cfg], dir.path()).status.code(), Some(0));
    assert!(dir.path().join("from-config/verify.json").exists());
    let plain = write(dir.path(), "w.toml", &format!("task = \"verify\"\n{INTERVAL}"));
    for c in [&cfg, &plain] {
        let o = Command::new(env!("CARGO_BIN_EXE_mmsgeo"))
            .args(["verify", "--config", c])
            .env("MMSGEO_OUT", "from-env")
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
    }
    assert!(dir.path().join("from-env/verify.json").exists());
    let o = mmsgeo(&["verify", "--config", &cfg, "--out", "from-flag"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("from-flag/verify.json").exists());
}

#[test]
fn lists_suites() {
    let dir = tempfile::tempdir().unwrap();
    let o = mmsgeo(&["--list-suites"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["semigroup", "disk", "fat-cantor", "countable", "gauge", "cheeger", "all"] {
        assert!(text.contains(name), "{text}");
    }
}
