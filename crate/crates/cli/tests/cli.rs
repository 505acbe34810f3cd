use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"{"space":{"kind":"cycles","lengths":[8,16,32,64,128]},"n_max":4,"tuples":200}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coarse-kernels"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(dir: &Path, cfg: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--quiet")
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn verify_all_passes_on_small_cycles() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = run(tmp.path(), &cfg, &["verify", "all"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(tmp.path());
    assert_eq!(r["summary"]["failed"], 0);
    assert_eq!(r["summary"]["checks"], 18);
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for want in ["fce.validate", "glue.scale_independence", "proper.envelopes", "proper.negative_type_on_balls"] {
        assert!(names.contains(&want), "missing {want}");
    }
    for f in ["space.json", "controls.csv", "shells.csv", "glued_R2_eps0.5.csv", "glued_R4_eps0.25.csv"] {
        assert!(tmp.path().join("out").join(f).is_file(), "missing {f}");
    }
    let shells = std::fs::read_to_string(tmp.path().join("out/shells.csv")).unwrap();
    assert!(shells.starts_with("d,shell_min,shell_max,tau_minus,tau_plus"));
    // Series rows n = 1..=4 plus the two glue schedules.
    assert_eq!(r["schedule"].as_array().unwrap().len(), 6);
}

#[test]
fn bad_eps_is_rejected_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"space":{"kind":"cycles","lengths":[8,16]},"schedules":[{"r":2,"eps":0.0}]}"#,
    );
    let out = run(tmp.path(), &cfg, &["glue", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_config_field_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"nmax":3}"#);
    let out = run(tmp.path(), &cfg, &["boxspace", "build"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let strip = |mut v: Value| {
        v["generated_unix_secs"] = Value::Null;
        v
    };
    assert!(run(tmp.path(), &cfg, &["proper", "run"]).status.success());
    let first = strip(report(tmp.path()));
    let shells = std::fs::read(tmp.path().join("out/shells.csv")).unwrap();
    assert!(run(tmp.path(), &cfg, &["proper", "run"]).status.success());
    assert_eq!(first, strip(report(tmp.path())));
    assert_eq!(shells, std::fs::read(tmp.path().join("out/shells.csv")).unwrap());
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = run(tmp.path(), &cfg, &["proper", "run", "--nmax", "2", "--seed", "7"]);
    assert!(out.status.success());
    let r = report(tmp.path());
    assert_eq!(r["config"]["n_max"], 2);
    assert_eq!(r["seed"], 7);
    assert_eq!(r["schedule"].as_array().unwrap().len(), 2);
}

#[test]
fn fce_build_writes_an_embedding_and_report_reads_back() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    assert!(run(tmp.path(), &cfg, &["fce", "build"]).status.success());
    let fce = coarse_kernels::io::load_fce::<i64>(&tmp.path().join("out/fce.json")).unwrap();
    let space = coarse_kernels::io::load_space(tmp.path().join("out/space.json")).unwrap();
    assert!(coarse_kernels::fibred::validate_fce(&fce, &space).unwrap().passed());

    let out = bin().args(["report", "--out"]).arg(tmp.path().join("out")).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("fce build"));
}

#[test]
fn vacuous_checks_fail_with_exit_one() {
    // SL(2,3) and SL(2,5) have girth 3, so no chart reaches radius 2.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"space":{"kind":"box","quotients":[{"kind":"sl2","p":3},{"kind":"sl2","p":5}],"generators":[]},
            "n_max":1,"schedules":[{"r":1,"eps":0.5}],"tuples":50}"#,
    );
    let out = run(tmp.path(), &cfg, &["verify", "all"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(tmp.path());
    let failed: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["proper.negative_type_on_balls"]);
}
