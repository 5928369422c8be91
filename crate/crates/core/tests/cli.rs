//! End-to-end runs of the `appi` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn appi() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_appi"));
    c.env_remove("APPI_CONFIG");
    c
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/probe.pi")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("appi-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, file: &str, text: &str) -> PathBuf {
    let p = dir.join(file);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn minimal_file_succeeds() {
    let dir = scratch("minimal");
    let f = write(&dir, "min.pi", "process P = 0. query barbs P.");
    let o = appi().arg("run").arg(&f).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("barbs P"));
}

#[test]
fn fixture_reports_a_distinction() {
    let o = appi().arg("run").arg(fixture()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("bisim Send0 Send1"), "{out}");
    assert!(out.contains("distinguished"), "{out}");
    assert!(out.contains("equivalent"), "{out}");
}

#[test]
fn bisim_failure_prints_evidence() {
    let dir = scratch("bisim");
    let f = write(
        &dir,
        "b.pi",
        "name c. const one.\nprocess P = out(c, 0).0.\nprocess Q = out(c, one).0.\nquery bisim P Q.\n",
    );
    let o = appi().arg("run").arg(&f).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("c<0>") || out.contains("c<one>"), "{out}");
}

#[test]
fn load_errors_exit_with_three() {
    let dir = scratch("dup");
    let f = write(&dir, "dup.pi", "const c, d.\nprocess Q = {c/x} | {d/x}.\n");
    let o = appi().arg("run").arg(&f).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dup.pi:2:"), "{err}");
    assert!(err.contains("duplicate substitution"), "{err}");
}

#[test]
fn json_output_parses() {
    let o = appi().args(["--format", "json", "run"]).arg(fixture()).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["exit_code"], 1);
    assert_eq!(v["reports"].as_array().unwrap().len(), 12);
    assert_eq!(v["bounds"]["replication_bound"], 2);
}

#[test]
fn lts_is_exported_as_dot() {
    let dir = scratch("dot");
    let f = write(&dir, "p.pi", "name c, d.\nprocess P = out(c, d).0 | in(c, y).0.\nquery lts P > p.dot.\n");
    let o = appi().arg("run").arg(&f).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dot = std::fs::read_to_string(dir.join("p.dot")).unwrap();
    assert!(dot.starts_with("digraph"), "{dot}");
    assert!(dot.contains("->"));
}

#[test]
fn config_file_sets_defaults() {
    let dir = scratch("config");
    let cfg = write(&dir, "appi.toml", "format = \"json\"\nrepl_bound = 3\n");
    let o = appi().arg("run").arg(fixture()).env("APPI_CONFIG", &cfg).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["bounds"]["replication_bound"], 3);

    let bad = write(&dir, "bad.toml", "colour = \"red\"\n");
    let o = appi().arg("run").arg(fixture()).env("APPI_CONFIG", &bad).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn selftest_passes() {
    let o = appi().args(["--seed", "7", "selftest"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}
