use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_levy-field"));
    c.env_remove("LEVY_FIELD_OUTPUT_DIR");
    c
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, body).unwrap();
    path
}

fn run_in(dir: &Path, body: &str) -> Output {
    let cfg = write_config(dir, body);
    bin().arg("run").arg(&cfg).arg("--output-dir").arg(dir.join("out")).output().unwrap()
}

const HEADER: &str = r#"
schema_version = 1

[characteristics]
dim = 1
preset = { name = "balan-stable", alpha = 1.5, p = 0.5, q = 0.5 }

[sampler]
seed = 20240601
eps = 0.01
replicates = 2000
window = { dim = 1, parts = [{ lo = [0.0], hi = [1.0] }] }
"#;

#[test]
fn verify_cf_run_writes_report_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{HEADER}\n[[tasks]]\nkind = \"verify-cf\"\nu = [0.25, 0.5, 1.0, 2.0]\n");
    let out = run_in(tmp.path(), &body);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/00-verify-cf.csv")).unwrap();
    assert!(csv.starts_with("u,re_emp,im_emp,re_analytic,im_analytic,radius,pass\n"));
    assert_eq!(csv.lines().count(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 20240601);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    let reports = fs::read_to_string(tmp.path().join("out/reports.jsonl")).unwrap();
    assert!(reports.contains("\"decision\":\"pass\""));
}

#[test]
fn missing_seed_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &HEADER.replace("seed = 20240601\n", ""));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_key_reports_location() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &HEADER.replace("eps = 0.01", "epsilon = 0.01"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("epsilon") && err.contains("line"), "{err}");
}

#[test]
fn empty_task_list_writes_manifest_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), HEADER);
    assert_eq!(out.status.code(), Some(0));
    let files: Vec<_> = fs::read_dir(tmp.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files, vec!["manifest.json"]);
}

#[test]
fn failing_task_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "{HEADER}\n[[tasks]]\nkind = \"verify-independence\"\na = {{ dim = 1, parts = [{{ lo = [0.0], hi = [0.6] }}] }}\nb = {{ dim = 1, parts = [{{ lo = [0.5], hi = [1.0] }}] }}\n"
    );
    let out = run_in(tmp.path(), &body);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disjoint"));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), HEADER);
    let target = tmp.path().join("from-env");
    let out = bin().arg("run").arg(&cfg).env("LEVY_FIELD_OUTPUT_DIR", &target).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("manifest.json").exists());
}

#[test]
fn replays_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "{HEADER}\n[[tasks]]\nkind = \"sample\"\nreplicates = 2\n\n[[tasks]]\nkind = \"sheet\"\ngrid = [[0.25, 0.5, 0.75, 1.0]]\n\n[[tasks]]\nkind = \"check-tempered\"\n"
    );
    let cfg = write_config(tmp.path(), &body);
    for (dir, format) in [("a", "jsonl"), ("b", "jsonl"), ("c", "bin")] {
        let out = bin().arg("run").arg(&cfg).arg("--output-dir").arg(tmp.path().join(dir)).args(["--format", format]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |d: &str, f: &str| fs::read(tmp.path().join(d).join(f)).unwrap();
    for f in ["00-sample-r0.jsonl", "00-sample-r1.jsonl", "01-sheet.csv", "02-check-tempered.json", "manifest.json"] {
        assert_eq!(read("a", f), read("b", f), "{f}");
    }
    assert_eq!(&read("c", "00-sample-r0.bin")[..4], b"LVYF");
}

#[test]
fn describe_command() {
    let out = bin().args(["describe", "balan-stable(1.5,0.5,0.5)"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8_lossy(&out.stdout);
    assert!(s.contains("control measure of the unit box: 4"), "{s}");
    assert!(s.contains("stationary") && s.contains("tempered"));
    let g = bin().args(["describe", "gaussian-white-noise"]).output().unwrap();
    assert!(String::from_utf8_lossy(&g.stdout).contains("γ = 0; Σ = leb; ν = 0"));
    let bad = bin().args(["describe", "no-such-preset"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
