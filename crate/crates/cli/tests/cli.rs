use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn typeii(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_typeii")).args(args).output().expect("binary runs")
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("typeii-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn strip_timing(mut v: serde_json::Value) -> serde_json::Value {
    for t in v["tasks"].as_array_mut().unwrap() {
        t["timing"]["wall_seconds"] = 0.0.into();
    }
    v
}

#[test]
fn verify_complex_succeeds() {
    let out = typeii(&["verify", "--suite", "complex"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn verify_appendix_reports_the_displayed_constants() {
    let out = typeii(&["verify", "--suite", "appendix"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("interpolation") || err.contains("log_commutator"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(typeii(&["verify", "--suite", "everything"]).status.code(), Some(2));
    assert_eq!(typeii(&["frobnicate"]).status.code(), Some(2));
    let dir = scratch("usage");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"name\": 3}").unwrap();
    let out = typeii(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    assert_eq!(typeii(&["run", dir.join("missing.json").to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn run_writes_a_reproducible_report() {
    let dir = scratch("run");
    let sc = scenarios().join("type_i_worked.json");
    let (a, b) = (dir.join("a.json"), dir.join("b.json"));
    for (p, jobs) in [(&a, "1"), (&b, "3")] {
        let out = typeii(&["run", sc.to_str().unwrap(), "--out", p.to_str().unwrap(), "--jobs", jobs]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    let (ra, rb) = (read_json(&a), read_json(&b));
    assert_eq!(ra["summary"]["failed"], 0);
    assert_eq!(strip_timing(ra), strip_timing(rb));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn task_errors_do_not_stop_the_run() {
    let dir = scratch("err");
    let sc = dir.join("sc.json");
    std::fs::write(
        &sc,
        r#"{"name": "half_broken", "ctx": {"blocks": [[2, 1.0]]},
            "modules": [{"name": "m", "D": [[0, 0], [0, 0]], "grading": [1, -1]}],
            "tasks": [{"kind": "construct", "module": "m/to_bounded"}, {"kind": "validate", "module": "m"}]}"#,
    )
    .unwrap();
    let out = typeii(&["run", sc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["summary"]["errors"], 1);
    assert_eq!(v["summary"]["passed"], 1);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn pair_command() {
    let dir = scratch("pair");
    let (m, k) = (dir.join("m.json"), dir.join("k.json"));
    std::fs::write(&m, r#"{"ctx": {"blocks": [[2, 1.0]]}, "D": [[0, 1], [1, 0]], "grading": [1, -1]}"#).unwrap();
    std::fs::write(&k, r#"[{"name": "p", "projection": [[1, 0], [0, 0]]}]"#).unwrap();
    let out = typeii(&["pair", "--module", m.to_str().unwrap(), "--ktheory", k.to_str().unwrap(), "--levels", "0..4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["pairings"][0]["agreement"]["reference"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    std::fs::remove_dir_all(&dir).ok();
}
