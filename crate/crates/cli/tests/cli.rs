use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn varlex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varlex"))
        .args(args)
        .output()
        .expect("spawn varlex")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_writes_a_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let o = varlex(&["gen", "--gen", "log", "--depth", "8", "--per-octave", "4", "-o", p(&out)]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["breakpoints"].as_array().unwrap().len(), 2 + 8 * 4);
    assert_eq!(code(&varlex(&["gen", "--gen", "cubic"])), 2);
}

#[test]
fn rearrange_sorts_and_keeps_constants() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.json");
    let out = dir.path().join("fs.json");
    fs::write(&input, r#"{"breakpoints":[0,0.25,1],"values":[1,3]}"#).unwrap();
    let o = varlex(&["rearrange", p(&input), "-o", p(&out)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("equimeasurable with input: yes"));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["breakpoints"], serde_json::json!([0.0, 0.75, 1.0]));
    assert_eq!(v["values"], serde_json::json!([3.0, 1.0]));

    fs::write(&input, r#"{"breakpoints":[0,1],"values":[2]}"#).unwrap();
    let o = varlex(&["rearrange", p(&input)]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), r#"{"breakpoints":[0.0,1.0],"values":[2.0]}"#);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&varlex(&["rearrange", "/nonexistent/f.json"])), 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    assert_eq!(code(&varlex(&["rearrange", p(&bad)])), 2);
    fs::write(&bad, r#"{"breakpoints":[0,0.7,0.5,1],"values":[1,2,3]}"#).unwrap();
    assert_eq!(code(&varlex(&["rearrange", p(&bad)])), 2);
    assert_eq!(code(&varlex(&["norm", "--indicator", "0.5", "0.25", "--gen", "const:2"])), 2);
}

#[test]
fn norm_of_indicator() {
    let o = varlex(&["norm", "--indicator", "0", "0.25", "--gen", "const:2"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    let o = varlex(&["norm", "--indicator", "0", "0.5", "--kind", "orlicz"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0 / 3f64.ln()).abs() < 1e-9);
}

#[test]
fn diagnose_reports_verdicts_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let o = varlex(&["diagnose", "--gen", "log", "--depth", "20", "--per-octave", "16", "--csv", p(&csv)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("condition witnessed"), "{text}");
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().next().unwrap(), "depth,ratio,running_max_tail,mln_defect");
    assert_eq!(rows.lines().count(), 22);

    let o = varlex(&["diagnose", "--gen", "const:2", "--max-depth", "60"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not witnessed"));
}

#[test]
fn construct_refuses_constant_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = varlex(&["construct", "--gen", "const:2", "-o", p(&out)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn construct_is_deterministic_and_scannable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["construct", "--gen", "log", "--depth", "24", "--per-octave", "64", "--stages", "16"];
    for out in [&a, &b] {
        let mut all = args.to_vec();
        all.extend(["-o", p(out)]);
        let o = varlex(&all);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(dir.path().join("a.p_hat.json").exists());

    let csv = dir.path().join("s.csv");
    let o = varlex(&["scan", "--trace", p(&a), "--max-level", "3", "--csv", p(&csv)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("floor 1/c"));
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
}

#[test]
fn construct_with_audit_keeps_stages() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = varlex(&[
        "construct", "--gen", "log", "--depth", "16", "--per-octave", "16", "--stages", "4", "--audit", "-o", p(&out),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["stages"].as_array().unwrap().len(), 4);
}

#[test]
fn scan_clamps_and_honours_thread_cap() {
    let o = Command::new(env!("CARGO_BIN_EXE_varlex"))
        .args(["scan", "--gen", "const:2", "--dim", "2", "--bits", "2", "--max-level", "5"])
        .env("VARLEX_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("clamped"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let v: serde_json::Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    assert_eq!(v["levels"], serde_json::json!([0, 1, 2]));

    let o = Command::new(env!("CARGO_BIN_EXE_varlex"))
        .args(["scan", "--gen", "const:2", "--max-level", "1"])
        .env("VARLEX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
