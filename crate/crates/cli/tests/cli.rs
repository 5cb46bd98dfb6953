use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn indexflow(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indexflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn linear_path_has_unit_flow_and_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("sf_linear.json");
    let o = indexflow(&["sf", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["spectral_flow"], 1);
    for f in ["report.json", "trace.csv", "plot.dat", "meta.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let plot = fs::read_to_string(dir.path().join("plot.dat")).unwrap();
    assert!(plot.starts_with("# s lambda_1"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["exit_code"], 0);
}

#[test]
fn diagonal_signatures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("signatures_diag.json");
    let o = indexflow(&["signatures", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let r: Value = serde_json::from_str(&text).unwrap();
    let rows = find_rows(&r).expect("signature rows in report");
    let sigma: Vec<(i64, i64)> = rows
        .iter()
        .map(|row| (row["k"].as_i64().unwrap(), row["sigma"].as_i64().unwrap()))
        .collect();
    assert_eq!(sigma, vec![(1, 1), (2, 1), (3, -1)]);
}

fn find_rows(v: &Value) -> Option<&Vec<Value>> {
    match v {
        Value::Object(m) => m.get("rows").and_then(Value::as_array).or_else(|| m.values().find_map(find_rows)),
        Value::Array(a) => a.iter().find_map(find_rows),
        _ => None,
    }
}

#[test]
fn dirac_family_flow_equals_maslov_index() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("yn_linear.json");
    let o = indexflow(&["yn", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["sf"], -1);
    assert_eq!(r["maslov"], -1);
    assert_eq!(r["equal"], true);
}

#[test]
fn same_seed_gives_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("yn_random.json");
    for d in [&a, &b] {
        let o = indexflow(&["yn", cfg.to_str().unwrap(), "--seed", "7"], d.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ra = fs::read(a.path().join("report.json")).unwrap();
    let rb = fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn malformed_config_exits_one_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"kind\": \"sf\",\n  \"path\": [1, 2,\n}\n").unwrap();
    let o = indexflow(&["sf", bad.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:4"), "stderr: {err}");
}

#[test]
fn wrong_kind_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("sf_linear.json");
    let o = indexflow(&["maslov", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn loose_tolerance_exposes_disagreement_with_exit_two() {
    // At tol 1e-2 the sampled count and the signature count of this pair disagree.
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("pair_linear.json");
    let o = indexflow(&["pair", cfg.to_str().unwrap(), "--tol", "1e-2"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["equal"], false);
    assert_ne!(r["maslov"], r["via_signatures"]);

    let o = indexflow(&["pair", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(dir.path())["equal"], true);
}
