use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qcising(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcising"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn asset(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/assets").join(name).display().to_string()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lift_h1_sizes() {
    let dir = TempDir::new().unwrap();
    let o = qcising(&["lift", &asset("h1.txt")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(dir.path().join("lift.json"));
    assert_eq!(s["n_checks"], 14);
    assert_eq!(s["n_vars"], 21);
    assert_eq!(s["m"], 42);
    assert!(dir.path().join("adjacency.mtx").is_file());
    assert!(dir.path().join("degree.mtx").is_file());
}

#[test]
fn lift_rejects_large_shift_naming_the_cell() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.txt");
    fs::write(&input, "L=5\n1 2\n3 7\n").unwrap();
    let o = qcising(&["lift", input.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("'7'"), "{err}");
}

#[test]
fn lift_single_cell() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("one.txt");
    fs::write(&input, "L=1\n0\n").unwrap();
    let o = qcising(&["lift", input.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(dir.path().join("lift.json"));
    assert_eq!((s["n_checks"].as_u64(), s["n_vars"].as_u64(), s["m"].as_u64()), (Some(1), Some(1), Some(1)));
    assert!(s["girth"].is_null());
}

#[test]
fn missing_input_is_an_error() {
    let dir = TempDir::new().unwrap();
    let o = qcising(&["lift", "/nonexistent/h.txt"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not exist"));
}

#[test]
fn ts_table_empty_input() {
    let dir = TempDir::new().unwrap();
    let o = qcising(&["ts-table"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(dir.path().join("ts_table.json")), Value::Array(vec![]));
}

#[test]
fn ts_table_bad_file_is_reported_but_others_run() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "1 0 x\n").unwrap();
    let o = qcising(&["ts-table", &asset("ts_4_2.txt"), bad.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    let rows = json(dir.path().join("ts_table.json"));
    assert!(rows[0]["report"].is_object());
    assert!(rows[1]["error"].is_string());
}

#[test]
fn ts_table_golden_reports_every_cell() {
    let dir = TempDir::new().unwrap();
    let o = qcising(&["ts-table", "--bundled", "--golden"], dir.path());
    let err = stderr(&o);
    assert!(err.contains("TS(9,2) rho: PASS"), "{err}");
    // Two reference negative-mode counts are not reproduced; see the README.
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn beta_complete_graph() {
    let dir = TempDir::new().unwrap();
    let o = qcising(&["beta", "--complete", "4", "--curve-points", "11"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(dir.path().join("beta.json"));
    let beta = r["quadratic_newton"]["beta_n"].as_f64().unwrap();
    assert!((beta - 2.0).abs() < 1e-6, "{beta}");
    assert!(r["call_ratio"].as_f64().unwrap() > 1.0);
    let curve = fs::read_to_string(dir.path().join("lambda_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 12);
}

#[test]
fn beta_weighted_edge_list() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("j.txt");
    let mut text = String::from("# complete graph on 5 vertices, J = 1\n");
    for u in 0..5 {
        for v in u + 1..5 {
            text.push_str(&format!("{u} {v} 1.0\n"));
        }
    }
    fs::write(&input, text).unwrap();
    let o = qcising(&["beta", "--couplings", input.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    // Uniform coupling on K_n: tanh(β) = 1/(n-2).
    let beta = json(dir.path().join("beta.json"))["quadratic_newton"]["beta_n"].as_f64().unwrap();
    assert!((beta - (1.0f64 / 3.0).atanh()).abs() < 1e-5, "{beta}");
}

#[test]
fn zeta_tree_has_no_poles() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("tree.txt");
    fs::write(&input, "0 1\n1 2\n1 3\n3 4\n").unwrap();
    let o = qcising(&["zeta", "--edges", input.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(dir.path().join("zeta.json"));
    assert_eq!(r["poles"], Value::Array(vec![]));
    for pair in r["residual"].as_array().unwrap() {
        assert!(pair[1].as_f64().unwrap() < 1e-12);
    }
}

#[test]
fn pipeline_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"synthetic": {"classes": 3, "dim": 40, "per_class": 40, "informative": 6, "separation": 1.5},
            "pipeline": {"r": 6, "select": 8, "top_p": 6}}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = qcising(&["pipeline", "--config", cfg.to_str().unwrap(), "--seed", "5"], &out);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["report.json", "model.json", "confusion.csv", "embedding_g0.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(json(a.join("report.json"))["metrics"]["accuracy"].as_f64().unwrap() > 0.9);
}

#[test]
fn embed_classify_ensemble_chain() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let cfg = p.join("cfg.json");
    fs::write(
        &cfg,
        r#"{"synthetic": {"classes": 3, "dim": 30, "per_class": 30, "informative": 6, "separation": 2.0},
            "pipeline": {"r": 5, "select": 6, "top_p": 6}}"#,
    )
    .unwrap();
    assert!(qcising(&["pipeline", "--config", cfg.to_str().unwrap()], &p.join("pipe")).status.success());
    let mut posts = Vec::new();
    for g in 0..3 {
        let emb = p.join(format!("pipe/embedding_g{g}.csv"));
        let out = p.join(format!("c{g}"));
        let o = qcising(&["classify", "--embedding", emb.to_str().unwrap(), "--arbiter-pairs", "1"], &out);
        assert!(o.status.success(), "{}", stderr(&o));
        posts.push(out.join("posteriors.csv").display().to_string());
    }
    let emb0 = p.join("pipe/embedding_g0.csv").display().to_string();
    let arb = p.join("c0/arbiter.json").display().to_string();
    let o = qcising(
        &["ensemble", "--posteriors", &posts[0], &posts[1], &posts[2], "--margin", "0.1", "--arbiter", &arb, "--embedding", &emb0],
        &p.join("ens"),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let decisions = fs::read_to_string(p.join("ens/decisions.csv")).unwrap();
    assert_eq!(decisions.lines().count(), 91);
    assert!(json(p.join("ens/ensemble.json"))["metrics"]["accuracy"].as_f64().unwrap() > 0.9);
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    let o = qcising(&["pipeline", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));
}
