use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mnac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mnac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn bound<'a>(doc: &'a Value, provenance: &str) -> &'a Value {
    doc["result"]["bounds"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["provenance"] == provenance)
        .unwrap_or_else(|| panic!("no {provenance} row"))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn bounds_binary_example() {
    let doc = json(&mnac(&["bounds", "--m", "2", "--e", "20", "--n0", "2"]));
    let upper = bound(&doc, "orthogonal-upper")["value"].as_f64().unwrap();
    let exact = doc["result"]["exact"].as_f64().unwrap();
    assert!(rel(upper, 1.348e-2) < 1e-3, "{upper}");
    assert!(rel(exact, 7.83e-4) < 1e-3, "{exact}");
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["config"]["command"], "bounds");
    assert_eq!(doc["config"]["parameters"]["m"], 2);
    assert!(doc["seed"].is_u64());
    assert!(doc["provenance"]["orthogonal-upper"].is_string());
}

#[test]
fn bounds_single_message_is_trivial() {
    let doc = json(&mnac(&["bounds", "--m", "1", "--e", "3"]));
    for b in doc["result"]["bounds"].as_array().unwrap() {
        if b["quantity"] == "error_probability" {
            assert_eq!(b["value"].as_f64(), Some(0.0), "{b}");
        }
    }
}

#[test]
fn missing_energy_is_a_usage_error() {
    let out = mnac(&["bounds", "--m", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--e") && err.contains("Usage"), "{err}");
}

#[test]
fn invalid_parameters_name_the_precondition() {
    let out = mnac(&["bounds", "--m", "2", "--e", "1", "--n0=-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N0"));
    let out = mnac(&["simulate", "--m", "4", "--e", "5", "--k", "3", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("M slots per user"));
}

#[test]
fn sweep_rows() {
    let doc = json(&mnac(&["sweep"]));
    let rows = doc["result"]["rows"].as_array().unwrap();
    let nats: Vec<&Value> = rows.iter().filter(|r| r["units"] == "nats_per_energy").collect();
    assert_eq!(nats.len(), 19);
    assert_eq!(rows.len(), 38);
    let half = nats.iter().find(|r| (r["c"].as_f64().unwrap() - 0.5).abs() < 1e-12).unwrap();
    assert!((half["closed_form"].as_f64().unwrap() - 0.125).abs() < 1e-12);
    assert!((half["sup_oracle"].as_f64().unwrap() - 0.125).abs() < 1e-9);
    assert_eq!(half["single_user"].as_f64(), Some(0.5));
    let mut last = f64::INFINITY;
    for r in &nats {
        let closed = r["closed_form"].as_f64().unwrap();
        assert!((closed - r["sup_oracle"].as_f64().unwrap()).abs() <= 1e-9);
        assert!(closed < last);
        last = closed;
    }
}

#[test]
fn sweep_rejects_grid_outside_unit_interval() {
    assert_eq!(mnac(&["sweep", "--c-min", "0"]).status.code(), Some(2));
}

#[test]
fn classify_examples() {
    let regime = |a: &str, b: &str| {
        let doc = json(&mnac(&["classify", "--a", a, "--b", b]));
        doc["result"]["verdict"]["regime"]["kind"].as_str().unwrap().to_string()
    };
    assert_eq!(regime("0.5", "0"), "SingleUserCapacity");
    assert_eq!(regime("1", "1"), "Infeasible");
    assert_eq!(regime("1", "-1"), "Unresolved");
    let doc = json(&mnac(&["classify", "--a", "0.5"]));
    assert_eq!(doc["result"]["ortho_capacity"]["rate"]["nats_per_energy"].as_f64(), Some(0.125));
}

#[test]
fn simulate_binary_ppm() {
    let doc = json(&mnac(&["simulate", "--m", "2", "--e", "2", "--trials", "100000", "--seed", "9"]));
    let est = &doc["result"]["estimate"];
    let lo = est["ci_low"].as_f64().unwrap();
    let hi = est["ci_high"].as_f64().unwrap();
    assert!(lo <= 0.1587 && 0.1587 <= hi, "{est}");
    assert_eq!(est["seed"]["seed"], 9);
    assert_eq!(doc["config"]["parameters"]["trials"], 100000);
}

#[test]
fn simulate_is_independent_of_workers() {
    let run = |w: &str| {
        let doc = json(&mnac(&[
            "simulate", "--m", "4", "--e", "5", "--k", "2", "--trials", "20000", "--workers", w,
        ]));
        doc["result"]["estimate"].clone()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("out.csv");
    fs::write(&cfg, r#"{"m": 2, "e": 20, "n0": 2, "format": "csv", "seed": 5}"#).unwrap();
    let status = mnac(&[
        "bounds",
        "--config",
        cfg.to_str().unwrap(),
        "--e",
        "2",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(&format!("# tool mnac {}", env!("CARGO_PKG_VERSION"))));
    assert!(text.contains("\"e\":2.0"), "{text}");
    assert!(text.contains("# seed 5"));
    assert!(text.contains("quantity,kind,value,valid,units,provenance"));
    assert!(text.contains("orthogonal-upper"));
}

#[test]
fn config_rejects_unknown_and_nested_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"m": 2, "e": 1, "energy": 3}"#).unwrap();
    let out = mnac(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("energy"));
    fs::write(&cfg, r#"{"m": 2, "e": {"value": 1}}"#).unwrap();
    assert_eq!(mnac(&["bounds", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("run.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let out = mnac(&[
            "simulate", "--m", "8", "--e", "6", "--trials", "5000", "--output", f.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        runs.push(fs::read_to_string(&f).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn codebook_export() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cb.csv");
    let bin = dir.path().join("cb.bin");
    let out = mnac(&[
        "simulate",
        "--m",
        "4",
        "--e",
        "9",
        "--trials",
        "10",
        "--export-csv",
        csv.to_str().unwrap(),
        "--export-binary",
        bin.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 4);
        assert_eq!(r[i], 3.0);
        assert_eq!(r.iter().filter(|x| **x == 0.0).count(), 3);
    }
    let bytes = fs::read(Path::new(&bin)).unwrap();
    assert_eq!(bytes.len(), 16 * 8);
    let first = f64::from_le_bytes(bytes[..8].try_into().unwrap());
    assert_eq!(first, 3.0);
}

#[test]
fn verify_subset_passes() {
    let out = mnac(&["verify", "--criteria", "1,2,3,10"]);
    let doc = json(&out);
    assert_eq!(doc["result"]["pass"], true);
    assert_eq!(doc["result"]["results"].as_array().unwrap().len(), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
}

#[test]
fn verify_catches_corrupted_upper_bound() {
    let out = mnac(&["verify", "--criteria", "3", "--inject-upper-scale", "1e-3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("FAIL") && err.contains("orthogonal-upper"), "{err}");
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["pass"], false);
}
