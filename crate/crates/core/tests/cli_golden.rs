use std::path::Path;
use std::process::{Command, Output};

fn rsma_lls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsma-lls"))
        .args(args)
        .env_remove("RSMA_SEED")
        .output()
        .expect("binary runs")
}

fn records(text: &str) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().clone();
    (header, r.records().map(|x| x.unwrap()).collect())
}

fn same_field(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= 1e-9 * x.abs().max(1.0),
        _ => a == b,
    }
}

#[test]
fn micro_campaign_matches_golden_csv() {
    let out = rsma_lls(&["run", "--snr", "10:10:20", "--trials", "5", "--seed", "1", "--saa-samples", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/micro_campaign.csv")).unwrap();
    let (gh, grows) = records(&golden);
    let (h, rows) = records(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(h, gh);
    assert_eq!(rows.len(), grows.len());
    for (row, want) in rows.iter().zip(&grows) {
        for (col, (a, b)) in h.iter().zip(row.iter().zip(want.iter())) {
            assert!(same_field(a, b), "{col}: {a} vs golden {b}");
        }
    }
}

#[test]
fn json_output_and_seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bounds.json");
    let out = Command::new(env!("CARGO_BIN_EXE_rsma-lls"))
        .args(["bounds", "--snr", "15", "--trials", "2", "--saa-samples", "20", "--format", "json", "-o"])
        .arg(&path)
        .env("RSMA_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["esr_bound"].as_f64().unwrap() > 0.0));
}

#[test]
fn exit_codes() {
    assert_eq!(rsma_lls(&["run", "--scheme", "ofdma"]).status.code(), Some(1));
    assert_eq!(rsma_lls(&["run", "--trials", "0"]).status.code(), Some(1));
    assert_eq!(rsma_lls(&["run", "--snr", "a:b"]).status.code(), Some(1));
    assert_eq!(rsma_lls(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rsma_lls(&["--help"]).status.code(), Some(0));
    assert_eq!(rsma_lls(&["run", "--backoff", "/nonexistent/table.csv"]).status.code(), Some(1));
    let out = rsma_lls(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
