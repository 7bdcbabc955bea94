use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kcmlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcmlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("KCMLAB_THREADS", "1")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn mpo_state_two_particles() {
    let dir = tempfile::tempdir().unwrap();
    let o = kcmlab(&["mpo-state", "--r", "2", "--N", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["task"], "mpo-state");
    let rows = csv_rows(&dir.path().join("mpo_state.csv"));
    assert_eq!(rows[0], ["state", "amplitude"]);
    let mut amps: Vec<(String, f64)> = rows[1..].iter().map(|r| (r[0].clone(), r[1].parse().unwrap())).collect();
    amps.sort_by(|a, b| a.0.cmp(&b.0));
    assert_eq!(amps.len(), 2);
    assert_eq!((amps[0].0.as_str(), amps[1].0.as_str()), ("0110", "1001"));
    assert!((amps[0].1.abs() - 0.5f64.sqrt()).abs() < 1e-9);
    assert!((amps[0].1 + amps[1].1).abs() < 1e-9);
}

#[test]
fn uncoupled_chain_has_only_zero_modes() {
    let dir = tempfile::tempdir().unwrap();
    let o = kcmlab(
        &["count-zm", "--model", "east", "--r", "2", "--couplings", "0,0", "--L", "8", "--N", "3", "--sector", "full"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&dir.path().join("count_zm.json"));
    assert_eq!(j["dim"], 56);
    assert_eq!(j["count"]["n_zm"], 56);
}

#[test]
fn frozen_seed_is_a_single_zero_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = kcmlab(&["count-zm", "--model", "east", "--r", "1", "--seed-state", "00111"], dir.path());
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("count_zm.csv"));
    assert_eq!(rows[1], ["1", "1", "1"]);
}

#[test]
fn outputs_are_deterministic_and_carry_the_hash() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["disorder-scan", "--model", "east", "--r", "2", "--N", "3", "--L", "7", "--g", "0,0.3", "--rng-seed", "5"];
    for d in [&a, &b] {
        assert!(kcmlab(&args, d.path()).status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("disorder_scan.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let prov = read_json(&a.path().join("provenance.json"));
    let hash = read_json(&a.path().join("disorder_scan.json"))["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert!(String::from_utf8(read(&a)).unwrap().contains(&hash));
    assert!(prov["config"].is_object());
    assert!(prov["files"].as_array().unwrap().iter().any(|f| f == "disorder_scan.csv"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "model = east\nrange = 2\nparticles = 3\nsites = 7\n").unwrap();
    let out = dir.path().join("out");
    let o = kcmlab(&["enumerate", "--config", cfg.to_str().unwrap(), "--N", "2", "--sector", "full"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out.join("enumerate.json"))["dim"], 21);
}

#[test]
fn domain_errors_exit_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = kcmlab(&["count-zm", "--model", "east", "--L", "4", "--N", "9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["task"], "count-zm");
    assert_eq!(err["cross_check"], false);
    assert!(dir.path().join("error.json").exists());

    let o = kcmlab(&["no-such-task"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = kcmlab(&["enumerate", "--bogus", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(serde_json::from_slice::<Value>(&o.stderr).is_ok());
}

#[test]
fn east_west_table_filtered_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = kcmlab(&["reproduce-table", "eastwest", "--N", "4", "--L", "10"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("table_eastwest.csv"));
    assert_eq!(rows[0], ["N", "L", "D", "M", "N_ZM", "N_BS", "N_FS"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][..2], ["4", "10"]);
}
