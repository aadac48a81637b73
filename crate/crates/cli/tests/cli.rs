use std::process::{Command, Output};

use serde_json::Value;

fn cli() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_haarblocks"));
    cmd.env_remove("HAARBLOCKS_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    cli().args(args).output().expect("spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn sample_command_draws_requested_replicas() {
    let v = json(&run(&["sample", "--N", "50", "--m", "2", "--k", "3", "--replicas", "4", "--seed", "9"]));
    let samples = v["result"].as_array().unwrap();
    assert_eq!(samples.len(), 4);
    let block = samples[0]["block"].as_array().unwrap();
    assert_eq!(block.len(), 2);
    assert_eq!(block[0].as_array().unwrap().len(), 3);
}

#[test]
fn mdp_entry_accepts_scientific_n_list() {
    let v = json(&run(&["experiment", "mdp-entry", "--t", "1", "--b", "0.25", "--N", "1e6,1e7,1e8"]));
    let rows = v["result"]["rows"].as_array().unwrap();
    let ns: Vec<u64> = rows.iter().map(|r| r["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, [1_000_000, 10_000_000, 100_000_000]);
}

#[test]
fn density_at_origin_for_n3_is_log_half() {
    let v = json(&run(&["density", "--N", "3", "--point", "[[0]]"]));
    let got = v["result"]["log_value"].as_f64().unwrap();
    assert!((got - 0.5f64.ln()).abs() < 1e-14, "{got}");
}

#[test]
fn block_larger_than_dimension_is_usage_error() {
    let out = run(&["density", "--N", "2", "--m", "2", "--k", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("haarblocks: usage"));
}

#[test]
fn unknown_and_unused_flags_are_rejected() {
    assert_eq!(code(&run(&["sample", "--N", "10", "--bogus", "1"])), 2);
    assert_eq!(code(&run(&["sample", "--N", "10", "--epsilon", "0.1"])), 2);
}

#[test]
fn sampling_cap_is_enforced() {
    assert_eq!(code(&run(&["sample", "--N", "1e6"])), 2);
}

#[test]
fn unwritable_output_is_io_error() {
    let out = run(&["sample", "--N", "10", "--out", "/nonexistent-dir/x.json"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["experiment", "mdp-block", "--N", "100,200", "--replicas", "500", "--seed", "3"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["experiment", "concentration", "--N", "100,400", "--R", "N^0.3", "--replicas", "300"];
    let default = run(&args);
    let single = cli().args(args).args(["--threads", "1"]).output().unwrap();
    assert_eq!(code(&default), 0);
    assert_eq!(default.stdout, single.stdout);
}

#[test]
fn zero_threads_is_rejected() {
    assert_eq!(code(&run(&["sample", "--N", "10", "--threads", "0"])), 2);
}

#[test]
fn config_file_merges_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"N": "1e6", "t": 2, "b": 0.3}"#).unwrap();
    let v = json(&run(&["experiment", "mdp-entry", "--config", cfg.to_str().unwrap(), "--t", "1"]));
    let params = &v["config"]["parameters"];
    assert_eq!(params["t"], 1.0);
    assert_eq!(params["b"], 0.3);
    assert_eq!(params["N"], serde_json::json!([1_000_000]));
}

#[test]
fn config_for_other_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"command": "sample", "N": 10}"#).unwrap();
    let out = run(&["density", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn artifact_reexecutes_from_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let out = run(&[
        "experiment", "ldp-decay", "--epsilon", "0.3", "--N", "100,200", "--replicas", "200",
        "--seed", "5", "--out", first.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("a.json"));
    let out = run(&[
        "experiment", "ldp-decay", "--config", first.to_str().unwrap(), "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn seed_environment_variable_fills_missing_seed() {
    let args = ["sample", "--N", "20"];
    let from_env = cli().args(args).env("HAARBLOCKS_SEED", "77").output().unwrap();
    let from_flag = run(&["sample", "--N", "20", "--seed", "77"]);
    let default = run(&args);
    assert_eq!(json(&from_env)["config"]["parameters"]["seed"], 77);
    assert_eq!(from_env.stdout, from_flag.stdout);
    assert_ne!(from_env.stdout, default.stdout);

    let flag_wins = cli().args(["sample", "--N", "20", "--seed", "1"]).env("HAARBLOCKS_SEED", "77").output().unwrap();
    assert_eq!(flag_wins.stdout, default.stdout);
}

#[test]
fn csv_rows_match_json_rows() {
    let base = ["experiment", "mdp-entry", "--N", "1e3,1e4,1e5"];
    let v = json(&run(&base));
    let out = cli().args(base).args(["--format", "csv"]).output().unwrap();
    assert_eq!(code(&out), 0);
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(records.len(), rows.len());
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for (rec, row) in records.iter().zip(rows) {
        assert_eq!(rec[col("n")].parse::<u64>().unwrap(), row["n"].as_u64().unwrap());
        let est: f64 = rec[col("estimate")].parse().unwrap();
        assert_eq!(est, row["estimate"].as_f64().unwrap());
        assert_eq!(&rec[col("status")], row["status"].as_str().unwrap());
    }
}

#[test]
fn rate_reports_infinity_as_flag() {
    let v = json(&run(&["rate", "--input", r#"{"kind":"orthogonal_ldp","matrix":[[1.0]]}"#]));
    assert_eq!(v["result"]["infinite"], true);
    assert!(v["result"]["value"].is_null());
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
}
