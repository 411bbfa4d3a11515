use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 7

[source]
kind = "simulator"
scenarios = ["nlos"]
num_samples = 40960

[filter]
r_values = [1e-2]
include_unfiltered = true

[code]
rates = [0.1, 0.5]
"#;

fn skg(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skg"))
        .current_dir(dir)
        .args(args)
        .envs(envs.iter().copied())
        .output()
        .expect("skg runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(code(&skg(d, &["--help"], &[])), 0);
    assert_eq!(code(&skg(d, &["frobnicate"], &[])), 2);
    assert_eq!(code(&skg(d, &["sweep", "--format", "xml"], &[])), 2);
    assert_eq!(code(&skg(d, &["sweep", "--config", "missing.toml"], &[])), 2);
    fs::write(d.join("bad.toml"), "seed = 1\nunknown_key = 3\n").unwrap();
    assert_eq!(code(&skg(d, &["sweep", "--config", "bad.toml"], &[])), 2);
    fs::write(d.join("rate.toml"), "[code]\nrates = [1.5]\n").unwrap();
    assert_eq!(code(&skg(d, &["run", "--config", "rate.toml"], &[])), 2);
    assert_eq!(code(&skg(d, &["run", "--config", "small.toml", "--r", "x"], &[])), 2);
    assert_eq!(
        code(&skg(d, &["sweep", "--config", "small.toml"], &[("SKG_THREADS", "0")])),
        2
    );
    fs::write(d.join("junk.skgk"), b"nope").unwrap();
    assert_eq!(code(&skg(d, &["nist", "junk.skgk"], &[])), 3);
    assert_eq!(code(&skg(d, &["nist", "absent.skgk"], &[])), 3);
    fs::write(d.join("junk.skg1"), b"SKG1\x02\x00\x00\x00{}").unwrap();
    fs::write(
        d.join("dataset.toml"),
        "[source]\nkind = \"dataset\"\nlegit_path = \"junk.skg1\"\n",
    )
    .unwrap();
    assert_eq!(code(&skg(d, &["run", "--config", "dataset.toml"], &[])), 3);
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let dir = setup();
    let d = dir.path();
    let a = skg(
        d,
        &["sweep", "--config", "small.toml", "--out", "a"],
        &[("SKG_THREADS", "1")],
    );
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = skg(
        d,
        &["sweep", "--config", "small.toml", "--out", "b"],
        &[("SKG_THREADS", "4")],
    );
    assert_eq!(code(&b), 0);
    for name in [
        "cells.csv",
        "mismatch.csv",
        "report.json",
        "nist.json",
        "nist_pvalues.csv",
        "detrend_trace.csv",
    ] {
        assert_eq!(
            fs::read(d.join("a").join(name)).unwrap(),
            fs::read(d.join("b").join(name)).unwrap(),
            "{name}"
        );
    }
    let cells = fs::read_to_string(d.join("a/cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 2 * 2);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("a/report.json")).unwrap()).unwrap();
    let cell = &report["cells"][0];
    for field in ["h_min", "h_min_cond", "leakage", "estimator", "block_size", "samples"] {
        assert!(!cell[field].is_null(), "{field}");
    }
}

#[test]
fn seed_flag_changes_results() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(code(&skg(d, &["run", "--config", "small.toml", "--out", "s1"], &[])), 0);
    assert_eq!(
        code(&skg(
            d,
            &["run", "--config", "small.toml", "--seed", "8", "--out", "s2"],
            &[]
        )),
        0
    );
    assert_ne!(
        fs::read(d.join("s1/cells.csv")).unwrap(),
        fs::read(d.join("s2/cells.csv")).unwrap()
    );
}

#[test]
fn json_format_writes_json_tables() {
    let dir = setup();
    let d = dir.path();
    let o = skg(
        d,
        &[
            "run",
            "--config",
            "small.toml",
            "--format",
            "json",
            "--r",
            "none",
            "--out",
            "j",
        ],
        &[],
    );
    assert_eq!(code(&o), 0);
    let cells: serde_json::Value = serde_json::from_slice(&fs::read(d.join("j/cells.json")).unwrap()).unwrap();
    assert_eq!(cells.as_array().unwrap().len(), 1);
    assert_eq!(cells[0]["filter"], "none");
    assert!(!d.join("j/cells.csv").exists());
}

#[test]
fn simulate_then_replay_matches_direct_run_shape() {
    let dir = setup();
    let d = dir.path();
    let o = skg(d, &["simulate", "--config", "small.toml", "--out", "sim"], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(&fs::read(d.join("sim/nlos_legit.skg1")).unwrap()[..4], b"SKG1");
    assert!(d.join("sim/nlos_eve.skg1").exists());
    let o = skg(
        d,
        &[
            "run",
            "--config",
            "sim/nlos.toml",
            "--r",
            "1e-2",
            "--rate",
            "0.1",
            "--out",
            "replay",
        ],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cells = fs::read_to_string(d.join("replay/cells.csv")).unwrap();
    let row = cells.lines().nth(1).unwrap();
    assert!(row.starts_with("nlos,1e-2,0.01,0.1,80,"), "{row}");
}

#[test]
fn keys_feed_the_randomness_suite() {
    let dir = setup();
    let d = dir.path();
    let o = skg(
        d,
        &[
            "keys",
            "--config",
            "small.toml",
            "--r",
            "1e-2",
            "--rate",
            "0.1",
            "--out",
            "k",
        ],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let raw = fs::read(d.join("k/keys.skgk")).unwrap();
    assert_eq!(&raw[..4], b"SKGK");
    let hex: Vec<String> = serde_json::from_slice(&fs::read(d.join("k/keys.json")).unwrap()).unwrap();
    assert!(!hex.is_empty());
    assert_eq!(raw.len(), 4 + 32 * hex.len());
    assert_eq!(hex[0].len(), 64);

    let o = skg(d, &["nist", "k/keys.skgk", "--out", "n"], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table: serde_json::Value = serde_json::from_slice(&fs::read(d.join("n/nist.json")).unwrap()).unwrap();
    assert!(table.to_string().contains("Runs"));
    let csv = fs::read_to_string(d.join("n/nist_pvalues.csv")).unwrap();
    assert!(csv.starts_with("stream,first_key,last_key,bits,test,p1,p2,pass\n"));
}
