mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::copy_data;

fn dtmeasure(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtmeasure"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn stage_order_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = copy_data(dir.path()).join("config.toml");

    let o = dtmeasure(&cfg, &["regress"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("re-run `dtmeasure indicators`"));

    for stage in ["ingest", "segment", "match", "sample", "train", "evaluate", "predict", "indicators"] {
        let o = dtmeasure(&cfg, &[stage]);
        assert_eq!(code(&o), 0, "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = dtmeasure(&cfg, &["regress", "--rho", "50"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let printed = String::from_utf8_lossy(&o.stdout);
    assert!(printed.lines().any(|l| l.ends_with("regression.json")), "{printed}");

    // The report must see the rho the regression ran with.
    assert_eq!(code(&dtmeasure(&cfg, &["report"])), 3);
    assert_eq!(code(&dtmeasure(&cfg, &["regress"])), 0);
    assert_eq!(code(&dtmeasure(&cfg, &["report"])), 0);
    assert!(dir.path().join("out/report.txt").is_file());
}

#[test]
fn all_honours_seed_and_out_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = copy_data(dir.path()).join("config.toml");
    let out = dir.path().join("elsewhere");
    let o = dtmeasure(&cfg, &["--seed", "9", "--out", out.to_str().unwrap(), "all"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("indicators.csv").is_file());
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("provenance/sample.json")).unwrap()).unwrap();
    assert_eq!(rec["seed"], 9);
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = copy_data(dir.path());
    let cfg = data.join("config.toml");

    assert_eq!(code(&dtmeasure(&cfg, &["regress", "--rho", "-1"])), 2);
    assert_eq!(code(&dtmeasure(&cfg, &["predict", "--backend", "psychic"])), 2);
    assert_eq!(code(&dtmeasure(&cfg, &["frobnicate"])), 2);

    let bad = data.join("bad.toml");
    std::fs::write(&bad, "seed = [\n").unwrap();
    assert_eq!(code(&dtmeasure(&bad, &["ingest"])), 2);

    std::fs::write(data.join("lexicon.csv"), "term,category\ncloud,CC\n").unwrap();
    let o = dtmeasure(&cfg, &["all"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected header"));
}

#[test]
fn remote_backend_without_endpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = copy_data(dir.path()).join("config.toml");
    let o = dtmeasure(&cfg, &["predict", "--backend", "remote"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("remote endpoint is empty"));
}
