mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::small_config;
use erasure_cli::PipelineConfig;

fn erasure(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erasure"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    small_config(dir).save(&path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn printed_config_loads_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let out = erasure(dir.path(), &["print-config", "--seed", "9", "--variant", "no_blur"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = PipelineConfig::from_toml(&text).unwrap();
    let mut expected = PipelineConfig::toy();
    expected.seed = 9;
    expected.variant = erasure_cli::Variant::NoBlur;
    assert_eq!(cfg, expected);

    std::fs::write(dir.path().join("c.toml"), &text).unwrap();
    let again = erasure(dir.path(), &["--config", "c.toml", "print-config"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn configuration_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = \"x\"\n").unwrap();
    let bad = erasure(dir.path(), &["--config", "bad.toml", "print-config"]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("configuration error"));

    std::fs::write(dir.path().join("unknown.toml"), "[train]\nepochz = 3\n").unwrap();
    assert_eq!(code(&erasure(dir.path(), &["--config", "unknown.toml", "print-config"])), 2);
    assert_eq!(code(&erasure(dir.path(), &["--config", "missing.toml", "print-config"])), 2);
    assert_eq!(code(&erasure(dir.path(), &["--variant", "nope", "print-config"])), 2);
}

#[test]
fn commands_report_status_through_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let run = |args: &[&str]| {
        let mut full = vec!["--config", config.as_str()];
        full.extend_from_slice(args);
        erasure(dir.path(), &full)
    };
    assert_eq!(code(&run(&["generate-data"])), 0);
    let again = run(&["generate-data"]);
    assert_eq!(code(&again), 1);
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_eq!(code(&run(&["generate-data", "--force"])), 0);

    // No checkpoint yet.
    assert_eq!(code(&run(&["infer"])), 2);
    assert_eq!(code(&run(&["train"])), 0);
    assert_eq!(code(&run(&["infer"])), 0);
    let evaluated = run(&["evaluate"]);
    assert_eq!(code(&evaluated), 0);
    assert!(String::from_utf8_lossy(&evaluated.stdout).contains("AP"));

    std::fs::write(dir.path().join("data/eval/images/test_0002.png"), b"").unwrap();
    let partial = run(&["infer", "--jobs", "1"]);
    assert_eq!(code(&partial), 1);
    assert!(String::from_utf8_lossy(&partial.stderr).contains("test_0002"));
    assert_eq!(code(&run(&["evaluate"])), 1);
}
