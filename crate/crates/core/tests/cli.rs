use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
dataset = "ds"
seeds = [4]
train_episodes = 2
dataset_seed = 3

[scenarios]
queue_len = 4
seed = 0
per_class = { low = 1, medium = 1, high = 1 }

[training_scenarios]
queue_len = 4
seed = 50
per_class = { low = 1, medium = 1, high = 1 }

[controller]
k = 3
hidden = [16]

[generator]
traces_per_class = { low = 1, medium = 1, high = 1 }
num_videos = 6
num_users = 2
chunks_per_video = [4, 8]
"#;

fn feedflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feedflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn full_chain_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
    let cfg = ["--config", "small.toml"];

    let out = feedflow(dir, &[&["gen-dataset", "--out", "ds"][..], &cfg].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("ds/manifest.json").is_file());

    // A second generation into the same directory is refused.
    let again = feedflow(dir, &[&["gen-dataset", "--out", "ds"][..], &cfg].concat());
    assert_eq!(again.status.code(), Some(2));

    for stage in ["train", "evaluate", "report"] {
        let out = feedflow(dir, &[&[stage, "--out", "run"][..], &cfg].concat());
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(dir.join("run/models/gfn-multi-seed4.json").is_file());
    assert!(dir.join("run/models/gfn-multi-seed4.loss.csv").is_file());
    let metrics = std::fs::read_to_string(dir.join("run/metrics.csv")).unwrap();
    // Header plus 4 policies x 1 seed x 3 scenarios.
    assert_eq!(metrics.lines().count(), 1 + 12);
    let report = std::fs::read_to_string(dir.join("run/report.md")).unwrap();
    assert!(report.contains("| rule-based | High |"), "{report}");

    let out = feedflow(dir, &[&["ablate", "--out", "run"][..], &cfg].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("run/ablation/ablation.md").is_file());
}

#[test]
fn evaluate_without_models_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
    assert!(feedflow(dir, &["gen-dataset", "--config", "small.toml", "--out", "ds"]).status.success());
    let out = feedflow(dir, &["evaluate", "--config", "small.toml", "--out", "run", "--policy", "gfn-multi"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.join("run/metrics.csv").exists());
}

#[test]
fn rule_based_needs_no_training() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
    assert!(feedflow(dir, &["gen-dataset", "--config", "small.toml", "--out", "ds"]).status.success());
    let args = ["evaluate", "--config", "small.toml", "--out", "run", "--policy", "rule-based", "--class", "low"];
    let out = feedflow(dir, &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(dir.join("run/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    assert!(metrics.lines().nth(1).unwrap().starts_with("rule-based,low,"));
}
