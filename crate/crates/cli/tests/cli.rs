use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 2
bootstrap_iters = 30
methods = ["ERM"]
metrics = ["auroc", "ece"]

[data]
preset = "two-group-gap"
n = 900

[train]
lr = 0.01
eval_every = 50
max_steps = 100
patience = 1
"#;

fn groupfair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupfair")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("bench.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("out");
    let o = groupfair(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2", "--tau", "0.4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("metrics.csv").is_file());
    let r = groupfair(&["report", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("== ERM"));
    assert!(text.contains("== BalancedERM"));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"tau\": 0.4"));
}

#[test]
fn validation_errors_exit_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &CONFIG.replace(r#"methods = ["ERM"]"#, "methods = []"));
    let o = groupfair(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");

    let cfg = write_config(tmp.path(), CONFIG);
    let o = groupfair(&["run", "--config", &cfg, "--tau", "1.5"]);
    assert_eq!(o.status.code(), Some(2));

    let o = groupfair(&["report", tmp.path().join("nothing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_and_generate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{CONFIG}\n[grid.MeanMatch]\nlambda = [0.0, 10.0]\n"));
    let out = tmp.path().join("s");
    let o = groupfair(&["sweep", "--config", &cfg, "--method", "MeanMatch", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("MeanMatch,lambda,10,ALL,prob_equalized_odds")));

    let o = groupfair(&["generate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(out.join("data.csv")).unwrap().lines().count(), 901);
}

#[test]
fn undefined_worst_group_metric_exits_3() {
    // A threshold no score reaches leaves PPV undefined in every group.
    let tmp = tempfile::tempdir().unwrap();
    let text = CONFIG.replace(r#"metrics = ["auroc", "ece"]"#, r#"metrics = ["ppv"]"#).replace("seed = 2", "seed = 2\ntau = 0.999999");
    let cfg = write_config(tmp.path(), &text);
    let o = groupfair(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ppv"));
}
