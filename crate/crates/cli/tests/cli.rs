use std::fs;
use std::process::{Command, Output};

fn qtomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtomo")).args(args).output().expect("binary runs")
}

const CONFIG: &str = r#"
experiment = "tomo"
observable = "J_y"
n_states = 2
steps = 8
seed = 3

[model]
kind = "kicked-top"
j = 1.5
lambda = 3.0
alpha = 1.4

[sweep]
param = "lambda"
values = [0.5, 7.0]
"#;

#[test]
fn run_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = qtomo(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("# qtomo "));
    assert!(text.contains("# seed: 3\n"));
    assert!(text.contains("sweep_param,sweep_value,step,metric,mean,stderr,n\n"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let o = qtomo(&["run", "--config", cfg.to_str().unwrap(), "--seed", "99"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("# seed: 99\n"));
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, CONFIG.replace("values = [0.5, 7.0]", "values = []")).unwrap();
    let o = qtomo(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep.values"));
}

#[test]
fn unknown_observable_lists_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, CONFIG.replace("\"J_y\"", "\"Q\"")).unwrap();
    let o = qtomo(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("J_y") && err.contains("random-local"), "{err}");
}

#[test]
fn missing_config_file_exits_with_two() {
    let o = qtomo(&["run", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn presets_listed() {
    let o = qtomo(&["presets"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() >= 8);
    for name in ["fig2.1-phase-space", "fig3.1-coherent", "fig4.8-xxz", "fig5.2-perturb"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn preset_toml_round_trips_through_run() {
    let o = qtomo(&["presets", "--show", "fig2.4-krylov-dim"]);
    assert!(o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.toml");
    fs::write(&cfg, o.stdout).unwrap();
    let text = fs::read_to_string(&cfg).unwrap().replace("values = [2.0, 3.0, 4.0]", "values = [2.0]");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("k.csv");
    let o = qtomo(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out).unwrap();
    assert!(csv.contains("L,2,0,krylov_dim,13,0,1\n"), "{csv}");
}

#[test]
fn check_passes() {
    let o = qtomo(&["check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
