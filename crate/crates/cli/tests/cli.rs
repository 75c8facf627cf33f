use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn c2ftp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_c2ftp")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = c2ftp(args);
    assert!(
        out.status.success(),
        "c2ftp {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

const TINY: &str = "epochs = 2
batch_size = 8
k = 4
tau = 3
diffusion_steps = 20
hidden = 8
embed = 8
heads = 2
context = 12
decoder_hidden = 12
refiner_width = 8
refiner_heads = 2
refiner_feedforward = 12
refiner_context = 12
refiner_hidden = 24
step_embedding = 8
max_train_scenes = 24
";

#[test]
fn full_workflow_on_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = |n: &str| p(d, n).to_string_lossy().into_owned();
    std::fs::write(p(d, "tiny.toml"), TINY).unwrap();

    ok(&["synth", "--out", &s("tracks.csv"), "--agents", "12", "--seed", "3"]);
    ok(&["prepare-data", "--input", &s("tracks.csv"), "--unit", "meters", "--hz", "10", "--out", &s("data.json")]);
    ok(&["train", "--stage", "refiner", "--data", &s("data.json"), "--config", &s("tiny.toml"), "--out", &s("refiner.ckpt")]);
    ok(&[
        "train", "--stage", "interaction", "--data", &s("data.json"), "--config", &s("tiny.toml"),
        "--refiner", &s("refiner.ckpt"), "--out", &s("full.ckpt"),
    ]);
    assert!(p(d, "full.best.ckpt").exists());

    let table = ok(&["evaluate", "--ckpt", &s("full.ckpt"), "--data", &s("data.json"), "--k", "4", "--tau", "3", "--out", &s("report.json")]);
    assert!(table.contains("5s"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p(d, "report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["rows"].as_array().unwrap().len(), 5);
    assert_eq!(report["report"]["metadata"]["k"], 4);
    assert_eq!(report["config"]["stage"], "interaction");

    ok(&["export-scene", "--data", &s("data.json"), "--index", "0", "--out", &s("scene.json")]);
    ok(&["predict", "--ckpt", &s("full.ckpt"), "--scene", &s("scene.json"), "--k", "4", "--tau", "3", "--out", &s("pred.json")]);
    let pred: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p(d, "pred.json")).unwrap()).unwrap();
    let text = pred.to_string();
    assert!(text.contains("trajectories"));
    ok(&["predict", "--ckpt", &s("full.ckpt"), "--scene", &s("scene.json"), "--k", "4", "--tau", "3", "--out", &s("pred2.json")]);
    assert_eq!(std::fs::read(p(d, "pred.json")).unwrap(), std::fs::read(p(d, "pred2.json")).unwrap());

    let sweep = ok(&["sweep", "--ckpt", &s("full.ckpt"), "--data", &s("data.json"), "--taus", "1,3", "--k", "4"]);
    assert!(sweep.lines().count() >= 3);

    ok(&["plot-case", "--ckpt", &s("full.ckpt"), "--data", &s("data.json"), "--scene", "0", "--k", "4", "--tau", "3", "--out", &s("case.svg")]);
    assert!(std::fs::read_to_string(p(d, "case.svg")).unwrap().starts_with("<svg"));

    let over = c2ftp(&["predict", "--ckpt", &s("full.ckpt"), "--scene", &s("scene.json"), "--tau", "21", "--out", &s("bad.json")]);
    assert!(!over.status.success());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = |n: &str| p(d, n).to_string_lossy().into_owned();
    std::fs::write(p(d, "bad.toml"), "epochs = 2\nlearning_rat = 0.1\n").unwrap();
    ok(&["synth", "--out", &s("tracks.csv"), "--agents", "6"]);
    ok(&["prepare-data", "--input", &s("tracks.csv"), "--unit", "meters", "--hz", "10", "--out", &s("data.json")]);
    let out = c2ftp(&["train", "--stage", "refiner", "--data", &s("data.json"), "--config", &s("bad.toml"), "--out", &s("x.ckpt")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
    assert!(!p(d, "x.ckpt").exists());
}

#[test]
fn printed_defaults_parse_back() {
    for stage in ["refiner", "interaction", "interaction-standalone"] {
        let text = ok(&["print-config", "--stage", stage]);
        let cfg = c2ftp::pipeline::TrainConfig::parse(&text, None).unwrap();
        assert_eq!(cfg.stage.to_string(), stage);
        assert!(text.contains("learning_rate") && text.contains("beta_end"));
    }
}
