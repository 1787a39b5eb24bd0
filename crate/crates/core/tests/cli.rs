use std::path::Path;
use std::process::{Command, Output};

fn actsense(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_actsense"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn synth(dir: &Path, videos: usize) -> String {
    let data = dir.join("data");
    let out = actsense(&["synth", "--videos", &videos.to_string(), "--out", data.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data.join("pipeline.config").display().to_string()
}

#[test]
fn synth_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), 6);
    let out_dir = dir.path().join("out");
    let out = actsense(
        &[
            "run",
            "--config",
            &config,
            "--out",
            out_dir.to_str().unwrap(),
            "--set",
            "train.epochs=3",
            "--set",
            "train.hidden=32,32",
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("run: ok mAP "), "{stdout}");
    let cfg = std::fs::read_to_string(out_dir.join("run.config")).unwrap();
    assert!(cfg.contains("train.epochs = 3"), "{cfg}");
}

#[test]
fn env_sits_between_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), 4);
    let out_dir = dir.path().join("out");
    let out = actsense(
        &["describe", "--config", &config, "--out", out_dir.to_str().unwrap(), "--set", "stride=2"],
        &[("APP_STRIDE", "8"), ("APP_K_VERBS", "3")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = std::fs::read_to_string(out_dir.join("describe.config")).unwrap();
    assert!(cfg.contains("stride = 2\n") && cfg.contains("k_verbs = 3\n"), "{cfg}");
}

#[test]
fn eval_without_checkpoint_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), 4);
    let out_dir = dir.path().join("out");
    let out = actsense(&["eval", "--config", &config, "--out", out_dir.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("train"), "{stderr}");
    assert!(out_dir.join("manifest.eval.json").exists());
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = actsense(&["run", "--set", "no.such.key=1"], &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = actsense(&["run", "--out", dir.path().join("o").to_str().unwrap()], &[("APP_TRAIN__EPOCHS", "0")]);
    assert_eq!(out.status.code(), Some(2));
    let out = actsense(&["run", "--out", dir.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}
