mod common;

use std::path::Path;

use actsense::pipeline::{
    execute, read_descriptions, Command, Manifest, PipelineConfig, CHECKPOINT_FILE, DESCRIPTIONS_FILE, EXIT_CONFIG_ERROR,
    EXIT_STAGE_ERROR, REPORT_FILE,
};
use actsense::Error;
use common::synthetic_setup;

fn quick(mut cfg: PipelineConfig) -> PipelineConfig {
    cfg.train.epochs = 5;
    cfg.train.hidden = [64, 64];
    cfg
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn three_video_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(synthetic_setup(dir.path(), 3));
    let out = execute(Command::Run, &cfg);
    assert!(out.success(), "{:?}", out.error);
    let report = String::from_utf8(read(&cfg.out, REPORT_FILE)).unwrap();
    assert!(report.lines().last().unwrap().starts_with("mAP,"));
    let m = out.manifest.unwrap();
    assert_eq!(m.status, "ok");
    assert_eq!(m.template_version, "v1");
    for a in ["descriptions.jsonl", "embeddings.bin", "checkpoint.bin", "loss.csv", "eval_report.txt"] {
        assert_eq!(m.artifacts[a].len(), 64, "{a}");
    }
    assert_eq!(m.inputs.len(), 5);
    let on_disk = Manifest::load(&cfg.out.join("manifest.run.json")).unwrap();
    assert_eq!(on_disk, m);
}

#[test]
fn stride_four_on_nine_frames_gives_three_lines() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = String::new();
    for i in 0..9 {
        lines.push_str(&format!(
            "{{\"video_id\":\"V\",\"frame_index\":{i},\"timestamp_s\":{i},\"activities\":[\"Opening a door\"],\"objects\":[\"door\"],\"interactions\":[\"touching\"],\"image_ref\":\"V/{i}\"}}\n"
        ));
    }
    let data = dir.path().join("v.jsonl");
    std::fs::write(&data, lines).unwrap();
    let cfg = PipelineConfig { test_data: Some(data), out: dir.path().join("out"), ..PipelineConfig::default() };
    let out = execute(Command::Describe, &cfg);
    assert!(out.success(), "{:?}", out.error);
    let recs = read_descriptions(&cfg.out.join(DESCRIPTIONS_FILE)).unwrap();
    assert_eq!(recs.iter().map(|r| r.frame_index).collect::<Vec<_>>(), vec![0, 4, 8]);
    assert!(recs.iter().all(|r| !r.s_d.is_empty() && !r.s_c.is_empty()));
    assert!(recs[0].s_d.contains("opening a door"));
}

#[test]
fn staged_commands_match_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = quick(synthetic_setup(dir.path(), 24));
    let whole = PipelineConfig { out: dir.path().join("whole"), ..base.clone() };
    assert!(execute(Command::Run, &whole).success());

    let staged = PipelineConfig { out: dir.path().join("staged"), ..base };
    let train_first = execute(Command::Train, &staged);
    assert!(matches!(train_first.error, Some(Error::PrerequisiteMissing("describe"))));
    assert_eq!(train_first.exit_code, EXIT_STAGE_ERROR);
    assert_eq!(train_first.manifest.unwrap().failed_stage.as_deref(), Some("embed"));
    std::fs::remove_file(staged.out.join("manifest.train.json")).unwrap();
    std::fs::remove_file(staged.out.join("train.config")).unwrap();

    let eval_first = execute(Command::Eval, &staged);
    assert!(matches!(eval_first.error, Some(Error::PrerequisiteMissing("train"))));
    std::fs::remove_file(staged.out.join("manifest.eval.json")).unwrap();
    std::fs::remove_file(staged.out.join("eval.config")).unwrap();

    for cmd in [Command::Describe, Command::Train, Command::Eval] {
        let o = execute(cmd, &staged);
        assert!(o.success(), "{cmd:?}: {:?}", o.error);
    }
    for f in [DESCRIPTIONS_FILE, CHECKPOINT_FILE, REPORT_FILE] {
        assert_eq!(read(&whole.out, f), read(&staged.out, f), "{f}");
    }

    let ablate = execute(Command::Ablate, &staged);
    assert!(ablate.success());
    let rows = std::fs::read_to_string(staged.out.join("ablation.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 5);
    let fewshot = execute(Command::Fewshot, &staged);
    assert!(fewshot.success());
    let rows = std::fs::read_to_string(staged.out.join("fewshot.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
}

#[test]
fn runs_never_overwrite_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(synthetic_setup(dir.path(), 4));
    assert!(execute(Command::Run, &cfg).success());
    let before = read(&cfg.out, CHECKPOINT_FILE);
    let again = execute(Command::Run, &cfg);
    assert_eq!(again.exit_code, EXIT_CONFIG_ERROR);
    assert!(matches!(again.error, Some(Error::ArtifactExists(_))));
    assert_eq!(read(&cfg.out, CHECKPOINT_FILE), before);
}

#[test]
fn manifest_replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(synthetic_setup(dir.path(), 10));
    assert!(execute(Command::Run, &cfg).success());
    let mut replay = PipelineConfig::default();
    replay.apply_file(&cfg.out.join("manifest.run.json")).unwrap();
    replay.out = dir.path().join("replay");
    replay.cache_dir = Some(dir.path().join("cache2"));
    assert!(execute(Command::Run, &replay).success());
    for f in [DESCRIPTIONS_FILE, CHECKPOINT_FILE, REPORT_FILE, "embeddings.bin", "loss.csv"] {
        assert_eq!(read(&cfg.out, f), read(&replay.out, f), "{f}");
    }
}

#[test]
fn missing_vocabulary_fails_before_any_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_setup(dir.path(), 3);
    cfg.vocab.as_mut().unwrap()[1] = dir.path().join("missing.txt");
    let out = execute(Command::Run, &cfg);
    assert_eq!(out.exit_code, EXIT_CONFIG_ERROR);
    assert!(out.manifest.is_none());
    assert!(!cfg.out.exists());
}

#[test]
fn ingest_failure_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_setup(dir.path(), 3);
    let test = cfg.test_data.clone().unwrap();
    let mut text = std::fs::read_to_string(&test).unwrap();
    text.push_str("{\"video_id\":\"X\",\"frame_index\":0,\"timestamp_s\":0,\"activities\":[\"Levitating\"],\"objects\":[],\"interactions\":[],\"image_ref\":\"X/0\"}\n");
    std::fs::write(&test, text).unwrap();
    let out = execute(Command::Run, &cfg);
    assert_eq!(out.exit_code, EXIT_STAGE_ERROR);
    let m = Manifest::load(&cfg.out.join("manifest.run.json")).unwrap();
    assert_eq!(m.status, "failed");
    assert_eq!(m.failed_stage.as_deref(), Some("ingest"));
}
