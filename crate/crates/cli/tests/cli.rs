use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::SystemTime;

const SMALL: [&str; 12] = [
    "--set",
    "models.conv_channels=[4, 4, 8]",
    "--set",
    "models.fc_hidden=16",
    "--set",
    "models.rnn_hidden=8",
    "--set",
    "models.embedding_dim=8",
    "--set",
    "models.video_channels=[2, 2, 4, 4]",
    "--set",
    "models.video_fc_hidden=8",
];

const TINY_DATA: [&str; 8] = [
    "--set",
    "dataset.per_class_total=6",
    "--set",
    "dataset.train_fraction=0.5",
    "--set",
    "training.batch_size=4",
    "--set",
    "training.eval_every=2",
];

fn emofuse(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_emofuse"))
        .args(args)
        .env_remove("EMOFUSE_SEED")
        .env("EMOFUSE_LOG", "warn")
        .output()
        .unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn mtimes(dir: &Path) -> Vec<(String, SystemTime)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), e.metadata().unwrap().modified().unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_train_eval_report_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    assert_eq!(code(&emofuse(&["synth", "--n", "6", "--seed", "7", "--out", s(&data), "--jobs", "2"])), 0);
    assert!(data.join("config.toml").is_file());

    let mut args = vec!["train", "--variant", "cnn_rnn", "--epochs", "2", "--data", s(&data), "--out", s(&run)];
    args.extend(SMALL);
    args.extend(TINY_DATA);
    assert_eq!(code(&emofuse(&args)), 0);
    for f in ["config.toml", "run.json", "history.jsonl", "best.ckpt", "last.ckpt", "manifest.jsonl", "timing.jsonl"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let config = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(config.contains("variant = \"cnn_rnn\""));
    assert!(config.contains("fc_hidden = 16"));
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["content_hash"].as_str().unwrap().len(), 64);

    assert_eq!(code(&emofuse(&["eval", "--run", s(&run), "--data", s(&data)])), 0);
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("eval/metrics.json")).unwrap()).unwrap();
    let names: Vec<&str> = metrics.as_array().unwrap().iter().map(|m| m["checkpoint"].as_str().unwrap()).collect();
    assert_eq!(names, ["best.ckpt", "last.ckpt"]);
    assert_eq!(metrics[0]["examples"], 12);
    assert!(run.join("eval/confusion.csv").is_file());

    let mismatch = emofuse(&["eval", "--run", s(&run), "--data", s(&data), "--classes", "3", "--out", s(&dir.path().join("e3"))]);
    assert_eq!(code(&mismatch), 2);

    assert_eq!(code(&emofuse(&["report", "--run", s(&run)])), 0);
    for f in ["history_loss.png", "history_acc.png", "confusion.png", "confusion.csv", "summary_table.csv"] {
        assert!(run.join("report").join(f).is_file(), "{f}");
    }
    let table = fs::read_to_string(run.join("report/summary_table.csv")).unwrap();
    assert!(table.starts_with("Architecture,Accuracy,Data Aug.,Emotion\n"));
    assert!(table.contains("CNN+RNN [best]") && table.contains("CNN+RNN [last]"));
    assert!(table.contains(",Yes,\"H,S,A,N\""));

    // resume picks up after the last recorded iteration
    let history_len = fs::read_to_string(run.join("history.jsonl")).unwrap().lines().count();
    let mut args = vec!["train", "--variant", "cnn_rnn", "--epochs", "3", "--resume", "--data", s(&data), "--out", s(&run)];
    args.extend(SMALL);
    args.extend(TINY_DATA);
    assert_eq!(code(&emofuse(&args)), 0);
    let history = fs::read_to_string(run.join("history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), history_len * 3 / 2);
}

#[test]
fn pretrain_then_fine_tune_two_stream() {
    let dir = tempfile::tempdir().unwrap();
    let (data, pre, run) = (dir.path().join("data"), dir.path().join("pre"), dir.path().join("run"));
    let synth = ["synth", "--n", "4", "--classes", "3", "--video", "--out", s(&data), "--jobs", "2"];
    assert_eq!(code(&emofuse(&synth)), 0);
    let mut args = vec!["pretrain", "--classes", "3", "--epochs", "1", "--data", s(&data), "--out", s(&pre)];
    args.extend(SMALL);
    args.extend(TINY_DATA);
    assert_eq!(code(&emofuse(&args)), 0);
    let ckpt = pre.join("pretrained.ckpt");
    assert!(ckpt.is_file());

    let mut args = vec!["train", "--variant", "two_stream", "--classes", "3", "--epochs", "1"];
    args.extend(["--init", s(&ckpt), "--data", s(&data), "--out", s(&run)]);
    args.extend(SMALL);
    args.extend(TINY_DATA);
    assert_eq!(code(&emofuse(&args)), 0);
    let record = fs::read_to_string(run.join("run.json")).unwrap();
    assert!(record.contains("pretrained.ckpt"));
}

#[test]
fn preprocess_is_idempotent_and_checks_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let (syn, raw, data) = (dir.path().join("syn"), dir.path().join("raw"), dir.path().join("data"));
    let synth = ["synth", "--n", "2", "--classes", "3", "--video", "--out", s(&syn), "--raw", s(&raw)];
    assert_eq!(code(&emofuse(&synth)), 0);

    let missing = emofuse(&["preprocess", "--in", s(&dir.path().join("nope")), "--out", s(&data)]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("does not exist"));

    let pre = ["preprocess", "--segment", "DS2", "--in", s(&raw), "--out", s(&data), "--jobs", "2"];
    assert_eq!(code(&emofuse(&pre)), 0);
    let before = (mtimes(&data.join("audio")), mtimes(&data.join("video")));
    assert_eq!(before.0.len(), 12);
    assert_eq!(code(&emofuse(&pre)), 0);
    assert_eq!((mtimes(&data.join("audio")), mtimes(&data.join("video"))), before);

    let mut forced = pre.to_vec();
    forced.push("--force");
    assert_eq!(code(&emofuse(&forced)), 0);
    assert_ne!(mtimes(&data.join("audio")), before.0);
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("exp.toml");
    fs::write(&file, "[dataset]\nutterances_per_class = 1\nduration_s = 2.0\n[training]\nclass_mode = 3\n[models]\nnum_classes = 3\n").unwrap();
    let out = dir.path().join("a");
    assert_eq!(code(&emofuse(&["synth", "--config", s(&file), "--out", s(&out), "--n", "2"])), 0);
    let labels = fs::read_to_string(out.join("labels.jsonl")).unwrap();
    assert_eq!(labels.lines().count(), 6);
    let cfg = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(cfg.contains("duration_s = 2.0") && cfg.contains("utterances_per_class = 2"));
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(code(&emofuse(&["synth", "--out", s(&out), "--set", "dataset.bogus=1"])), 2);
    assert_eq!(code(&emofuse(&["synth", "--out", s(&out), "--classes", "5"])), 2);
    assert_eq!(code(&emofuse(&["synth"])), 2);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[training\n").unwrap();
    assert_eq!(code(&emofuse(&["synth", "--out", s(&out), "--config", s(&bad)])), 2);
    assert_eq!(code(&emofuse(&["train", "--out", s(&out), "--data", s(&dir.path().join("none"))])), 2);
    assert_eq!(code(&emofuse(&["report", "--run", s(&out)])), 2);
    let env = Command::new(env!("CARGO_BIN_EXE_emofuse"))
        .args(["synth", "--out", s(&out)])
        .env("EMOFUSE_TRAINING__BATCH_SIZE", "0")
        .output()
        .unwrap();
    assert_eq!(code(&env), 2);
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&emofuse(&["synth", "--n", "2", "--out", s(&data)])), 0);
    let ck = dir.path().join("broken.ckpt");
    fs::write(&ck, b"garbage").unwrap();
    let out = emofuse(&["eval", "--checkpoint", s(&ck), "--data", s(&data), "--out", s(&dir.path().join("e"))]);
    assert_eq!(code(&out), 1);
}
