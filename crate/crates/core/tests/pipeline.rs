use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use emofuse::dataset::{
    build_manifest, clip_tensor, generate_synthetic_fixture, preprocess_corpus, spectrogram_tensor, ClassMode,
    FixtureConfig, Modality, PreprocessConfig, AUDIO_DIR,
};
use emofuse::signal::SegmentSpec;

fn files(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for sub in ["audio", "video"] {
        if let Ok(entries) = fs::read_dir(dir.join(sub)) {
            for e in entries {
                out.insert(format!("{sub}/{}", e.unwrap().file_name().to_string_lossy()));
            }
        }
    }
    out
}

fn raw_corpus(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let (syn, raw) = (dir.join("syn"), dir.join("raw"));
    let cfg = FixtureConfig {
        classes: ClassMode::Three,
        utterances_per_class: 2,
        duration_s: 7.0,
        video: true,
        raw_dir: Some(raw.clone()),
        seed: 11,
        jobs: 2,
        ..FixtureConfig::default()
    };
    let summary = generate_synthetic_fixture(&syn, &cfg).unwrap();
    assert_eq!((summary.utterances, summary.segments), (6, 18));
    (syn, raw)
}

#[test]
fn raw_corpus_preprocesses_into_the_same_layout_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (syn, raw) = raw_corpus(dir.path());
    let out = dir.path().join("out");
    let cfg = PreprocessConfig::default();

    let first = preprocess_corpus(&raw, &out, &cfg, 3).unwrap();
    assert_eq!((first.utterances, first.written, first.skipped), (6, 18, 0));
    assert!(first.failed.is_empty());
    assert_eq!(files(&out), files(&syn));

    let before: Vec<Vec<u8>> = files(&out).iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
    let again = preprocess_corpus(&raw, &out, &cfg, 3).unwrap();
    assert_eq!((again.written, again.skipped), (0, 18));
    let after: Vec<Vec<u8>> = files(&out).iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
    assert_eq!(before, after);

    let forced = preprocess_corpus(&raw, &out, &PreprocessConfig { force: true, ..cfg }, 1).unwrap();
    assert_eq!((forced.written, forced.skipped), (18, 0));
    let rewritten: Vec<Vec<u8>> = files(&out).iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
    assert_eq!(before, rewritten);

    let m = build_manifest(&out, SegmentSpec::Ds2, Modality::AudioVideo).unwrap();
    assert_eq!(m.len(), 18);
    assert_eq!(m.utterances(None).len(), 6);
    for e in &m.examples {
        assert_eq!(spectrogram_tensor::<f32>(&out, e).unwrap().shape(), &[3, 200, 300]);
        assert_eq!(clip_tensor::<f32>(&out, e).unwrap().shape(), &[3, 20, 100, 60]);
    }
}

#[test]
fn segment_spec_must_match_the_preprocessed_root() {
    let dir = tempfile::tempdir().unwrap();
    let (syn, _) = raw_corpus(dir.path());
    assert!(build_manifest(&syn, SegmentSpec::Ds4, Modality::Audio).is_err());
}

#[test]
fn unclipped_specs_keep_one_segment_per_utterance() {
    let dir = tempfile::tempdir().unwrap();
    let (_, raw) = raw_corpus(dir.path());
    let out = dir.path().join("ds3");
    let cfg = PreprocessConfig { segment: SegmentSpec::Ds3, ..PreprocessConfig::default() };
    let s = preprocess_corpus(&raw, &out, &cfg, 2).unwrap();
    assert_eq!(s.written, 6);
    let m = build_manifest(&out, SegmentSpec::Ds3, Modality::AudioVideo).unwrap();
    assert!(m.examples.iter().all(|e| e.segment_index == 0));
}

#[test]
fn broken_utterances_are_reported_without_stopping_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (_, raw) = raw_corpus(dir.path());
    let victim = fs::read_dir(raw.join(AUDIO_DIR)).unwrap().next().unwrap().unwrap().path();
    fs::write(&victim, b"not a wav").unwrap();
    let s = preprocess_corpus(&raw, &dir.path().join("out"), &PreprocessConfig::default(), 2).unwrap();
    assert_eq!(s.failed.len(), 1);
    assert_eq!(s.failed[0].0, victim.file_stem().unwrap().to_string_lossy());
    assert_eq!(s.written, 15);
}

#[test]
fn missing_raw_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = preprocess_corpus(&dir.path().join("nope"), &dir.path().join("out"), &PreprocessConfig::default(), 1);
    assert!(err.is_err());
}
