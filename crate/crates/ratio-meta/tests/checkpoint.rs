use ratio_meta::{
    load_checkpoint, save_checkpoint, ArchMeta, FeatureNorm, RatioModel, RatioMetaError,
};

fn model() -> RatioModel {
    let mut m = RatioModel::init(5, ArchMeta::with_size(16, 3), 0xabcd).unwrap();
    m.set_normalization(FeatureNorm {
        mean: vec![0.1, -0.2, 0.3, 0.0, 1.5],
        std: vec![1.0, 2.0, 0.5, 1.0, 3.0],
    })
    .unwrap();
    m
}

#[test]
fn round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let original = model();
    save_checkpoint(&original, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, original);

    // Saving the loaded model reproduces the same bytes.
    let path2 = dir.path().join("model2.ckpt");
    save_checkpoint(&loaded, &path2).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&path2).unwrap()
    );
}

#[test]
fn truncated_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model(), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    match load_checkpoint(&path) {
        Err(RatioMetaError::CheckpointCorrupt(_)) => {}
        other => panic!("expected corrupt-checkpoint error, got {other:?}"),
    }
}

#[test]
fn version_mismatch_is_explicit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model(), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let bumped = text.replace("\"format_version\": 1", "\"format_version\": 2");
    assert_ne!(text, bumped, "version field must be present to rewrite");
    std::fs::write(&path, bumped).unwrap();
    match load_checkpoint(&path) {
        Err(RatioMetaError::CheckpointVersion { found: 2, supported: 1 }) => {}
        other => panic!("expected version-mismatch error, got {other:?}"),
    }
}

#[test]
fn missing_file_is_io_error() {
    match load_checkpoint(std::path::Path::new("/nonexistent/model.ckpt")) {
        Err(RatioMetaError::Io(_)) => {}
        other => panic!("expected io error, got {other:?}"),
    }
}
