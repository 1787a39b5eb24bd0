use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

/// target/<profile>, two levels above this test binary.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(crate_dir().join("include/actsense.h")).unwrap();
    for decl in [
        "typedef struct ActsVocabulary ActsVocabulary;",
        "typedef struct ActsClassifier ActsClassifier;",
        "typedef struct ActsEmbeddingStore ActsEmbeddingStore;",
        "ACTS_STATUS_OK = 0,",
        "const char *acts_last_error(void);",
        "void acts_string_free(char *s);",
        "ActsStatus acts_average_precision(",
        "ActsStatus acts_classifier_predict(",
        "ActsStatus acts_embedding_store_get(",
        "ActsStatus acts_parse_generation(",
    ] {
        assert!(header.contains(decl), "header lacks {decl:?}");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = artifact_dir().join("libactsense_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout.trim(), "classes=157 tail=1 range=1 bad=8 ap=0.8333 defined=1");
}
