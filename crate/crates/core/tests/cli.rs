//! Every subcommand run twice in fresh directories must produce identical
//! bytes on stdout and in every file it writes.

mod common;

use std::process::Command;

use common::cli_flow::{fixtures, run, workflow, BIN};

#[test]
fn every_subcommand_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (out_a, files_a) = workflow(a.path());
    let (out_b, files_b) = workflow(b.path());
    assert_eq!(files_a.keys().collect::<Vec<_>>(), files_b.keys().collect::<Vec<_>>());
    for (name, bytes) in &files_a {
        assert!(bytes == &files_b[name], "{name} differs between runs");
    }
    for (i, (x, y)) in out_a.iter().zip(&out_b).enumerate() {
        assert_eq!(String::from_utf8_lossy(x), String::from_utf8_lossy(y), "stdout of step {i}");
    }
    for f in ["model.bin", "field.png", "overlay.png", "inimage.png", "img2.bin", "data/manifest.json"] {
        assert!(files_a.contains_key(f), "{f} missing");
    }
}

#[test]
fn seed_changes_model() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        fixtures(d);
        run(d, &["synth", "--name", "default", "--per-class", "6", "-o", "data"]);
    }
    run(a.path(), &["train", "data/manifest.json", "-o", "m.bin"]);
    let out = Command::new(BIN)
        .args(["train", "data/manifest.json", "-o", "m.bin", "--seed", "4", "--config", "small.toml"])
        .current_dir(b.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_ne!(std::fs::read(a.path().join("m.bin")).unwrap(), std::fs::read(b.path().join("m.bin")).unwrap());
}

#[test]
fn bad_input_exits_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "birth,death\n1,x\n").unwrap();
    let out = Command::new(BIN).args(["betti", "bad.csv"]).current_dir(dir.path()).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.csv") && err.contains("line 2"), "{err}");
}
