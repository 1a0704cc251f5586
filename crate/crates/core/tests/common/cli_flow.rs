//! A run of every CLI subcommand in a scratch directory.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use topolens::io::save_grid;
use topolens::ScalarGrid;

pub const BIN: &str = env!("CARGO_BIN_EXE_topolens");

const SMALL: &str = "\
[arch]
channels = [4, 4]
strides = [1, 2]
simam_after = [2]
embedding_dim = 8

[train]
epochs = 2
";

pub fn run(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(BIN)
        .args(args)
        .args(["--seed", "3", "--config", "small.toml"])
        .current_dir(dir)
        .env_remove("TOPOLENS_SEED")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "topolens {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

pub fn fixtures(dir: &Path) {
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
    let values = (0..64).map(|i| ((i * 37) % 23) as f64 + if i % 9 == 0 { 40.0 } else { 0.0 }).collect();
    save_grid(&dir.join("grid.png"), &ScalarGrid::new(8, 8, values).unwrap()).unwrap();
    std::fs::write(dir.join("g.graph"), "5 6\n0 1 3 2 4\n0 1\n1 2\n2 3\n3 0\n1 4\n3 4\n").unwrap();
}

/// Runs the whole workflow in `dir`; returns stdout per step and the bytes
/// of every file written.
pub fn workflow(dir: &Path) -> (Vec<Vec<u8>>, BTreeMap<String, Vec<u8>>) {
    fixtures(dir);
    let steps: &[&[&str]] = &[
        &["synth", "--per-class", "6", "-o", "data"],
        &["compute-pd", "grid.png", "-o", "grid_pd.csv"],
        &["compute-pd", "g.graph", "-o", "g_pd.csv", "--keep-zero"],
        &["vectorize", "data/A_0000.csv", "-o", "img.bin"],
        &["vectorize", "g.graph", "-o", "img2.bin", "--split-extended", "--weight", "persistence"],
        &["distance", "data/A_0000.csv", "data/B_0001.csv"],
        &["betti", "grid.png", "-o", "betti.csv"],
        &["train", "data/manifest.json", "-o", "model.bin", "--history", "hist.json"],
        &["classify", "--model", "model.bin", "data/A_0000.csv", "data/B_0003.csv"],
        &["classify", "--model", "model.bin", "--mode", "knn:3", "data/A_0002.csv"],
        &["explain", "--model", "model.bin", "data/A_0000.csv", "-o", "field.bin", "--csv", "field.csv"],
        &["render-field", "--model", "model.bin", "--field", "field.bin", "--size", "64x48", "-o", "field.png"],
        &["render-field", "--model", "model.bin", "data/B_0000.csv", "--class", "A", "-o", "f2.ppm"],
        &["render-overlay", "--model", "model.bin", "data/B_0000.csv", "--size", "80x80", "-o", "overlay.png"],
        &["render-inimage", "--model", "model.bin", "grid.png", "--scale", "3", "-o", "inimage.png"],
        &["grad-check", "--seeds", "1", "--per-tensor", "2"],
        &["eval", "--manifest", "data/manifest.json", "--weight", "persistence"],
        &["eval", "--synth", "default", "--weight", "uniform"],
    ];
    let stdout = steps.iter().map(|s| run(dir, s)).collect();
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().display().to_string();
                files.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    (stdout, files)
}
