//! Dataset manifest (JSON):
//!
//! ```json
//! {"entries": [{"path": "a/0001.csv", "label": "A"}, ...],
//!  "split_seed": 0, "test_fraction": 0.1}
//! ```
//!
//! Relative paths resolve against the manifest's directory. The input kind
//! follows the extension: `.csv` diagram, `.png`/`.pgm` grid, `.graph`/`.txt`
//! graph.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{load_diagram, load_graph, load_grid, read_text, write_atomic};
use crate::error::{Error, Result};
use crate::filtration::{extended_pd_graph, sublevel_pd0, Connectivity, PersistenceDiagram};
use crate::neural::keyed_rng;

const SPLIT_STREAM: u64 = u64::MAX - 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn default_test_fraction() -> f64 {
    0.1
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let what = path.display().to_string();
        let mut m: Self = serde_json::from_str(&read_text(path)?).map_err(|e| {
            Error::parse(&what, format!("line {}, column {}", e.line(), e.column()), e.to_string())
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut m.entries {
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
        }
        m.check()?;
        Ok(m)
    }

    /// Writes with paths relative to the manifest directory where possible.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut rel = self.clone();
        for e in &mut rel.entries {
            if let Ok(p) = e.path.strip_prefix(base) {
                e.path = p.to_path_buf();
            }
        }
        let mut text = serde_json::to_string_pretty(&rel).map_err(|e| Error::Internal(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn check(&self) -> Result<()> {
        if self.classes().len() < 2 {
            return Err(Error::invalid("manifest needs at least two classes"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid("test fraction must be in (0, 1)"));
        }
        Ok(())
    }

    /// Class names in first-appearance order.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.label) {
                out.push(e.label.clone());
            }
        }
        out
    }

    pub fn labels(&self) -> Vec<usize> {
        let classes = self.classes();
        self.entries
            .iter()
            .map(|e| classes.iter().position(|c| *c == e.label).unwrap())
            .collect()
    }

    pub fn load_diagrams(&self, connectivity: Connectivity) -> Result<Vec<PersistenceDiagram>> {
        use rayon::prelude::*;
        self.entries
            .par_iter()
            .map(|e| load_input(&e.path, connectivity))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    Diagram,
    Grid,
    Graph,
}

impl InputKind {
    pub fn of_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(InputKind::Diagram),
            Some("png" | "pgm") => Ok(InputKind::Grid),
            Some("graph" | "txt") => Ok(InputKind::Graph),
            _ => Err(Error::invalid(format!(
                "{}: cannot tell the input kind (expected .csv, .png, .pgm, .graph or .txt)",
                path.display()
            ))),
        }
    }
}

/// Diagram of any supported input: read directly, or computed from a grid
/// (sublevel 0D) or a graph (extended).
pub fn load_input(path: &Path, connectivity: Connectivity) -> Result<PersistenceDiagram> {
    let mut d = match InputKind::of_path(path)? {
        InputKind::Diagram => load_diagram(path)?,
        InputKind::Grid => sublevel_pd0(&load_grid(path)?, connectivity)?.0,
        InputKind::Graph => extended_pd_graph(&load_graph(path)?)?,
    };
    d.source_id = path.display().to_string();
    Ok(d)
}

/// Stratified split: in each class `round(n * test_fraction)` members (at
/// least one, at most n - 1) go to test. Returns sorted (train, test) indices.
pub fn split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test fraction must be in (0, 1)"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for k in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::invalid(format!("class {k} has a single member and cannot be split")));
        }
        members.shuffle(&mut keyed_rng(seed, SPLIT_STREAM, k as u64));
        let n_test = ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ninety_ten_per_class() {
        let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let (train, test) = split(&labels, 0.1, 3).unwrap();
        assert_eq!(train.len(), 180);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 0).count(), 10);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 10);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
        assert_eq!(split(&labels, 0.1, 3).unwrap(), (train, test));
        assert!(split(&[0, 0, 1], 0.1, 0).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = DatasetManifest {
            entries: vec![
                ManifestEntry { path: dir.path().join("a.csv"), label: "x".into() },
                ManifestEntry { path: dir.path().join("sub/b.csv"), label: "y".into() },
            ],
            split_seed: 2,
            test_fraction: 0.1,
        };
        let p = dir.path().join("manifest.json");
        m.save(&p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().contains("\"sub/b.csv\""));
        assert_eq!(DatasetManifest::load(&p).unwrap(), m);
        std::fs::write(&p, "{\"entries\": [], \"bogus\": 1}").unwrap();
        assert!(DatasetManifest::load(&p).is_err());
    }
}
