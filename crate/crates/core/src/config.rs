//! Layered run configuration: built-in defaults, then TOML files in order,
//! then `key=value` overrides. Unknown keys are rejected at every layer.
//!
//! ```toml
//! [train]
//! epochs = 30
//! distance = "cosine"
//!
//! [arch]
//! channels = [32, 32, 64, 64, 128, 128]
//!
//! [image]
//! resolution = [40, 40]
//! sigma = 0.1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::{ArchitectureSpec, TrainConfig};
use crate::pipeline::ImageOptions;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub train: TrainConfig,
    pub arch: ArchitectureSpec,
    pub image: ImageOptions,
}

fn merge(base: &mut Table, layer: Table) {
    for (k, v) in layer {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(l)) => merge(b, l),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses `section.key=value`; the value is read as TOML, falling back to a
/// bare string.
fn override_table(spec: &str) -> Result<Table> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override '{spec}' is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let mut path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::invalid(format!("bad override key '{key}'")));
    }
    let last = path.pop().unwrap();
    let mut table = Table::new();
    table.insert(last.to_string(), value);
    for p in path.into_iter().rev() {
        let mut outer = Table::new();
        outer.insert(p.to_string(), Value::Table(table));
        table = outer;
    }
    Ok(table)
}

impl Config {
    pub fn layered(files: &[&Path], overrides: &[String]) -> Result<Self> {
        let mut base = Table::try_from(Config::default()).map_err(|e| Error::Internal(e.to_string()))?;
        for path in files {
            let text = crate::io::read_text(path)?;
            let layer: Table = text.parse().map_err(|e: toml::de::Error| {
                let at = e.span().map(|s| line_col(&text, s.start)).unwrap_or_default();
                Error::parse(path.display().to_string(), at, e.message().to_string())
            })?;
            merge(&mut base, layer);
        }
        for o in overrides {
            merge(&mut base, override_table(o)?);
        }
        let cfg: Config = Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid(format!("configuration: {}", e.message())))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        self.train.check()?;
        self.arch.check()?;
        if self.image.resolution.0 == 0 || self.image.resolution.1 == 0 || !(self.image.sigma > 0.0) {
            return Err(Error::invalid("image resolution and sigma must be positive"));
        }
        if let Some(e) = &self.image.extents {
            e.check()?;
        }
        Ok(())
    }

    /// Effective configuration as TOML, for run logs.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("<unprintable config: {e}>"))
    }
}

fn line_col(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    format!("line {line}, column {col}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.toml");
        let b = dir.path().join("b.toml");
        std::fs::write(&a, "[train]\nepochs = 3\nmargin = 0.2\n[arch]\nembedding_dim = 16\n").unwrap();
        std::fs::write(&b, "[train]\nepochs = 4\n").unwrap();
        let cfg = Config::layered(&[&a, &b], &["train.seed=9".into(), "train.distance=squared_euclidean".into()]).unwrap();
        assert_eq!(cfg.train.epochs, 4);
        assert_eq!(cfg.train.margin, 0.2);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.arch.embedding_dim, 16);
        assert_eq!(cfg.arch.channels, ArchitectureSpec::default().channels);
        assert_eq!(cfg.train.distance, crate::model::DistanceMode::SquaredEuclidean);
        let echoed: Config = toml::from_str(&cfg.echo()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::layered(&[], &["train.epoch=3".into()]).is_err());
        assert!(Config::layered(&[], &["bogus.x=1".into()]).is_err());
        assert!(Config::layered(&[], &["train.epochs=0".into()]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.toml");
        std::fs::write(&a, "[train]\nepochs = = 3\n").unwrap();
        let e = Config::layered(&[&a], &[]).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn extents_override() {
        let cfg = Config::layered(&[], &["image.extents={b_min=0.0,b_max=1.0,p_min=0.0,p_max=2.0}".into()]).unwrap();
        assert_eq!(cfg.image.extents.unwrap().p_max, 2.0);
    }
}
