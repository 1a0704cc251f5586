use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::{PersistenceDiagram, PersistencePoint};
use crate::neural::keyed_rng;

/// A tight group of low-persistence points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthCluster {
    pub birth: f64,
    /// Births are uniform in `birth ± birth_spread`.
    pub birth_spread: f64,
    /// Persistences are uniform in this closed range.
    pub persistence: (f64, f64),
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthClass {
    pub name: String,
    /// (birth, persistence) of the feature every member carries.
    pub anchor: (f64, f64),
    #[serde(default = "default_noise")]
    pub n_noise: usize,
    /// Noise persistences are uniform in (0, bound].
    pub noise_bound: f64,
    #[serde(default = "default_birth_range")]
    pub noise_birth: (f64, f64),
    #[serde(default)]
    pub cluster: Option<SynthCluster>,
}

fn default_noise() -> usize {
    100
}

fn default_birth_range() -> (f64, f64) {
    (0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    pub per_class: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// Two classes with distinct high-persistence anchors over near-diagonal
    /// noise; noise persistence is at most 15% of the smaller anchor's.
    pub fn two_class(seed: u64) -> Self {
        let class = |name: &str, anchor| SynthClass {
            name: name.into(),
            anchor,
            n_noise: 100,
            noise_bound: 0.075,
            noise_birth: (0.0, 1.0),
            cluster: None,
        };
        Self {
            classes: vec![class("A", (0.25, 0.75)), class("B", (0.75, 0.5))],
            per_class: 50,
            seed,
        }
    }

    /// Both classes share one anchor; they differ only in where a small
    /// low-persistence cluster sits.
    pub fn shared_anchor(seed: u64) -> Self {
        let class = |name: &str, birth| SynthClass {
            name: name.into(),
            anchor: (0.5, 0.7),
            n_noise: 100,
            noise_bound: 0.075,
            noise_birth: (0.0, 1.0),
            cluster: Some(SynthCluster {
                birth,
                birth_spread: 0.02,
                persistence: (0.002, 0.01),
                n_points: 20,
            }),
        };
        Self {
            classes: vec![class("left", 0.2), class("right", 0.8)],
            per_class: 50,
            seed,
        }
    }

    pub fn named(name: &str, seed: u64) -> Result<Self> {
        match name {
            "default" | "two-class" => Ok(Self::two_class(seed)),
            "shared-anchor" => Ok(Self::shared_anchor(seed)),
            other => Err(Error::invalid(format!(
                "unknown synthetic set '{other}' (expected default or shared-anchor)"
            ))),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.classes.is_empty() || self.per_class == 0 {
            return Err(Error::invalid("synthetic spec needs classes and members"));
        }
        for (i, c) in self.classes.iter().enumerate() {
            let ok = c.anchor.1 > 0.0
                && c.noise_bound > 0.0
                && c.noise_birth.0 <= c.noise_birth.1
                && [c.anchor.0, c.anchor.1, c.noise_bound, c.noise_birth.0, c.noise_birth.1]
                    .iter()
                    .all(|v| v.is_finite());
            if !ok {
                return Err(Error::invalid(format!("class '{}' has invalid parameters", c.name)));
            }
            if let Some(cl) = &c.cluster {
                if !(cl.birth_spread >= 0.0 && 0.0 <= cl.persistence.0 && cl.persistence.0 <= cl.persistence.1) {
                    return Err(Error::invalid(format!("class '{}' has an invalid cluster", c.name)));
                }
            }
            if self.classes[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::invalid(format!("duplicate class name '{}'", c.name)));
            }
            let same_anchor = self.classes[..i].iter().any(|o| o.anchor == c.anchor);
            if same_anchor && c.cluster.is_none() {
                return Err(Error::invalid(format!(
                    "class '{}' repeats another anchor and has no cluster to tell it apart",
                    c.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub classes: Vec<String>,
    pub diagrams: Vec<PersistenceDiagram>,
    pub labels: Vec<usize>,
}

fn point(b: f64, p: f64) -> PersistencePoint {
    PersistencePoint::ordinary(b, b + p)
}

/// Diagrams grouped by class; member `i` of class `k` draws from a stream
/// keyed by `(seed, k, i)`.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.check()?;
    let mut diagrams = Vec::new();
    let mut labels = Vec::new();
    for (k, class) in spec.classes.iter().enumerate() {
        for i in 0..spec.per_class {
            let mut rng = keyed_rng(spec.seed, k as u64, i as u64);
            let mut points = vec![point(class.anchor.0, class.anchor.1)];
            let (b0, b1) = class.noise_birth;
            for _ in 0..class.n_noise {
                let b = b0 + (b1 - b0) * rng.random::<f64>();
                let p = class.noise_bound * (1.0 - rng.random::<f64>());
                points.push(point(b, p));
            }
            if let Some(cl) = &class.cluster {
                for _ in 0..cl.n_points {
                    let b = cl.birth + cl.birth_spread * (2.0 * rng.random::<f64>() - 1.0);
                    let p = cl.persistence.0 + (cl.persistence.1 - cl.persistence.0) * rng.random::<f64>();
                    points.push(point(b, p));
                }
            }
            diagrams.push(PersistenceDiagram::new(points, format!("{}/{i:04}", class.name)));
            labels.push(k);
        }
    }
    Ok(SynthDataset {
        classes: spec.classes.iter().map(|c| c.name.clone()).collect(),
        diagrams,
        labels,
    })
}
