//! End-to-end experiment: split, vectorize, train, evaluate.

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::PersistenceDiagram;
use crate::model::{train, ArchitectureSpec, ClassifyMode, Dataset, ModelParams, TrainConfig, TrainHistory};
use crate::vectorize::{persistence_image_channels, Extents, PersistenceImageSpec, Weight};

/// Labeled diagrams with class names.
#[derive(Clone, Debug, Default)]
pub struct LabeledDiagrams {
    pub diagrams: Vec<PersistenceDiagram>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
}

impl LabeledDiagrams {
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            diagrams: idx.iter().map(|&i| self.diagrams[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
        }
    }
}

/// How persistence images are laid out for a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageOptions {
    pub resolution: (usize, usize),
    pub sigma: f64,
    /// `None` derives extents from the training diagrams.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extents: Option<Extents>,
}

impl Default for ImageOptions {
    fn default() -> Self {
        Self {
            resolution: (40, 40),
            sigma: 0.1,
            extents: None,
        }
    }
}

impl ImageOptions {
    /// Unweighted spec; automatic extents are the training bounding box
    /// padded by 3 sigma.
    pub fn spec_for(&self, train: &[PersistenceDiagram]) -> Result<PersistenceImageSpec> {
        let extents = match self.extents {
            Some(e) => e,
            None => Extents::bounding(train, 3.0 * self.sigma)?,
        };
        PersistenceImageSpec::new(self.resolution.0, self.resolution.1, extents, self.sigma, Weight::Uniform)
    }
}

/// Network inputs for `diagrams` under the model's image spec.
pub fn model_inputs(model: &ModelParams, diagrams: &[PersistenceDiagram]) -> Result<Vec<crate::neural::Tensor>> {
    diagrams.par_iter().map(|d| model.input_for(d)).collect()
}

/// Builds and trains a model on `data`.
pub fn fit(
    data: &LabeledDiagrams,
    arch: &ArchitectureSpec,
    cfg: &TrainConfig,
    images: &ImageOptions,
) -> Result<(ModelParams, TrainHistory)> {
    let spec = images.spec_for(&data.diagrams)?;
    let split_extended = data.diagrams.iter().any(PersistenceDiagram::has_extended);
    let mut arch = arch.clone();
    arch.input_channels = if split_extended { 2 } else { 1 };
    arch.input_size = (spec.n_y, spec.n_x);
    let mut model = ModelParams::init(arch, spec, split_extended, data.classes.clone(), cfg.seed)?;
    let inputs = model_inputs(&model, &data.diagrams)?;
    let dataset = Dataset {
        inputs,
        labels: data.labels.clone(),
        classes: data.classes.clone(),
    };
    let history = train(&mut model, &dataset, cfg)?;
    Ok((model, history))
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

pub fn predict(model: &ModelParams, diagrams: &[PersistenceDiagram], mode: ClassifyMode) -> Result<Vec<usize>> {
    diagrams
        .par_iter()
        .map(|d| model.classify_embedding(&model.embed_input(&model.input_for(d)?)?, mode))
        .collect()
}

/// 1-NN in Euclidean distance between fixed-weight persistence images.
pub fn fixed_weight_knn(
    train: &LabeledDiagrams,
    test: &[PersistenceDiagram],
    weight: Weight,
    images: &ImageOptions,
) -> Result<Vec<usize>> {
    let mut spec = images.spec_for(&train.diagrams)?;
    spec.weight = weight;
    let split = train.diagrams.iter().any(PersistenceDiagram::has_extended);
    let vectorize = |d: &PersistenceDiagram| -> Result<Vec<f64>> {
        Ok(persistence_image_channels(d, &spec, split)?
            .into_iter()
            .flat_map(|im| im.pixels)
            .collect())
    };
    let refs: Vec<Vec<f64>> = train.diagrams.par_iter().map(vectorize).collect::<Result<_>>()?;
    test.par_iter()
        .map(|d| {
            let v = vectorize(d)?;
            let mut best = (f64::INFINITY, 0);
            for (i, r) in refs.iter().enumerate() {
                let dist: f64 = v.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best.0 {
                    best = (dist, i);
                }
            }
            Ok(train.labels[best.1])
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalWeight {
    Learned,
    Persistence,
    Uniform,
}

impl std::str::FromStr for EvalWeight {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "learned" => Ok(EvalWeight::Learned),
            "persistence" => Ok(EvalWeight::Persistence),
            "uniform" => Ok(EvalWeight::Uniform),
            other => Err(format!("unknown weight '{other}' (expected learned, persistence or uniform)")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub weight: EvalWeight,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
}

/// Stratified split, then either train the metric model or run the fixed
/// weight 1-NN baseline, and report test accuracy.
pub fn evaluate(
    data: &LabeledDiagrams,
    weight: EvalWeight,
    arch: &ArchitectureSpec,
    cfg: &TrainConfig,
    images: &ImageOptions,
    mode: ClassifyMode,
) -> Result<(EvalReport, Option<ModelParams>)> {
    if data.diagrams.len() != data.labels.len() {
        return Err(Error::shape("one label per diagram required"));
    }
    let (train_idx, test_idx) = crate::io::split(&data.labels, cfg.test_fraction, cfg.seed)?;
    let train_set = data.subset(&train_idx);
    let test_set = data.subset(&test_idx);
    info!("split: {} train, {} test", train_idx.len(), test_idx.len());
    let (predicted, model, history) = match weight {
        EvalWeight::Learned => {
            let (model, history) = fit(&train_set, arch, cfg, images)?;
            (predict(&model, &test_set.diagrams, mode)?, Some(model), Some(history))
        }
        EvalWeight::Persistence | EvalWeight::Uniform => {
            let w = if weight == EvalWeight::Persistence { Weight::Persistence } else { Weight::Uniform };
            (fixed_weight_knn(&train_set, &test_set.diagrams, w, images)?, None, None)
        }
    };
    let report = EvalReport {
        weight,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        accuracy: accuracy(&predicted, &test_set.labels),
        epochs_run: history.as_ref().map_or(0, |h| h.hinge.len()),
        final_loss: history.as_ref().and_then(|h| h.hinge.last().copied()),
    };
    Ok((report, model))
}
