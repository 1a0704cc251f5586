//! Deep metric model over persistence images: CNN embedding, triplet
//! training and a prototype classification head.

mod adam;
mod arch;
mod check;
pub mod head;
mod loss;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use arch::ArchitectureSpec;
pub use check::{grad_check_suite, small_architecture, triplet_check, GradCheckSuite, SuiteReport, SuiteRow};
pub use loss::{distance, triplet_loss, DistanceMode, TripletLoss};
pub use train::{sample_partners, sample_triplet, train, Dataset, TrainConfig, TrainHistory, Triplet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::PersistenceDiagram;
use crate::neural::{Network, Tensor};
use crate::vectorize::{persistence_image_channels, PersistenceImage, PersistenceImageSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyMode {
    Prototype,
    Knn(usize),
}

impl std::str::FromStr for ClassifyMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "prototype" {
            return Ok(ClassifyMode::Prototype);
        }
        let k = s
            .strip_prefix("knn")
            .map(|r| r.trim_start_matches([':', '=', '(']).trim_end_matches(')'))
            .ok_or_else(|| format!("unknown classifier '{s}' (expected prototype or knn:K)"))?;
        let k: usize = if k.is_empty() { 1 } else { k.parse().map_err(|_| format!("bad k in '{s}'"))? };
        if k == 0 {
            return Err("k must be positive".into());
        }
        Ok(ClassifyMode::Knn(k))
    }
}

/// A trained (or freshly initialised) model together with the persistence
/// image spec it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub arch: ArchitectureSpec,
    pub image_spec: PersistenceImageSpec,
    /// Two input channels: upward pairs and extended/relative pairs.
    pub split_extended: bool,
    pub classes: Vec<String>,
    pub network: Network,
    pub prototypes: Vec<Vec<f64>>,
    pub temperature: f64,
    pub train_embeddings: Vec<Vec<f64>>,
    pub train_labels: Vec<usize>,
}

impl ModelParams {
    pub fn init(
        arch: ArchitectureSpec,
        image_spec: PersistenceImageSpec,
        split_extended: bool,
        classes: Vec<String>,
        seed: u64,
    ) -> Result<Self> {
        image_spec.check()?;
        let expected = if split_extended { 2 } else { 1 };
        if arch.input_channels != expected {
            return Err(Error::invalid(format!(
                "architecture expects {} input channels, images have {expected}",
                arch.input_channels
            )));
        }
        if arch.input_size != (image_spec.n_y, image_spec.n_x) {
            return Err(Error::invalid("architecture input size differs from the image resolution"));
        }
        let network = Network::init(&arch.layer_specs()?, seed);
        Ok(Self {
            arch,
            image_spec,
            split_extended,
            classes,
            network,
            prototypes: Vec::new(),
            temperature: 0.1,
            train_embeddings: Vec::new(),
            train_labels: Vec::new(),
        })
    }

    pub fn check(&self) -> Result<()> {
        self.arch.check()?;
        self.image_spec.check()?;
        let specs = self.arch.layer_specs()?;
        let reference = Network::zeros(&specs);
        if reference.layers.len() != self.network.layers.len()
            || reference
                .params()
                .zip(self.network.params())
                .any(|(a, b)| a.dims() != b.dims())
        {
            return Err(Error::shape("network parameters do not match the architecture"));
        }
        let dim = self.arch.embedding_dim;
        if !self.prototypes.is_empty() && self.prototypes.len() != self.classes.len() {
            return Err(Error::shape("one prototype per class required"));
        }
        if self.prototypes.iter().chain(&self.train_embeddings).any(|p| p.len() != dim) {
            return Err(Error::shape("stored embedding has the wrong length"));
        }
        if self.train_embeddings.len() != self.train_labels.len()
            || self.train_labels.iter().any(|&l| l >= self.classes.len())
        {
            return Err(Error::shape("training labels inconsistent"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        Ok(())
    }

    /// Network input for a diagram: unweighted persistence image channels.
    pub fn input_for(&self, d: &PersistenceDiagram) -> Result<Tensor> {
        let images = persistence_image_channels(d, &self.image_spec, self.split_extended)?;
        self.input_from_images(&images)
    }

    pub fn input_from_images(&self, images: &[PersistenceImage]) -> Result<Tensor> {
        if images.len() != self.arch.input_channels {
            return Err(Error::shape(format!(
                "model takes {} channel(s), got {}",
                self.arch.input_channels,
                images.len()
            )));
        }
        if let Some(im) = images.iter().find(|im| im.spec != self.image_spec) {
            return Err(Error::invalid(format!(
                "image spec ({}x{}, sigma {}) does not match the model's ({}x{}, sigma {})",
                im.spec.n_x, im.spec.n_y, im.spec.sigma, self.image_spec.n_x, self.image_spec.n_y, self.image_spec.sigma
            )));
        }
        let data = images.iter().flat_map(|im| im.pixels.iter().copied()).collect();
        Tensor::new(vec![images.len(), self.image_spec.n_y, self.image_spec.n_x], data)
    }

    /// Eval-mode embedding.
    pub fn embed_input(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.network.infer(x)?.into_data())
    }

    pub fn embed(&self, images: &[PersistenceImage]) -> Result<Vec<f64>> {
        self.embed_input(&self.input_from_images(images)?)
    }

    fn require_prototypes(&self) -> Result<()> {
        if self.prototypes.is_empty() {
            return Err(Error::invalid("model has no fitted prototypes"));
        }
        Ok(())
    }

    pub fn scores_of_embedding(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.require_prototypes()?;
        Ok(head::scores(e, &self.prototypes, self.temperature))
    }

    pub fn class_scores(&self, images: &[PersistenceImage]) -> Result<Vec<f64>> {
        self.scores_of_embedding(&self.embed(images)?)
    }

    pub fn classify_embedding(&self, e: &[f64], mode: ClassifyMode) -> Result<usize> {
        match mode {
            ClassifyMode::Prototype => Ok(head::argmax(&self.scores_of_embedding(e)?)),
            ClassifyMode::Knn(k) => {
                if self.train_embeddings.is_empty() {
                    return Err(Error::invalid("model stores no training embeddings"));
                }
                Ok(head::knn_label(e, &self.train_embeddings, &self.train_labels, self.classes.len(), k))
            }
        }
    }

    pub fn classify(&self, images: &[PersistenceImage], mode: ClassifyMode) -> Result<usize> {
        self.classify_embedding(&self.embed(images)?, mode)
    }

    /// Embeds `inputs` and refits prototypes and the k-NN reference set.
    pub fn fit_head(&mut self, inputs: &[Tensor], labels: &[usize]) -> Result<()> {
        use rayon::prelude::*;
        let embeddings: Vec<Vec<f64>> = inputs
            .par_iter()
            .map(|x| self.embed_input(x))
            .collect::<Result<_>>()?;
        self.prototypes = head::fit_prototypes(&embeddings, labels, self.classes.len())?;
        self.train_embeddings = embeddings;
        self.train_labels = labels.to_vec();
        Ok(())
    }
}
