use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{triplet_loss, DistanceMode};
use super::ModelParams;
use crate::error::{Error, Result};
use crate::neural::{accumulate, keyed_rng, ForwardCtx, Tensor};

const SAMPLING_STREAM: u64 = u64::MAX - 1;
/// Gradient reduction granularity; fixed so results do not depend on the thread count.
const REDUCE_CHUNK: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub margin: f64,
    pub distance: DistanceMode,
    pub epochs: usize,
    /// Stop after this many epochs without a lower training loss. 0 disables.
    pub patience: usize,
    pub seed: u64,
    pub regularizer: f64,
    pub test_fraction: f64,
    pub temperature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            margin: 0.1,
            distance: DistanceMode::Cosine,
            epochs: 30,
            patience: 5,
            seed: 0,
            regularizer: 1e-4,
            test_fraction: 0.1,
            temperature: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.margin > 0.0) || !(self.temperature > 0.0) {
            return Err(Error::invalid("learning rate, margin and temperature must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch size and epochs must be positive"));
        }
        if !(self.regularizer >= 0.0) {
            return Err(Error::invalid("regularizer must be nonnegative"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid("test fraction must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Network inputs with class labels.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn members(&self) -> Result<Vec<Vec<usize>>> {
        if self.inputs.len() != self.labels.len() {
            return Err(Error::shape("one label per input required"));
        }
        let mut members = vec![Vec::new(); self.classes.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            members
                .get_mut(l)
                .ok_or_else(|| Error::invalid(format!("label {l} has no class name")))?
                .push(i);
        }
        if members.len() < 2 {
            return Err(Error::invalid("triplet training needs at least two classes"));
        }
        if let Some(k) = members.iter().position(|m| m.len() < 2) {
            return Err(Error::invalid(format!(
                "class '{}' needs at least two members for triplet sampling",
                self.classes[k]
            )));
        }
        Ok(members)
    }
}

/// Indices into a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub target: usize,
    pub positive: usize,
    pub negative: usize,
}

fn validate_labels(labels: &[usize]) -> Result<Vec<Vec<usize>>> {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let populated: Vec<_> = members.iter().filter(|m| !m.is_empty()).collect();
    if populated.len() < 2 || populated.iter().any(|m| m.len() < 2) {
        return Err(Error::invalid("need at least two classes with at least two members each"));
    }
    Ok(members)
}

/// Random positive and negative partners for a given target.
pub fn sample_partners(labels: &[usize], members: &[Vec<usize>], target: usize, rng: &mut impl Rng) -> Triplet {
    let own = &members[labels[target]];
    let at = own.iter().position(|&i| i == target).expect("target is a member of its class");
    let mut p = rng.random_range(0..own.len() - 1);
    if p >= at {
        p += 1;
    }
    let positive = own[p];
    let others = labels.len() - own.len();
    let mut n = rng.random_range(0..others);
    let mut negative = 0;
    for (k, m) in members.iter().enumerate() {
        if k == labels[target] {
            continue;
        }
        if n < m.len() {
            negative = m[n];
            break;
        }
        n -= m.len();
    }
    Triplet {
        target,
        positive,
        negative,
    }
}

/// Uniform target, then uniform positive and negative partners.
pub fn sample_triplet(labels: &[usize], rng: &mut impl Rng) -> Result<Triplet> {
    let members = validate_labels(labels)?;
    let target = rng.random_range(0..labels.len());
    Ok(sample_partners(labels, &members, target, rng))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean hinge term per epoch.
    pub hinge: Vec<f64>,
    /// Mean hinge plus regularizer per epoch.
    pub total: Vec<f64>,
    pub stopped_early: bool,
}

fn ctx(seed: u64, step: u64, image: usize) -> ForwardCtx {
    ForwardCtx::train(seed, (step << 32) | image as u64)
}

/// One optimisation step over a batch of triplets. Returns the summed hinge and regularizer.
fn train_batch(
    model: &mut ModelParams,
    data: &Dataset,
    batch: &[Triplet],
    cfg: &TrainConfig,
    step: u64,
    adam: &mut AdamState,
) -> Result<(f64, f64)> {
    let mut unique: Vec<usize> = batch.iter().flat_map(|t| [t.target, t.positive, t.negative]).collect();
    unique.sort_unstable();
    unique.dedup();
    let slot = |i: usize| unique.binary_search(&i).expect("member of batch");
    let net = &model.network;
    let embeddings: Vec<Vec<f64>> = unique
        .par_iter()
        .map(|&i| Ok(net.forward(&data.inputs[i], ctx(cfg.seed, step, i))?.output().data().to_vec()))
        .collect::<Result<_>>()?;

    let dim = model.arch.embedding_dim;
    let mut grads = vec![vec![0.0; dim]; unique.len()];
    let (mut hinge, mut reg) = (0.0, 0.0);
    let scale = 1.0 / batch.len() as f64;
    for t in batch {
        let slots = [slot(t.target), slot(t.positive), slot(t.negative)];
        let l = triplet_loss(
            &embeddings[slots[0]],
            &embeddings[slots[1]],
            &embeddings[slots[2]],
            cfg.margin,
            cfg.distance,
            cfg.regularizer,
        )?;
        hinge += l.hinge;
        reg += l.regularizer;
        for (s, g) in slots.iter().zip(&l.grads) {
            for (a, b) in grads[*s].iter_mut().zip(g) {
                *a += b * scale;
            }
        }
    }

    let work: Vec<(usize, &Vec<f64>)> = unique
        .iter()
        .copied()
        .zip(&grads)
        .filter(|(_, g)| g.iter().any(|&v| v != 0.0))
        .collect();
    if work.is_empty() {
        return Ok((hinge, reg));
    }
    let partial: Vec<Vec<Vec<Tensor>>> = work
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut acc = Vec::new();
            for &(i, g) in chunk {
                let trace = net.forward(&data.inputs[i], ctx(cfg.seed, step, i))?;
                let back = net.backward(&trace, &Tensor::from_vec(g.clone()), None)?;
                accumulate(&mut acc, &back.params);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Vec::new();
    for p in &partial {
        accumulate(&mut total, p);
    }
    let flat: Vec<Tensor> = total.into_iter().flatten().collect();
    adam_step(model.network.params_mut(), flat.iter(), adam, &AdamConfig::with_lr(cfg.learning_rate));
    Ok((hinge, reg))
}

/// Trains `model` in place on triplets drawn from `data`, then fits the
/// prototype head on the training embeddings.
pub fn train(model: &mut ModelParams, data: &Dataset, cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.check()?;
    model.check()?;
    let members = data.members()?;
    if data.classes != model.classes {
        return Err(Error::invalid("dataset classes differ from the model's class list"));
    }
    model.temperature = cfg.temperature;
    let mut adam = AdamState::new(model.network.params());
    let mut history = TrainHistory::default();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        let mut rng = keyed_rng(cfg.seed, SAMPLING_STREAM, epoch as u64);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let (mut hinge, mut reg) = (0.0, 0.0);
        for targets in order.chunks(cfg.batch_size) {
            let batch: Vec<Triplet> = targets
                .iter()
                .map(|&t| sample_partners(&data.labels, &members, t, &mut rng))
                .collect();
            let (h, r) = train_batch(model, data, &batch, cfg, step, &mut adam)?;
            hinge += h;
            reg += r;
            step += 1;
        }
        let n = data.len() as f64;
        let (hinge, total) = (hinge / n, (hinge + reg) / n);
        info!("epoch {}: hinge {hinge:.6} total {total:.6}", epoch + 1);
        history.hinge.push(hinge);
        history.total.push(total);
        if total < best {
            best = total;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                history.stopped_early = epoch + 1 < cfg.epochs;
                break;
            }
        }
    }
    model.fit_head(&data.inputs, &data.labels)?;
    Ok(history)
}
