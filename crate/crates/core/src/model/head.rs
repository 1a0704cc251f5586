//! Prototype head: class probabilities from cosine similarity to per-class
//! mean embeddings, softmaxed at temperature tau.

use crate::error::{Error, Result};

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / (nx * ny)
}

/// L2-normalised mean embedding of each class.
pub fn fit_prototypes(embeddings: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Vec<Vec<f64>>> {
    if embeddings.len() != labels.len() {
        return Err(Error::shape("one label per embedding"));
    }
    let dim = embeddings.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (e, &l) in embeddings.iter().zip(labels) {
        if l >= n_classes {
            return Err(Error::invalid(format!("label {l} out of range")));
        }
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(e) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .enumerate()
        .map(|(k, (s, c))| {
            if c == 0 {
                return Err(Error::invalid(format!("class {k} has no members")));
            }
            let n = norm(&s);
            if n <= f64::EPSILON * c as f64 {
                return Err(Error::invalid(format!("class {k} embeddings cancel out; prototype undefined")));
            }
            Ok(s.iter().map(|v| v / n).collect())
        })
        .collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

pub fn scores(embedding: &[f64], prototypes: &[Vec<f64>], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = prototypes.iter().map(|p| cosine(embedding, p) / temperature).collect();
    softmax(&logits)
}

/// Probabilities and the gradient of probability `k` with respect to the embedding.
pub fn score_gradient(embedding: &[f64], prototypes: &[Vec<f64>], temperature: f64, k: usize) -> (Vec<f64>, Vec<f64>) {
    let probs = scores(embedding, prototypes, temperature);
    let ne = norm(embedding);
    let mut grad = vec![0.0; embedding.len()];
    if ne == 0.0 {
        return (probs, grad);
    }
    for (j, proto) in prototypes.iter().enumerate() {
        let dyk_dsj = probs[k] * (if j == k { 1.0 } else { 0.0 } - probs[j]);
        if dyk_dsj == 0.0 {
            continue;
        }
        let np = norm(proto);
        let cos = cosine(embedding, proto);
        for (g, (e, p)) in grad.iter_mut().zip(embedding.iter().zip(proto)) {
            let dcos = p / (ne * np) - cos * e / (ne * ne);
            *g += dyk_dsj * dcos / temperature;
        }
    }
    (probs, grad)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Majority label among the `k` nearest reference embeddings by cosine
/// similarity. Vote ties go to the lowest class index.
pub fn knn_label(embedding: &[f64], refs: &[Vec<f64>], labels: &[usize], n_classes: usize, k: usize) -> usize {
    let mut order: Vec<(f64, usize)> = refs
        .iter()
        .enumerate()
        .map(|(i, r)| (cosine(embedding, r), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut votes = vec![0.0; n_classes];
    for &(_, i) in order.iter().take(k.max(1)) {
        votes[labels[i]] += 1.0;
    }
    argmax(&votes)
}
