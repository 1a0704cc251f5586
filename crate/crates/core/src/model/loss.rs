use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// `1 - cos(x, y)`.
    #[default]
    Cosine,
    SquaredEuclidean,
}

impl std::str::FromStr for DistanceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cosine" => Ok(DistanceMode::Cosine),
            "squared_euclidean" => Ok(DistanceMode::SquaredEuclidean),
            other => Err(format!("unknown distance mode '{other}'")),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Distance and its gradients with respect to both arguments.
pub fn distance(x: &[f64], y: &[f64], mode: DistanceMode) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("embedding lengths differ: {} vs {}", x.len(), y.len())));
    }
    match mode {
        DistanceMode::SquaredEuclidean => {
            let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let d = diff.iter().map(|v| v * v).sum();
            let gx: Vec<f64> = diff.iter().map(|v| 2.0 * v).collect();
            let gy = gx.iter().map(|v| -v).collect();
            Ok((d, gx, gy))
        }
        DistanceMode::Cosine => {
            let (nx, ny) = (norm(x), norm(y));
            if nx == 0.0 || ny == 0.0 {
                return Err(Error::invalid("cosine distance is undefined for a zero embedding"));
            }
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let cos = dot / (nx * ny);
            // d cos / dx = y/(|x||y|) - cos x/|x|^2
            let gx = x.iter().zip(y).map(|(a, b)| -(b / (nx * ny) - cos * a / (nx * nx))).collect();
            let gy = x.iter().zip(y).map(|(a, b)| -(a / (nx * ny) - cos * b / (ny * ny))).collect();
            Ok((1.0 - cos, gx, gy))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripletLoss {
    /// `max(d(T,P) - d(T,N) + margin, 0)`.
    pub hinge: f64,
    /// `reg * (|eT|^2 + |eP|^2 + |eN|^2)`.
    pub regularizer: f64,
    /// Gradients with respect to target, positive, negative.
    pub grads: [Vec<f64>; 3],
}

impl TripletLoss {
    pub fn total(&self) -> f64 {
        self.hinge + self.regularizer
    }
}

pub fn triplet_loss(
    target: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
    mode: DistanceMode,
    reg: f64,
) -> Result<TripletLoss> {
    let (dp, gtp, gp) = distance(target, positive, mode)?;
    let (dn, gtn, gn) = distance(target, negative, mode)?;
    let raw = dp - dn + margin;
    let active = raw > 0.0;
    let hinge = raw.max(0.0);
    let n = target.len();
    let mut grads = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    if active {
        for i in 0..n {
            grads[0][i] = gtp[i] - gtn[i];
            grads[1][i] = gp[i];
            grads[2][i] = -gn[i];
        }
    }
    let mut regularizer = 0.0;
    if reg != 0.0 {
        for (g, e) in grads.iter_mut().zip([target, positive, negative]) {
            regularizer += reg * e.iter().map(|v| v * v).sum::<f64>();
            for (gi, ei) in g.iter_mut().zip(e) {
                *gi += 2.0 * reg * ei;
            }
        }
    }
    Ok(TripletLoss {
        hinge,
        regularizer,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQ: DistanceMode = DistanceMode::SquaredEuclidean;

    #[test]
    fn satisfied_triplet_has_zero_loss() {
        let l = triplet_loss(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], 0.1, SQ, 0.0).unwrap();
        assert_eq!(l.total(), 0.0);
        assert!(l.grads.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn violated_triplet() {
        let l = triplet_loss(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], 0.1, SQ, 0.0).unwrap();
        assert!((l.total() - 2.1).abs() < 1e-15);
    }

    #[test]
    fn collapsed_embeddings_cost_the_margin() {
        let e = [0.3, -0.7, 1.1];
        for mode in [SQ, DistanceMode::Cosine] {
            let l = triplet_loss(&e, &e, &e, 0.1, mode, 0.0).unwrap();
            assert!((l.total() - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn cosine_rejects_zero_vectors() {
        assert!(triplet_loss(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], 0.1, DistanceMode::Cosine, 0.0).is_err());
    }

    #[test]
    fn regularizer_adds_squared_norms() {
        let l = triplet_loss(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 2.0], 0.1, SQ, 0.5).unwrap();
        assert_eq!(l.hinge, 0.0);
        assert!((l.regularizer - 0.5 * (1.0 + 1.0 + 4.0)).abs() < 1e-15);
        assert_eq!(l.grads[2], vec![0.0, 2.0]);
    }
}
