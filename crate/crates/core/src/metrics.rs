//! Baseline diagram comparisons: p-Wasserstein matching distance and Betti curves.

use crate::error::{Error, Result};
use crate::filtration::{PersistenceDiagram, PersistencePoint};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pairing {
    Points(usize, usize),
    /// Point of the first diagram matched to its diagonal projection.
    FirstToDiagonal(usize),
    /// Point of the second diagram matched to its diagonal projection.
    SecondToDiagonal(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingResult {
    pub cost: f64,
    pub assignment: Vec<Pairing>,
}

/// Euclidean distance from (b, d) to its orthogonal projection on the diagonal.
pub fn diagonal_distance(p: &PersistencePoint) -> f64 {
    (p.death - p.birth).abs() / std::f64::consts::SQRT_2
}

pub fn ground_distance(a: &PersistencePoint, b: &PersistencePoint) -> f64 {
    (a.birth - b.birth).hypot(a.death - b.death)
}

fn canonical_key(d: &PersistenceDiagram) -> Vec<(u64, u64)> {
    d.points.iter().map(|q| (q.birth.to_bits(), q.death.to_bits())).collect()
}

/// Exact p-Wasserstein distance with Euclidean ground metric, solved as an
/// (n+m)x(n+m) assignment problem where each diagram is padded with the other's
/// diagonal projections.
pub fn wasserstein(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: f64) -> Result<MatchingResult> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::invalid(format!("p must be a positive finite number, got {p}")));
    }
    for (name, d) in [("first", d1), ("second", d2)] {
        if d.points.iter().any(|q| !q.is_finite()) {
            return Err(Error::invalid(format!(
                "{name} diagram has points with infinite death; filter essential points first"
            )));
        }
    }
    // solve in a canonical argument order so the result is bitwise symmetric
    if canonical_key(d2) < canonical_key(d1) {
        let mut r = wasserstein(d2, d1, p)?;
        for q in &mut r.assignment {
            *q = match *q {
                Pairing::Points(i, j) => Pairing::Points(j, i),
                Pairing::FirstToDiagonal(i) => Pairing::SecondToDiagonal(i),
                Pairing::SecondToDiagonal(j) => Pairing::FirstToDiagonal(j),
            };
        }
        return Ok(r);
    }
    let (a, b) = (&d1.points, &d2.points);
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    if size == 0 {
        return Ok(MatchingResult {
            cost: 0.0,
            assignment: vec![],
        });
    }
    let mut cost = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            cost[i * size + j] = match (i < n, j < m) {
                (true, true) => ground_distance(&a[i], &b[j]).powf(p),
                (true, false) => {
                    if j - m == i {
                        diagonal_distance(&a[i]).powf(p)
                    } else {
                        f64::INFINITY
                    }
                }
                (false, true) => {
                    if i - n == j {
                        diagonal_distance(&b[j]).powf(p)
                    } else {
                        f64::INFINITY
                    }
                }
                (false, false) => 0.0,
            };
        }
    }
    let rows = hungarian(&cost, size);
    let mut total = 0.0;
    let mut assignment = Vec::new();
    for (i, &j) in rows.iter().enumerate() {
        match (i < n, j < m) {
            (true, true) => {
                total += cost[i * size + j];
                assignment.push(Pairing::Points(i, j));
            }
            (true, false) => {
                total += cost[i * size + j];
                assignment.push(Pairing::FirstToDiagonal(i));
            }
            (false, true) => {
                total += cost[i * size + j];
                assignment.push(Pairing::SecondToDiagonal(j));
            }
            (false, false) => {}
        }
    }
    Ok(MatchingResult {
        cost: total.powf(1.0 / p),
        assignment,
    })
}

/// Minimum-cost perfect assignment on a square matrix (row-major). Infinite
/// entries are forbidden. Returns the column assigned to each row.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // Shortest augmenting path with potentials, 1-based with a virtual column 0.
    let big = cost.iter().filter(|c| c.is_finite()).fold(0.0f64, |a, &c| a.max(c.abs()));
    let forbidden = (big + 1.0) * (n as f64 + 1.0) * 4.0;
    let at = |i: usize, j: usize| {
        let c = cost[(i - 1) * n + (j - 1)];
        if c.is_finite() {
            c
        } else {
            forbidden
        }
    };
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[row_of[j] - 1] = j - 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BettiCurve {
    pub samples: Vec<usize>,
    pub t_min: f64,
    pub t_max: f64,
}

impl BettiCurve {
    /// Sample positions; a single sample sits at `t_min`.
    pub fn positions(&self) -> Vec<f64> {
        sample_positions(self.samples.len(), self.t_min, self.t_max)
    }
}

fn sample_positions(n: usize, t_min: f64, t_max: f64) -> Vec<f64> {
    if n == 1 {
        return vec![t_min];
    }
    let step = (t_max - t_min) / (n - 1) as f64;
    (0..n).map(|i| t_min + step * i as f64).collect()
}

/// Number of `dim`-dimensional features alive at each of `n_samples` evenly
/// spaced values. A feature is alive on [min(b,d), max(b,d)), so points below
/// the diagonal count over the same span as their mirror image.
pub fn betti_curve(d: &PersistenceDiagram, dim: u8, n_samples: usize, t_min: f64, t_max: f64) -> Result<BettiCurve> {
    if n_samples == 0 {
        return Err(Error::invalid("betti curve needs at least one sample"));
    }
    if !(t_min < t_max) {
        return Err(Error::invalid(format!("need t_min < t_max, got [{t_min}, {t_max}]")));
    }
    let samples = sample_positions(n_samples, t_min, t_max)
        .into_iter()
        .map(|t| {
            d.points
                .iter()
                .filter(|p| p.dim == dim)
                .filter(|p| {
                    let (lo, hi) = (p.birth.min(p.death), p.birth.max(p.death));
                    lo <= t && t < hi
                })
                .count()
        })
        .collect();
    Ok(BettiCurve { samples, t_min, t_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_diagrams_cost_nothing() {
        let d = PersistenceDiagram::from_pairs(&[(0.0, 2.0)]);
        assert_eq!(wasserstein(&d, &d, 1.0).unwrap().cost, 0.0);
    }

    #[test]
    fn lone_point_goes_to_diagonal() {
        let d1 = PersistenceDiagram::from_pairs(&[(0.0, 2.0)]);
        let r = wasserstein(&d1, &PersistenceDiagram::default(), 1.0).unwrap();
        assert!((r.cost - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(r.assignment, vec![Pairing::FirstToDiagonal(0)]);
    }

    #[test]
    fn essential_points_are_rejected() {
        let mut d = PersistenceDiagram::from_pairs(&[(0.0, 2.0)]);
        d.points[0].death = f64::INFINITY;
        let err = wasserstein(&d, &d, 1.0).unwrap_err();
        assert!(err.to_string().contains("essential"));
    }

    #[test]
    fn every_point_appears_once() {
        let d1 = PersistenceDiagram::from_pairs(&[(0.0, 2.0), (1.0, 1.1), (3.0, 7.0)]);
        let d2 = PersistenceDiagram::from_pairs(&[(0.1, 2.2), (5.0, 5.5)]);
        let r = wasserstein(&d1, &d2, 2.0).unwrap();
        let mut first = vec![0; 3];
        let mut second = vec![0; 2];
        for p in &r.assignment {
            match *p {
                Pairing::Points(i, j) => {
                    first[i] += 1;
                    second[j] += 1;
                }
                Pairing::FirstToDiagonal(i) => first[i] += 1,
                Pairing::SecondToDiagonal(j) => second[j] += 1,
            }
        }
        assert!(first.iter().chain(&second).all(|&c| c == 1));
    }

    #[test]
    fn hungarian_small() {
        let c = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        assert_eq!(hungarian(&c, 3), vec![1, 0, 2]);
    }

    #[test]
    fn betti_examples() {
        let d = PersistenceDiagram::from_pairs(&[(0.0, 2.0)]);
        let c = betti_curve(&d, 0, 5, 0.0, 2.5).unwrap();
        assert_eq!(c.samples, vec![1, 1, 1, 1, 0]);
        assert_eq!(c.positions(), vec![0.0, 0.625, 1.25, 1.875, 2.5]);
        let d = PersistenceDiagram::from_pairs(&[(0.0, 2.0), (1.0, 3.0)]);
        assert_eq!(betti_curve(&d, 0, 1, 1.5, 2.0).unwrap().samples, vec![2]);
        assert!(betti_curve(&PersistenceDiagram::default(), 0, 4, 0.0, 1.0)
            .unwrap()
            .samples
            .iter()
            .all(|&c| c == 0));
        assert!(betti_curve(&d, 0, 0, 0.0, 1.0).is_err());
        assert!(betti_curve(&d, 0, 3, 1.0, 1.0).is_err());
    }
}
