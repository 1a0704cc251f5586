//! Reference implementations used as test oracles. Each is written
//! independently of the library code it checks: brute force where possible.

#![allow(dead_code)]

pub mod cli_flow;

use rand::Rng;
use topolens::filtration::Connectivity;
use topolens::{FilteredGraph, PersistenceDiagram, PersistencePoint, PointKind, ScalarGrid};

/// Cells of `{f <= level}` grouped into connected components by flood fill.
fn components_at(grid: &ScalarGrid, level: f64, conn: Connectivity) -> Vec<Vec<usize>> {
    let (w, h) = (grid.width(), grid.height());
    let inside = |c: usize| grid.value(c) <= level;
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if seen[start] || !inside(start) {
            continue;
        }
        let mut comp = vec![];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(c) = stack.pop() {
            comp.push(c);
            let (x, y) = ((c % w) as i64, (c / w) as i64);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if (dx, dy) == (0, 0) || (conn == Connectivity::Four && dx != 0 && dy != 0) {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if !seen[n] && inside(n) {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// 0D sublevel diagram by flood-filling `{f <= t}` at every distinct level and
/// tracking which earlier components each new component swallows. A
/// component is named by its oldest cell in (value, index) order; when
/// several meet, all but the oldest die at the current level.
pub fn flood_fill_pd0(grid: &ScalarGrid, conn: Connectivity) -> PersistenceDiagram {
    let mut levels: Vec<f64> = grid.values().to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let older = |a: usize, b: usize| (grid.value(a), a).partial_cmp(&(grid.value(b), b)).unwrap().is_lt();
    // oldest cell of each component alive after the previous level
    let mut alive: Vec<usize> = Vec::new();
    let mut points = Vec::new();
    for &level in &levels {
        let comps = components_at(grid, level, conn);
        let mut next = Vec::new();
        for comp in &comps {
            let mut roots: Vec<usize> = alive.iter().copied().filter(|r| comp.contains(r)).collect();
            let oldest_cell = comp.iter().copied().fold(comp[0], |a, b| if older(b, a) { b } else { a });
            if roots.is_empty() {
                next.push(oldest_cell);
                continue;
            }
            roots.sort_by(|&a, &b| (grid.value(a), a).partial_cmp(&(grid.value(b), b)).unwrap());
            for &r in &roots[1..] {
                if grid.value(r) != level {
                    points.push(PersistencePoint::ordinary(grid.value(r), level));
                }
            }
            next.push(roots[0]);
        }
        alive = next;
    }
    for r in alive {
        points.push(PersistencePoint::new(grid.value(r), f64::INFINITY, 0, PointKind::Essential));
    }
    PersistenceDiagram::new(points, "oracle")
}

pub fn random_grid(rng: &mut impl Rng, w: usize, h: usize, max_value: u32) -> ScalarGrid {
    let values = (0..w * h).map(|_| rng.random_range(0..=max_value) as f64).collect();
    ScalarGrid::new(w, h, values).unwrap()
}

pub fn random_graph(rng: &mut impl Rng, max_nodes: usize, edge_prob: f64, max_value: u32) -> FilteredGraph {
    let n = rng.random_range(1..=max_nodes);
    let values = (0..n).map(|_| rng.random_range(0..=max_value) as f64).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(edge_prob) {
                edges.push((u, v));
            }
        }
    }
    FilteredGraph::new(values, edges).unwrap()
}

pub fn random_diagram(rng: &mut impl Rng, max_points: usize) -> PersistenceDiagram {
    let n = rng.random_range(0..=max_points);
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let b = rng.random_range(0.0..1.0);
            (b, b + rng.random_range(0.0..1.0))
        })
        .collect();
    PersistenceDiagram::from_pairs(&pairs)
}

/// Minimum over every partial matching (each point matched to a point of the
/// other diagram or to its own diagonal projection) by exhaustive search.
pub fn exhaustive_wasserstein(a: &PersistenceDiagram, b: &PersistenceDiagram, p: f64) -> f64 {
    let diag = |q: &PersistencePoint| (q.death - q.birth).abs() / 2f64.sqrt();
    let dist = |x: &PersistencePoint, y: &PersistencePoint| ((x.birth - y.birth).powi(2) + (x.death - y.death).powi(2)).sqrt();
    fn go(
        i: usize,
        a: &[PersistencePoint],
        b: &[PersistencePoint],
        used: &mut Vec<bool>,
        p: f64,
        diag: &dyn Fn(&PersistencePoint) -> f64,
        dist: &dyn Fn(&PersistencePoint, &PersistencePoint) -> f64,
    ) -> f64 {
        if i == a.len() {
            return b
                .iter()
                .zip(used.iter())
                .filter(|(_, u)| !**u)
                .map(|(q, _)| diag(q).powf(p))
                .sum();
        }
        let mut best = diag(&a[i]).powf(p) + go(i + 1, a, b, used, p, diag, dist);
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(dist(&a[i], &b[j]).powf(p) + go(i + 1, a, b, used, p, diag, dist));
                used[j] = false;
            }
        }
        best
    }
    let mut used = vec![false; b.len()];
    go(0, &a.points, &b.points, &mut used, p, &diag, &dist).powf(1.0 / p)
}

/// Bilinear interpolation written out from the four surrounding pixel
/// centres: weights are the areas of the opposite sub-rectangles.
pub fn bilinear_oracle(values: &[f64], n_x: usize, n_y: usize, fx: f64, fy: f64) -> f64 {
    let fx = fx.max(0.0).min((n_x - 1) as f64);
    let fy = fy.max(0.0).min((n_y - 1) as f64);
    let mut total = 0.0;
    for row in 0..n_y {
        for col in 0..n_x {
            let wx = 1.0 - (fx - col as f64).abs();
            let wy = 1.0 - (fy - row as f64).abs();
            if wx > 0.0 && wy > 0.0 {
                total += wx * wy * values[row * n_x + col];
            }
        }
    }
    total
}

/// Integral of an isotropic Gaussian over a rectangle by Gauss-Legendre
/// quadrature on 24 nodes per axis (no error function involved).
pub fn gaussian_rect_quadrature(cx: f64, cy: f64, sigma: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(24);
    let axis = |c: f64, lo: f64, hi: f64| -> f64 {
        let (m, r) = ((hi + lo) / 2.0, (hi - lo) / 2.0);
        nodes
            .iter()
            .zip(&weights)
            .map(|(t, w)| {
                let z = (m + r * t - c) / sigma;
                w * (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            * r
            / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    axis(cx, x0, x1) * axis(cy, y0, y1)
}

/// Nodes and weights on [-1, 1] by Newton iteration on Legendre polynomials.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Node heights for the letters of the worked extended-persistence example.
pub const A: f64 = 0.0;
pub const B: f64 = 1.0;
pub const C: f64 = 2.0;
pub const D: f64 = 3.0;
pub const E: f64 = 4.0;
pub const G: f64 = 5.0;
pub const F: f64 = 6.0;

/// Graph of the worked example: c and d are minima that join the a-branch at
/// e; one cycle closes at e with lowest node b, another closes at g with
/// lowest node d; f is the top. The second node at height e closes the first
/// cycle without creating a pair of its own.
pub fn worked_example_graph() -> FilteredGraph {
    // a b c d e g f e'
    let values = vec![A, B, C, D, E, G, F, E];
    let (a, b, c, d, e, g, f, e2) = (0, 1, 2, 3, 4, 5, 6, 7);
    let edges = vec![(a, b), (b, e), (c, e), (d, e), (b, e2), (e2, e), (d, g), (e, g), (g, f)];
    FilteredGraph::new(values, edges).unwrap()
}

/// Sorted `(kind, dim, birth, death)` tuples for readable comparisons.
pub fn pairs(d: &PersistenceDiagram) -> Vec<(PointKind, u8, f64, f64)> {
    let mut v: Vec<_> = d.points.iter().map(|p| (p.kind, p.dim, p.birth, p.death)).collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}
