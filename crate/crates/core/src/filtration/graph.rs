//! Extended persistence of node-weighted graphs without a boundary matrix.
//!
//! Ordinary and relative pairs come from union-find sweeps going up and going
//! down. Extended 0D pairs are (min, max) of each component. Extended 1D pairs
//! are read off the rank function: the number of pairs with birth <= s and
//! death >= t equals the cycle rank of the subgraph induced by nodes with
//! values in [t, s].

use std::cmp::Ordering;

use super::{drop_zero, DisjointSet, FilteredGraph, PersistenceDiagram, PersistencePoint, PointKind};
use crate::error::{Error, Result};

pub fn extended_pd_graph(graph: &FilteredGraph) -> Result<PersistenceDiagram> {
    extended_pd_graph_with(graph, false)
}

pub fn extended_pd_graph_with(graph: &FilteredGraph, keep_zero: bool) -> Result<PersistenceDiagram> {
    let n = graph.num_nodes();
    if n == 0 {
        return Err(Error::invalid("empty graph"));
    }
    let vals = graph.node_values();
    let mut points = Vec::new();

    // Going up: components are named by their lowest node.
    let up = |a: usize, b: usize| vals[a].total_cmp(&vals[b]).then(a.cmp(&b));
    let mut edges: Vec<usize> = (0..graph.edges().len()).collect();
    edges.sort_by(|&a, &b| graph.edge_max(a).total_cmp(&graph.edge_max(b)).then(a.cmp(&b)));
    let ordinary = sweep(graph, &edges, up, |e| graph.edge_max(e));
    for (young, e) in ordinary {
        points.push(
            PersistencePoint::new(vals[young], graph.edge_max(e), 0, PointKind::Ordinary)
                .with_cells(Some(young), Some(e)),
        );
    }

    // Going down: components are named by their highest node.
    let down = |a: usize, b: usize| vals[b].total_cmp(&vals[a]).then(a.cmp(&b));
    edges.sort_by(|&a, &b| graph.edge_min(b).total_cmp(&graph.edge_min(a)).then(a.cmp(&b)));
    let relative = sweep(graph, &edges, down, |e| graph.edge_min(e));
    for (young, e) in relative {
        points.push(
            PersistencePoint::new(vals[young], graph.edge_min(e), 1, PointKind::Relative)
                .with_cells(Some(young), Some(e)),
        );
    }

    // One extended 0D pair per connected component.
    let mut uf = DisjointSet::new(n);
    for &(u, v) in graph.edges() {
        uf.union(u, v);
    }
    let mut lo = vec![usize::MAX; n];
    let mut hi = vec![usize::MAX; n];
    for v in 0..n {
        let r = uf.find(v);
        if lo[r] == usize::MAX || up(v, lo[r]) == Ordering::Less {
            lo[r] = v;
        }
        if hi[r] == usize::MAX || down(v, hi[r]) == Ordering::Less {
            hi[r] = v;
        }
    }
    for r in 0..n {
        if lo[r] != usize::MAX {
            points.push(
                PersistencePoint::new(vals[lo[r]], vals[hi[r]], 0, PointKind::Extended)
                    .with_cells(Some(lo[r]), Some(hi[r])),
            );
        }
    }

    for (birth, death, count) in extended_cycles(graph) {
        for _ in 0..count {
            points.push(PersistencePoint::new(birth, death, 1, PointKind::Extended));
        }
    }

    if !keep_zero {
        drop_zero(&mut points);
    }
    Ok(PersistenceDiagram::new(points, ""))
}

/// Elder-rule sweep. Returns (dying birth node, killing edge) per merge.
fn sweep(
    graph: &FilteredGraph,
    edge_order: &[usize],
    node_cmp: impl Fn(usize, usize) -> Ordering,
    _edge_value: impl Fn(usize) -> f64,
) -> Vec<(usize, usize)> {
    let n = graph.num_nodes();
    let mut uf = DisjointSet::new(n);
    let mut birth: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for &e in edge_order {
        let (u, v) = graph.edges()[e];
        let (ru, rv) = (uf.find(u), uf.find(v));
        if ru == rv {
            continue;
        }
        let (bu, bv) = (birth[ru], birth[rv]);
        let (older, younger) = if node_cmp(bu, bv) == Ordering::Less {
            (bu, bv)
        } else {
            (bv, bu)
        };
        out.push((younger, e));
        let r = uf.union(ru, rv);
        birth[r] = older;
    }
    out
}

/// Extended 1D pairs as (birth, death, multiplicity), by inclusion-exclusion on
/// the interlevel cycle ranks.
fn extended_cycles(graph: &FilteredGraph) -> Vec<(f64, f64, usize)> {
    let vals = graph.node_values();
    let mut levels: Vec<f64> = vals.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let m = levels.len();
    let level_of = |x: f64| levels.binary_search_by(|l| l.total_cmp(&x)).unwrap();

    // rank[j][i] = cycle rank of the subgraph on nodes with level in [j, i].
    let mut rank = vec![vec![0i64; m]; m];
    let mut nodes_by_level: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (v, &x) in vals.iter().enumerate() {
        nodes_by_level[level_of(x)].push(v);
    }
    let mut edges_by_top: Vec<Vec<usize>> = vec![Vec::new(); m];
    for e in 0..graph.edges().len() {
        edges_by_top[level_of(graph.edge_max(e))].push(e);
    }
    let node_level: Vec<usize> = vals.iter().map(|&x| level_of(x)).collect();

    for j in 0..m {
        let mut uf = DisjointSet::new(vals.len());
        let (mut nv, mut ne, mut nc) = (0i64, 0i64, 0i64);
        for i in j..m {
            for _ in &nodes_by_level[i] {
                nv += 1;
                nc += 1;
            }
            for &e in &edges_by_top[i] {
                let (u, v) = graph.edges()[e];
                if node_level[u].min(node_level[v]) < j {
                    continue;
                }
                ne += 1;
                if uf.find(u) != uf.find(v) {
                    uf.union(u, v);
                    nc -= 1;
                }
            }
            rank[j][i] = ne - nv + nc;
        }
    }

    let r = |j: usize, i: isize| -> i64 {
        if i < 0 || j >= m || (i as usize) < j {
            0
        } else {
            rank[j][i as usize]
        }
    };
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..=i {
            let count = r(j, i as isize) - r(j, i as isize - 1) - r(j + 1, i as isize) + r(j + 1, i as isize - 1);
            debug_assert!(count >= 0);
            if count > 0 {
                out.push((levels[i], levels[j], count as usize));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(d: &PersistenceDiagram, kind: PointKind, dim: u8) -> Vec<(f64, f64)> {
        let mut v: Vec<_> = d
            .points
            .iter()
            .filter(|p| p.kind == kind && p.dim == dim)
            .map(|p| (p.birth, p.death))
            .collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn path_graph() {
        let g = FilteredGraph::new(vec![1.0, 3.0, 2.0], vec![(0, 1), (1, 2)]).unwrap();
        let d = extended_pd_graph(&g).unwrap();
        assert_eq!(pairs(&d, PointKind::Ordinary, 0), vec![(2.0, 3.0)]);
        assert_eq!(pairs(&d, PointKind::Extended, 0), vec![(1.0, 3.0)]);
        assert!(pairs(&d, PointKind::Extended, 1).is_empty());
        assert_eq!(d.of_kind(PointKind::Relative).count(), 0);
    }

    #[test]
    fn triangle() {
        let g = FilteredGraph::new(vec![1.0, 2.0, 3.0], vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let d = extended_pd_graph(&g).unwrap();
        assert_eq!(pairs(&d, PointKind::Extended, 0), vec![(1.0, 3.0)]);
        assert_eq!(pairs(&d, PointKind::Extended, 1), vec![(3.0, 1.0)]);
        assert_eq!(d.of_kind(PointKind::Ordinary).count(), 0);
    }

    #[test]
    fn isolated_nodes_are_zero_length_components() {
        let g = FilteredGraph::new(vec![4.0, 0.0], vec![]).unwrap();
        assert!(extended_pd_graph(&g).unwrap().is_empty());
        assert_eq!(extended_pd_graph_with(&g, true).unwrap().len(), 2);
        assert!(extended_pd_graph(&FilteredGraph::new(vec![], vec![]).unwrap()).is_err());
    }

    #[test]
    fn superlevel_branch_gives_relative_pair() {
        // two peaks (5 and 4) joined through a valley at 1
        let g = FilteredGraph::new(vec![5.0, 1.0, 4.0], vec![(0, 1), (1, 2)]).unwrap();
        let d = extended_pd_graph(&g).unwrap();
        assert_eq!(pairs(&d, PointKind::Relative, 1), vec![(4.0, 1.0)]);
        assert_eq!(pairs(&d, PointKind::Extended, 0), vec![(1.0, 5.0)]);
    }
}
