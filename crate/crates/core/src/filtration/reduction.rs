//! Reference extended persistence by boundary-matrix column reduction over
//! Z/2. The complex is the graph followed by its cone: a cone vertex first,
//! the graph's nodes and edges ascending, then the coned nodes and edges
//! descending. Cubic cost, so inputs are capped.

use super::{drop_zero, FilteredGraph, PersistenceDiagram, PersistencePoint, PointKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct ReductionOptions {
    pub max_nodes: usize,
    pub keep_zero: bool,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            max_nodes: 64,
            keep_zero: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Half {
    Cone,
    Up,
    Down,
}

#[derive(Clone, Copy, Debug)]
enum Cell {
    Apex,
    Node(usize),
    Edge(usize),
    ConedNode(usize),
    ConedEdge(usize),
}

impl Cell {
    fn dim(self) -> u8 {
        match self {
            Cell::Apex | Cell::Node(_) => 0,
            Cell::Edge(_) | Cell::ConedNode(_) => 1,
            Cell::ConedEdge(_) => 2,
        }
    }

    fn half(self) -> Half {
        match self {
            Cell::Apex => Half::Cone,
            Cell::Node(_) | Cell::Edge(_) => Half::Up,
            Cell::ConedNode(_) | Cell::ConedEdge(_) => Half::Down,
        }
    }
}

pub fn extended_pd_reduction_oracle(graph: &FilteredGraph, opts: ReductionOptions) -> Result<PersistenceDiagram> {
    let n = graph.num_nodes();
    if n == 0 {
        return Err(Error::invalid("empty graph"));
    }
    if n > opts.max_nodes {
        return Err(Error::invalid(format!(
            "reduction reference is capped at {} nodes, graph has {n}",
            opts.max_nodes
        )));
    }
    let vals = graph.node_values();
    let m = graph.edges().len();

    let mut up: Vec<(f64, u8, usize, Cell)> = (0..n)
        .map(|v| (vals[v], 0, v, Cell::Node(v)))
        .chain((0..m).map(|e| (graph.edge_max(e), 1, e, Cell::Edge(e))))
        .collect();
    up.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut down: Vec<(f64, u8, usize, Cell)> = (0..n)
        .map(|v| (vals[v], 1, v, Cell::ConedNode(v)))
        .chain((0..m).map(|e| (graph.edge_min(e), 2, e, Cell::ConedEdge(e))))
        .collect();
    down.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut cells = vec![(f64::NEG_INFINITY, Cell::Apex)];
    cells.extend(up.iter().chain(down.iter()).map(|&(x, _, _, c)| (x, c)));

    // Position of every cell in the filtration.
    let mut node_at = vec![0; n];
    let mut edge_at = vec![0; m];
    let mut coned_node_at = vec![0; n];
    for (i, &(_, c)) in cells.iter().enumerate() {
        match c {
            Cell::Node(v) => node_at[v] = i,
            Cell::Edge(e) => edge_at[e] = i,
            Cell::ConedNode(v) => coned_node_at[v] = i,
            _ => {}
        }
    }

    let mut columns: Vec<Vec<usize>> = cells
        .iter()
        .map(|&(_, c)| {
            let mut col = match c {
                Cell::Apex | Cell::Node(_) => vec![],
                Cell::Edge(e) => {
                    let (u, v) = graph.edges()[e];
                    vec![node_at[u], node_at[v]]
                }
                Cell::ConedNode(v) => vec![0, node_at[v]],
                Cell::ConedEdge(e) => {
                    let (u, v) = graph.edges()[e];
                    vec![edge_at[e], coned_node_at[u], coned_node_at[v]]
                }
            };
            col.sort_unstable();
            col
        })
        .collect();

    let total = cells.len();
    let mut owner_of_low: Vec<Option<usize>> = vec![None; total];
    let mut points = Vec::new();
    for j in 0..total {
        while let Some(&low) = columns[j].last() {
            match owner_of_low[low] {
                Some(k) => {
                    let other = columns[k].clone();
                    columns[j] = sym_diff(&columns[j], &other);
                }
                None => break,
            }
        }
        if let Some(&low) = columns[j].last() {
            owner_of_low[low] = Some(j);
            let (birth, bc) = cells[low];
            let (death, dc) = cells[j];
            let kind = match (bc.half(), dc.half()) {
                (Half::Up, Half::Up) => PointKind::Ordinary,
                (Half::Down, Half::Down) => PointKind::Relative,
                (Half::Up, Half::Down) => PointKind::Extended,
                _ => return Err(Error::Internal("cone apex was paired".into())),
            };
            points.push(PersistencePoint::new(birth, death, bc.dim(), kind).with_cells(cell_index(bc), cell_index(dc)));
        }
    }

    if !opts.keep_zero {
        drop_zero(&mut points);
    }
    Ok(PersistenceDiagram::new(points, ""))
}

fn cell_index(c: Cell) -> Option<usize> {
    match c {
        Cell::Apex => None,
        Cell::Node(i) | Cell::Edge(i) | Cell::ConedNode(i) | Cell::ConedEdge(i) => Some(i),
    }
}

fn sym_diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let g = FilteredGraph::new(vec![0.0, 1.0], vec![(0, 1)]).unwrap();
        let d = extended_pd_reduction_oracle(&g, ReductionOptions::default()).unwrap();
        assert_eq!(d.len(), 1);
        let p = &d.points[0];
        assert_eq!((p.kind, p.dim, p.birth, p.death), (PointKind::Extended, 0, 0.0, 1.0));
    }

    #[test]
    fn pairs_every_simplex() {
        let g = FilteredGraph::new(vec![2.0, 2.0, 0.0, 1.0], vec![(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let opts = ReductionOptions {
            keep_zero: true,
            ..Default::default()
        };
        let d = extended_pd_reduction_oracle(&g, opts).unwrap();
        assert_eq!(d.len(), 4 + 4);
    }

    #[test]
    fn refuses_large_graphs() {
        let g = FilteredGraph::new(vec![0.0; 65], vec![]).unwrap();
        assert!(extended_pd_reduction_oracle(&g, ReductionOptions::default()).is_err());
    }
}
