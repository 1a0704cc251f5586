//! Persistence diagrams of scalar grids and node-weighted graphs.
//!
//! Grids get 0D sublevel-set persistence through a union-find sweep that also
//! records a [`MergeHistory`], so the pixels behind any diagram point can be
//! recovered later. Graphs get extended persistence, either through the
//! union-find/rank-function fast path in [`graph`] or the boundary-matrix
//! reduction in [`reduction`].

mod cubical;
pub mod graph;
pub mod reduction;
mod union_find;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cubical::{feature_region, sublevel_pd0, sublevel_pd0_with, Connectivity, SublevelOptions};
pub use graph::{extended_pd_graph, extended_pd_graph_with};
pub use reduction::{extended_pd_reduction_oracle, ReductionOptions};
pub(crate) use union_find::DisjointSet;

/// Row-major scalar field, one value per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("grid must have positive width and height"));
        }
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "grid {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite grid value at cell {i}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    /// Grid with `c` added to every value.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    pub(crate) fn neighbors(&self, cell: usize, connectivity: Connectivity) -> impl Iterator<Item = usize> + '_ {
        let (w, h) = (self.width as isize, self.height as isize);
        let (x, y) = ((cell % self.width) as isize, (cell / self.width) as isize);
        let offsets: &'static [(isize, isize)] = match connectivity {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
        };
        offsets.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| (ny * w + nx) as usize)
        })
    }
}

/// Graph with a filter value on every node.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredGraph {
    node_values: Vec<f64>,
    edges: Vec<(usize, usize)>,
}

impl FilteredGraph {
    pub fn new(node_values: Vec<f64>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = node_values.len();
        if let Some(i) = node_values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at node {i}")));
        }
        for (k, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge {k} ({u},{v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(Error::invalid(format!("edge {k} is a self-loop on node {u}")));
            }
        }
        Ok(Self { node_values, edges })
    }

    pub fn node_values(&self) -> &[f64] {
        &self.node_values
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.node_values.len()
    }

    /// Filter value of an edge in the ascending pass.
    pub fn edge_max(&self, e: usize) -> f64 {
        let (u, v) = self.edges[e];
        self.node_values[u].max(self.node_values[v])
    }

    /// Filter value of an edge in the descending pass.
    pub fn edge_min(&self, e: usize) -> f64 {
        let (u, v) = self.edges[e];
        self.node_values[u].min(self.node_values[v])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Ordinary,
    Relative,
    Extended,
    Essential,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PointKind::Ordinary => "ordinary",
            PointKind::Relative => "relative",
            PointKind::Extended => "extended",
            PointKind::Essential => "essential",
        }
    }
}

impl std::str::FromStr for PointKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ordinary" => Ok(PointKind::Ordinary),
            "relative" => Ok(PointKind::Relative),
            "extended" => Ok(PointKind::Extended),
            "essential" => Ok(PointKind::Essential),
            other => Err(format!("unknown point kind '{other}'")),
        }
    }
}

/// One feature of a diagram. `birth_cell`/`death_cell` are pixel indices for
/// grids, node (birth) and edge (death) indices for graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistencePoint {
    pub birth: f64,
    pub death: f64,
    pub dim: u8,
    pub kind: PointKind,
    pub birth_cell: Option<usize>,
    pub death_cell: Option<usize>,
}

impl PersistencePoint {
    pub fn new(birth: f64, death: f64, dim: u8, kind: PointKind) -> Self {
        Self {
            birth,
            death,
            dim,
            kind,
            birth_cell: None,
            death_cell: None,
        }
    }

    pub fn ordinary(birth: f64, death: f64) -> Self {
        Self::new(birth, death, 0, PointKind::Ordinary)
    }

    pub fn with_cells(mut self, birth_cell: Option<usize>, death_cell: Option<usize>) -> Self {
        self.birth_cell = birth_cell;
        self.death_cell = death_cell;
        self
    }

    /// |death - birth|; infinite for essential points.
    pub fn persistence(&self) -> f64 {
        (self.death - self.birth).abs()
    }

    pub fn is_finite(&self) -> bool {
        self.birth.is_finite() && self.death.is_finite()
    }

    /// Points whose birth exceeds their death are drawn below the diagonal.
    pub fn is_below_diagonal(&self) -> bool {
        self.death < self.birth
    }

    pub fn check(&self) -> Result<()> {
        if self.birth.is_nan() || self.death.is_nan() {
            return Err(Error::invalid("NaN coordinate in persistence point"));
        }
        match self.kind {
            PointKind::Essential if self.death != f64::INFINITY => {
                Err(Error::invalid("essential point must have death = inf"))
            }
            PointKind::Essential => Ok(()),
            _ if !self.is_finite() => Err(Error::invalid(format!(
                "{} point ({}, {}) must be finite",
                self.kind.as_str(),
                self.birth,
                self.death
            ))),
            PointKind::Ordinary if self.death < self.birth => Err(Error::invalid(format!(
                "ordinary point ({}, {}) has death < birth",
                self.birth, self.death
            ))),
            PointKind::Extended if self.dim == 1 && self.birth < self.death => Err(Error::invalid(format!(
                "extended 1D point ({}, {}) must have birth >= death",
                self.birth, self.death
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub points: Vec<PersistencePoint>,
    pub source_id: String,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<PersistencePoint>, source_id: impl Into<String>) -> Self {
        Self {
            points,
            source_id: source_id.into(),
        }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self::new(
            pairs.iter().map(|&(b, d)| PersistencePoint::ordinary(b, d)).collect(),
            "",
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn finite_points(&self) -> impl Iterator<Item = &PersistencePoint> {
        self.points.iter().filter(|p| p.is_finite())
    }

    pub fn of_kind(&self, kind: PointKind) -> impl Iterator<Item = &PersistencePoint> {
        self.points.iter().filter(move |p| p.kind == kind)
    }

    /// Copy without essential (infinite) points.
    pub fn without_essential(&self) -> Self {
        Self::new(self.finite_points().cloned().collect(), self.source_id.clone())
    }

    /// True when any point comes from the downward pass of extended persistence.
    pub fn has_extended(&self) -> bool {
        self.points
            .iter()
            .any(|p| matches!(p.kind, PointKind::Extended | PointKind::Relative))
    }

    /// Multiset of `(kind, dim, birth, death)` ignoring provenance, sorted.
    /// Two diagrams are the same diagram iff their signatures are equal.
    pub fn signature(&self) -> Vec<(PointKind, u8, u64, u64)> {
        let mut sig: Vec<_> = self
            .points
            .iter()
            .map(|p| (p.kind, p.dim, ordered_bits(p.birth), ordered_bits(p.death)))
            .collect();
        sig.sort_unstable();
        sig
    }

    pub fn check(&self) -> Result<()> {
        self.points.iter().try_for_each(PersistencePoint::check)
    }
}

// Monotone map from f64 to u64 so signatures sort numerically.
fn ordered_bits(x: f64) -> u64 {
    let x = if x == 0.0 { 0.0 } else { x };
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MergeEvent {
    /// A cell enters the sublevel set as its own component.
    ComponentBorn { level: f64, cell: usize },
    /// Two components meet at `saddle`; components are named by their birth cell.
    Merge {
        level: f64,
        younger: usize,
        older: usize,
        saddle: usize,
    },
}

impl MergeEvent {
    pub fn level(&self) -> f64 {
        match *self {
            MergeEvent::ComponentBorn { level, .. } | MergeEvent::Merge { level, .. } => level,
        }
    }
}

/// Union-find event log of a sublevel sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeHistory {
    pub events: Vec<MergeEvent>,
    /// Final component (birth cell) of every cell.
    pub roots: Vec<usize>,
}

impl MergeHistory {
    pub fn num_cells(&self) -> usize {
        self.roots.len()
    }

    pub fn merges(&self) -> impl Iterator<Item = &MergeEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e, MergeEvent::Merge { .. }))
    }
}

/// Pixels of the interlevel set behind one 0D feature.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRegion {
    pub point: PersistencePoint,
    pub pixels: Vec<usize>,
}

pub(crate) fn drop_zero(points: &mut Vec<PersistencePoint>) {
    points.retain(|p| p.birth != p.death);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(ScalarGrid::new(0, 3, vec![]).is_err());
        assert!(ScalarGrid::new(2, 2, vec![1.0; 3]).is_err());
        assert!(ScalarGrid::new(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn graph_rejects_self_loops_and_bad_indices() {
        assert!(FilteredGraph::new(vec![0.0, 1.0], vec![(0, 0)]).is_err());
        assert!(FilteredGraph::new(vec![0.0, 1.0], vec![(0, 2)]).is_err());
        assert!(FilteredGraph::new(vec![0.0, f64::INFINITY], vec![]).is_err());
    }

    #[test]
    fn point_invariants() {
        assert!(PersistencePoint::ordinary(2.0, 1.0).check().is_err());
        assert!(PersistencePoint::new(5.0, 2.0, 1, PointKind::Extended).check().is_ok());
        assert!(PersistencePoint::new(2.0, 5.0, 1, PointKind::Extended).check().is_err());
        assert!(PersistencePoint::new(1.0, 4.0, 0, PointKind::Essential).check().is_err());
        assert!(PersistencePoint::new(1.0, f64::INFINITY, 0, PointKind::Essential).check().is_ok());
    }

    #[test]
    fn signature_ignores_order_and_provenance() {
        let a = PersistenceDiagram::new(
            vec![
                PersistencePoint::ordinary(0.0, 1.0).with_cells(Some(3), None),
                PersistencePoint::ordinary(-1.0, 2.0),
            ],
            "a",
        );
        let b = PersistenceDiagram::from_pairs(&[(-1.0, 2.0), (0.0, 1.0)]);
        assert_eq!(a.signature(), b.signature());
    }
}
