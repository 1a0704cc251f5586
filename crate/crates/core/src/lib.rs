//! Learned importance of topological features.
//!
//! The pipeline: compute persistence diagrams ([`filtration`]), turn them into
//! unweighted persistence images ([`vectorize`]), train a triplet-loss CNN on
//! those images ([`model`]), then read the learned importance back out with
//! Grad-CAM ([`explain`]) and render it ([`viz`]). Baseline representations
//! live in [`metrics`]; file formats and the synthetic data generator in
//! [`io`].

pub mod config;
pub mod error;
pub mod explain;
pub mod filtration;
pub mod io;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod pipeline;
pub mod viz;
pub mod vectorize;

pub use error::{Error, Result};
pub use filtration::{
    FeatureRegion, FilteredGraph, MergeEvent, MergeHistory, PersistenceDiagram, PersistencePoint,
    PointKind, ScalarGrid,
};
