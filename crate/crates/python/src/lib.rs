//! Python bindings. The module is importable as `topolens`.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use topolens::config::Config;
use topolens::explain::{field_lookup, grad_cam_input};
use topolens::filtration::{extended_pd_graph, sublevel_pd0, Connectivity};
use topolens::model::{grad_check_suite, ClassifyMode, GradCheckSuite, ModelParams};
use topolens::pipeline::LabeledDiagrams;
use topolens::vectorize::{Extents, PersistenceImageSpec, Weight};
use topolens::viz::{render_diagram_overlay, render_field, FieldRender};
use topolens::{io, metrics, pipeline, vectorize, Error, FilteredGraph, PersistenceDiagram, PersistencePoint, ScalarGrid};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows(values: &[f64], n_x: usize) -> Vec<Vec<f64>> {
    values.chunks(n_x).map(<[f64]>::to_vec).collect()
}

fn parse_connectivity(c: u8) -> PyResult<Connectivity> {
    match c {
        4 => Ok(Connectivity::Four),
        8 => Ok(Connectivity::Eight),
        _ => Err(PyValueError::new_err(format!("connectivity must be 4 or 8, got {c}"))),
    }
}

#[pyclass(name = "Diagram", frozen, module = "topolens", skip_from_py_object)]
#[derive(Clone)]
struct PyDiagram {
    inner: PersistenceDiagram,
}

#[pymethods]
impl PyDiagram {
    /// Ordinary dimension-0 diagram from (birth, death) pairs.
    #[new]
    #[pyo3(signature = (pairs = Vec::new()))]
    fn new(pairs: Vec<(f64, f64)>) -> PyResult<Self> {
        Self::from_pairs(pairs)
    }

    #[staticmethod]
    fn from_pairs(pairs: Vec<(f64, f64)>) -> PyResult<Self> {
        let inner = PersistenceDiagram::from_pairs(&pairs);
        inner.check().map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::diagram_from_csv(text, "<string>").map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: io::load_diagram(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_diagram(&path, &self.inner).map_err(err)
    }

    fn to_csv(&self) -> String {
        io::diagram_to_csv(&self.inner)
    }

    /// (birth, death, dim, kind) per point.
    fn points(&self) -> Vec<(f64, f64, u8, &'static str)> {
        self.inner
            .points
            .iter()
            .map(|p| (p.birth, p.death, p.dim, p.kind.as_str()))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Diagram({} points)", self.inner.len())
    }
}

/// Dimension-0 sublevel diagram of a 2-D grid given as rows.
#[pyfunction]
#[pyo3(name = "sublevel_pd0", signature = (rows, connectivity = 4))]
fn sublevel_pd0_py(rows: Vec<Vec<f64>>, connectivity: u8) -> PyResult<PyDiagram> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("grid rows must all have the same length"));
    }
    let grid = ScalarGrid::new(width, height, rows.concat()).map_err(err)?;
    let (inner, _) = sublevel_pd0(&grid, parse_connectivity(connectivity)?).map_err(err)?;
    Ok(PyDiagram { inner })
}

#[pyfunction]
#[pyo3(name = "extended_pd_graph")]
fn extended_pd_graph_py(node_values: Vec<f64>, edges: Vec<(usize, usize)>) -> PyResult<PyDiagram> {
    let g = FilteredGraph::new(node_values, edges).map_err(err)?;
    Ok(PyDiagram {
        inner: extended_pd_graph(&g).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (d1, d2, p = 1.0))]
fn wasserstein(d1: &PyDiagram, d2: &PyDiagram, p: f64) -> PyResult<f64> {
    Ok(metrics::wasserstein(&d1.inner, &d2.inner, p).map_err(err)?.cost)
}

#[pyfunction]
#[pyo3(signature = (d, dim, n_samples, t_min, t_max))]
fn betti_curve(d: &PyDiagram, dim: u8, n_samples: usize, t_min: f64, t_max: f64) -> PyResult<Vec<usize>> {
    Ok(metrics::betti_curve(&d.inner, dim, n_samples, t_min, t_max).map_err(err)?.samples)
}

/// Persistence image as `n_y` rows of `n_x` values, row 0 at the lowest
/// persistence. `weight` is "uniform" or "persistence".
#[pyfunction]
#[pyo3(signature = (d, resolution, extents, sigma, weight = "persistence"))]
fn persistence_image(
    d: &PyDiagram,
    resolution: (usize, usize),
    extents: (f64, f64, f64, f64),
    sigma: f64,
    weight: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let w = match weight {
        "uniform" => Weight::Uniform,
        "persistence" => Weight::Persistence,
        other => return Err(PyValueError::new_err(format!("unknown weight '{other}'"))),
    };
    let e = Extents::new(extents.0, extents.1, extents.2, extents.3).map_err(err)?;
    let spec = PersistenceImageSpec::new(resolution.0, resolution.1, e, sigma, w).map_err(err)?;
    let img = vectorize::persistence_image(&d.inner, &spec).map_err(err)?;
    Ok(rows(&img.pixels, spec.n_x))
}

/// Synthetic labelled diagrams: (diagrams, labels, class names).
#[pyfunction]
#[pyo3(signature = (name = "default", seed = 0))]
fn synth(name: &str, seed: u64) -> PyResult<(Vec<PyDiagram>, Vec<usize>, Vec<String>)> {
    let spec = io::SynthSpec::named(name, seed).map_err(err)?;
    let data = io::synth_generate(&spec).map_err(err)?;
    let diagrams = data.diagrams.into_iter().map(|inner| PyDiagram { inner }).collect();
    Ok((diagrams, data.labels, data.classes))
}

#[pyclass(name = "ImportanceField", frozen, module = "topolens")]
struct PyField {
    inner: topolens::explain::ImportanceField,
    mirror: bool,
}

#[pymethods]
impl PyField {
    /// `n_y` rows of `n_x` values.
    fn values(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.values, self.inner.n_x())
    }

    #[getter]
    fn class_label(&self) -> usize {
        self.inner.class_label
    }

    /// (row, col) of the maximum.
    fn argmax(&self) -> (usize, usize) {
        self.inner.argmax()
    }

    /// (birth, persistence) at the centre of pixel (row, col).
    fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        self.inner.spec.pixel_center(row, col)
    }

    fn max(&self) -> f64 {
        self.inner.max()
    }

    /// Importance at the diagram point (birth, death).
    fn lookup(&self, birth: f64, death: f64) -> f64 {
        field_lookup(&self.inner, &PersistencePoint::ordinary(birth, death))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_tensor(&path, &self.inner.to_tensor()).map_err(err)
    }

    fn to_csv(&self) -> String {
        io::field_to_csv(&self.inner)
    }

    /// Writes a PNG (or PPM by extension) of the field in the birth/death plane.
    #[pyo3(signature = (path, width = 400, height = 400))]
    fn render(&self, path: PathBuf, width: usize, height: usize) -> PyResult<()> {
        let opts = FieldRender {
            width,
            height,
            mirror: self.mirror,
        };
        render_field(&self.inner, opts).map_err(err)?.save(&path).map_err(err)
    }

    /// Same as `render` with the diagram's points drawn on top.
    #[pyo3(signature = (diagram, path, width = 400, height = 400))]
    fn render_overlay(&self, diagram: &PyDiagram, path: PathBuf, width: usize, height: usize) -> PyResult<()> {
        let opts = FieldRender {
            width,
            height,
            mirror: self.mirror,
        };
        render_diagram_overlay(&diagram.inner, &self.inner, opts)
            .map_err(err)?
            .save(&path)
            .map_err(err)
    }
}

#[pyclass(name = "Model", frozen, module = "topolens")]
struct PyModel {
    inner: ModelParams,
}

impl PyModel {
    fn mode(k: Option<usize>) -> ClassifyMode {
        k.map_or(ClassifyMode::Prototype, ClassifyMode::Knn)
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: io::load_model(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_model(&path, &self.inner).map_err(err)
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes.clone()
    }

    fn embed(&self, d: &PyDiagram) -> PyResult<Vec<f64>> {
        let x = self.inner.input_for(&d.inner).map_err(err)?;
        self.inner.embed_input(&x).map_err(err)
    }

    /// Predicted class name, by nearest prototype or, with `k`, k-NN over
    /// the stored training embeddings.
    #[pyo3(signature = (d, k = None))]
    fn classify(&self, d: &PyDiagram, k: Option<usize>) -> PyResult<String> {
        let e = self.embed(d)?;
        let label = self.inner.classify_embedding(&e, Self::mode(k)).map_err(err)?;
        Ok(self.inner.classes[label].clone())
    }

    fn scores(&self, d: &PyDiagram) -> PyResult<Vec<f64>> {
        let e = self.embed(d)?;
        self.inner.scores_of_embedding(&e).map_err(err)
    }

    /// Grad-CAM field for `class_name`, or for the predicted class.
    #[pyo3(signature = (d, class_name = None))]
    fn explain(&self, py: Python<'_>, d: &PyDiagram, class_name: Option<&str>) -> PyResult<PyField> {
        let m = &self.inner;
        let x = m.input_for(&d.inner).map_err(err)?;
        let k = match class_name {
            Some(name) => m
                .classes
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| PyValueError::new_err(format!("unknown class '{name}'")))?,
            None => m.classify_embedding(&m.embed_input(&x).map_err(err)?, ClassifyMode::Prototype).map_err(err)?,
        };
        let inner = py.detach(|| grad_cam_input(m, &x, k)).map_err(err)?;
        Ok(PyField {
            inner,
            mirror: m.split_extended,
        })
    }

    fn __repr__(&self) -> String {
        format!("Model(classes={:?})", self.inner.classes)
    }
}

fn load_config(config: Vec<PathBuf>, overrides: Vec<String>, seed: u64) -> PyResult<Config> {
    let files: Vec<&std::path::Path> = config.iter().map(PathBuf::as_path).collect();
    let mut all = vec![format!("train.seed={seed}")];
    all.extend(overrides);
    Config::layered(&files, &all).map_err(err)
}

/// Trains a model on all the given diagrams. Returns the model and the
/// per-epoch total loss.
#[pyfunction]
#[pyo3(signature = (diagrams, labels, classes, config = Vec::new(), overrides = Vec::new(), seed = 0))]
fn fit(
    py: Python<'_>,
    diagrams: Vec<PyRef<'_, PyDiagram>>,
    labels: Vec<usize>,
    classes: Vec<String>,
    config: Vec<PathBuf>,
    overrides: Vec<String>,
    seed: u64,
) -> PyResult<(PyModel, Vec<f64>)> {
    let cfg = load_config(config, overrides, seed)?;
    let data = LabeledDiagrams {
        diagrams: diagrams.iter().map(|d| d.inner.clone()).collect(),
        labels,
        classes,
    };
    let (inner, history) = py
        .detach(|| pipeline::fit(&data, &cfg.arch, &cfg.train, &cfg.image))
        .map_err(err)?;
    Ok((PyModel { inner }, history.total))
}

/// Finite-difference gradient checks on the reduced architecture. Rows are
/// (seed, check, checked, skipped, max_rel_error).
#[pyfunction]
#[pyo3(signature = (seeds = vec![0], h = 1e-5, per_tensor = 12))]
fn grad_check(
    py: Python<'_>,
    seeds: Vec<u64>,
    h: f64,
    per_tensor: usize,
) -> PyResult<Vec<(u64, String, usize, usize, f64)>> {
    let suite = GradCheckSuite { seeds, h, per_tensor };
    let report = py.detach(|| grad_check_suite(&suite)).map_err(err)?;
    Ok(report
        .rows
        .into_iter()
        .map(|r| (r.seed, r.check, r.checked, r.skipped, r.max_rel_error))
        .collect())
}

#[pymodule(name = "topolens")]
pub fn topolens_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDiagram>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(sublevel_pd0_py, m)?)?;
    m.add_function(wrap_pyfunction!(extended_pd_graph_py, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(betti_curve, m)?)?;
    m.add_function(wrap_pyfunction!(persistence_image, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    Ok(())
}
