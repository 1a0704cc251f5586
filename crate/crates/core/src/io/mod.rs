//! File formats, dataset manifests, synthetic data and splitting.

mod diagram;
mod graph;
mod grid;
mod manifest;
mod model_file;
mod synth;
mod tensor;

pub use diagram::{diagram_from_csv, diagram_to_csv, load_diagram, save_diagram};
pub use graph::{graph_from_text, graph_to_text, load_graph, save_graph};
pub use grid::{load_grid, save_grid};
pub use manifest::{load_input, split, DatasetManifest, InputKind, ManifestEntry};
pub use model_file::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use synth::{synth_generate, SynthClass, SynthCluster, SynthDataset, SynthSpec};
pub use tensor::{load_tensor, save_tensor, tensor_from_bytes, tensor_to_bytes};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::explain::ImportanceField;

/// Writes via a sibling temporary file and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// `row,col,birth,persistence,value` per pixel; birth and persistence are
/// the pixel centre.
pub fn field_to_csv(field: &ImportanceField) -> String {
    let mut out = String::from("row,col,birth,persistence,value\n");
    for row in 0..field.n_y() {
        for col in 0..field.n_x() {
            let (b, p) = field.spec.pixel_center(row, col);
            out.push_str(&format!("{row},{col},{b},{p},{}\n", field.at(row, col)));
        }
    }
    out
}
