//! Model file: `TLNS`, u32 version, u64 length + JSON header (architecture,
//! image spec, channel split, temperature), u32 class count with u32
//! length-prefixed UTF-8 names, then tensors in the tensor binary format:
//! prototypes `[K, D]`, u64 N then (if N > 0) training embeddings `[N, D]`
//! and training labels `[N]`, and u32 count followed by every network parameter in layer order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::{write_tensor, Reader};
use super::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::model::{ArchitectureSpec, ModelParams};
use crate::neural::{Network, Tensor};
use crate::vectorize::PersistenceImageSpec;

const MAGIC: &[u8; 4] = b"TLNS";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    architecture: ArchitectureSpec,
    image_spec: PersistenceImageSpec,
    split_extended: bool,
    temperature: f64,
}

fn rows(v: &[Vec<f64>], dim: usize) -> Tensor {
    Tensor::new(vec![v.len(), dim], v.concat()).expect("row lengths checked")
}

pub fn model_to_bytes(m: &ModelParams) -> Result<Vec<u8>> {
    m.check()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let header = serde_json::to_vec(&Header {
        architecture: m.arch.clone(),
        image_spec: m.image_spec.clone(),
        split_extended: m.split_extended,
        temperature: m.temperature,
    })
    .map_err(|e| Error::Internal(format!("header serialization: {e}")))?;
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(m.classes.len() as u32).to_le_bytes());
    for c in &m.classes {
        out.extend_from_slice(&(c.len() as u32).to_le_bytes());
        out.extend_from_slice(c.as_bytes());
    }
    let dim = m.arch.embedding_dim;
    write_tensor(&mut out, &rows(&m.prototypes, dim));
    out.extend_from_slice(&(m.train_embeddings.len() as u64).to_le_bytes());
    if !m.train_embeddings.is_empty() {
        write_tensor(&mut out, &rows(&m.train_embeddings, dim));
        write_tensor(
            &mut out,
            &Tensor::from_vec(m.train_labels.iter().map(|&l| l as f64).collect()),
        );
    }
    let params: Vec<&Tensor> = m.network.params().collect();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        write_tensor(&mut out, p);
    }
    Ok(out)
}

fn unrows(t: Tensor, dim: usize, r: &Reader) -> Result<Vec<Vec<f64>>> {
    if t.dims().len() != 2 || t.dims()[1] != dim {
        return Err(r.error(format!("expected a [_, {dim}] tensor, got {:?}", t.dims())));
    }
    Ok(t.data().chunks(dim.max(1)).map(<[f64]>::to_vec).collect())
}

pub fn model_from_bytes(bytes: &[u8], what: &str) -> Result<ModelParams> {
    let mut r = Reader::new(bytes, what);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.error(format!("unsupported model version {version}")));
    }
    let len = r.u64()? as usize;
    let start = r.pos;
    let header: Header = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::parse(what, format!("byte {start}"), format!("model header: {e}")))?;
    let n_classes = r.u32()? as usize;
    let mut classes = Vec::with_capacity(n_classes.min(1 << 16));
    for _ in 0..n_classes {
        let n = r.u32()? as usize;
        let at = r.pos;
        let name = std::str::from_utf8(r.take(n)?)
            .map_err(|_| Error::parse(what, format!("byte {at}"), "class name is not UTF-8"))?;
        classes.push(name.to_string());
    }
    let dim = header.architecture.embedding_dim;
    let t = r.tensor()?;
    let prototypes = unrows(t, dim, &r)?;
    let n_train = r.u64()?;
    let (mut train_embeddings, mut train_labels) = (Vec::new(), Vec::new());
    if n_train > 0 {
        let t = r.tensor()?;
        train_embeddings = unrows(t, dim, &r)?;
        let labels = r.tensor()?;
        if labels.data().iter().any(|&l| l < 0.0 || l.fract() != 0.0) {
            return Err(r.error("labels must be nonnegative integers"));
        }
        train_labels = labels.data().iter().map(|&l| l as usize).collect();
        if train_embeddings.len() as u64 != n_train || train_labels.len() as u64 != n_train {
            return Err(r.error(format!("expected {n_train} training rows and labels")));
        }
    }
    let specs = header.architecture.layer_specs()?;
    let mut network = Network::zeros(&specs);
    let count = r.u32()? as usize;
    let expected = network.params().count();
    if count != expected {
        return Err(r.error(format!("expected {expected} parameter tensors, file has {count}")));
    }
    for p in network.params_mut() {
        let at = r.pos;
        let t = r.tensor()?;
        if t.dims() != p.dims() {
            return Err(Error::parse(
                what,
                format!("byte {at}"),
                format!("parameter shape {:?}, architecture needs {:?}", t.dims(), p.dims()),
            ));
        }
        *p = t;
    }
    if r.remaining() != 0 {
        return Err(r.error("trailing bytes after model"));
    }
    let m = ModelParams {
        arch: header.architecture,
        image_spec: header.image_spec,
        split_extended: header.split_extended,
        classes,
        network,
        prototypes,
        temperature: header.temperature,
        train_embeddings,
        train_labels,
    };
    m.check().map_err(|e| Error::parse(what, "model", e.to_string()))?;
    Ok(m)
}

pub fn save_model(path: &Path, m: &ModelParams) -> Result<()> {
    write_atomic(path, &model_to_bytes(m)?)
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    model_from_bytes(&read_bytes(path)?, &path.display().to_string())
}
