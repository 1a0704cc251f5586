//! Grad-CAM importance fields over persistence-image coordinates.

use crate::error::{Error, Result};
use crate::filtration::PersistencePoint;
use crate::model::{head, ModelParams};
use crate::neural::Tensor;
use crate::vectorize::{bilinear_at, PersistenceImage, PersistenceImageSpec};

/// Nonnegative importance per persistence-image pixel. Row 0 is the lowest
/// persistence, like `PersistenceImage`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceField {
    pub spec: PersistenceImageSpec,
    pub values: Vec<f64>,
    pub class_label: usize,
    /// (height, width) of the conv map the field was computed on.
    pub source_size: (usize, usize),
}

impl ImportanceField {
    pub fn n_x(&self) -> usize {
        self.spec.n_x
    }

    pub fn n_y(&self) -> usize {
        self.spec.n_y
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.spec.n_x + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// (row, col) of the largest value; first in raster order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let i = head::argmax(&self.values);
        (i / self.spec.n_x, i % self.spec.n_x)
    }

    /// Field stored as a `[n_y, n_x]` tensor, placed in `spec`'s frame.
    pub fn from_tensor(t: &Tensor, spec: &PersistenceImageSpec) -> Result<Self> {
        if t.dims() != [spec.n_y, spec.n_x] {
            return Err(Error::shape(format!(
                "field tensor is {:?}, model images are {}x{}",
                t.dims(),
                spec.n_y,
                spec.n_x
            )));
        }
        if t.data().iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("importance fields are nonnegative"));
        }
        Ok(Self {
            spec: spec.clone(),
            values: t.data().to_vec(),
            class_label: 0,
            source_size: (0, 0),
        })
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.spec.n_y, self.spec.n_x], self.values.clone()).expect("field dims")
    }

    /// Element-wise mean of fields sharing a spec.
    pub fn mean(fields: &[ImportanceField]) -> Result<ImportanceField> {
        let first = fields.first().ok_or_else(|| Error::invalid("no fields to average"))?;
        let mut values = vec![0.0; first.values.len()];
        for f in fields {
            if f.spec != first.spec {
                return Err(Error::invalid("fields have different specs"));
            }
            for (a, b) in values.iter_mut().zip(&f.values) {
                *a += b / fields.len() as f64;
            }
        }
        Ok(ImportanceField {
            values,
            ..first.clone()
        })
    }
}

/// `ReLU(sum_c alpha_c A^c)` with `alpha_c` the spatial mean of the gradient
/// on channel `c`. Both tensors are `[C, H, W]`.
pub fn grad_cam_map(activation: &Tensor, gradient: &Tensor) -> Result<Vec<f64>> {
    let (c, h, w) = activation.chw()?;
    if gradient.dims() != activation.dims() {
        return Err(Error::shape("gradient and activation shapes differ"));
    }
    let hw = h * w;
    let mut map = vec![0.0; hw];
    for ch in 0..c {
        let g = &gradient.data()[ch * hw..(ch + 1) * hw];
        let alpha = g.iter().sum::<f64>() / hw as f64;
        for (m, a) in map.iter_mut().zip(&activation.data()[ch * hw..(ch + 1) * hw]) {
            *m += alpha * a;
        }
    }
    for m in &mut map {
        *m = m.max(0.0);
    }
    Ok(map)
}

/// Bilinear resampling with half-pixel alignment (pixel centres map to pixel
/// centres, edges clamp).
pub fn upsample_bilinear(values: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let src = |dst: usize, n_in: usize, n_out: usize| {
        let s = (dst as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5;
        let s = s.clamp(0.0, (n_in - 1) as f64);
        let i0 = s.floor() as usize;
        (i0, (i0 + 1).min(n_in - 1), s - i0 as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        let (y0, y1, ty) = src(r, h, out_h);
        for c in 0..out_w {
            let (x0, x1, tx) = src(c, w, out_w);
            let v = |y: usize, x: usize| values[y * w + x];
            let top = v(y0, x0) * (1.0 - tx) + v(y0, x1) * tx;
            let bottom = v(y1, x0) * (1.0 - tx) + v(y1, x1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Grad-CAM for class `k` on a prepared network input.
pub fn grad_cam_input(params: &ModelParams, input: &Tensor, k: usize) -> Result<ImportanceField> {
    if k >= params.classes.len() {
        return Err(Error::invalid(format!("class index {k} out of range ({} classes)", params.classes.len())));
    }
    if params.prototypes.is_empty() {
        return Err(Error::invalid("model has no fitted prototypes"));
    }
    let tap = params.arch.last_conv_activation()?;
    let trace = params.network.forward(input, crate::neural::ForwardCtx::eval())?;
    let embedding = trace.output().data();
    let (_, grad) = head::score_gradient(embedding, &params.prototypes, params.temperature, k);
    let back = params.network.backward(&trace, &Tensor::from_vec(grad), Some(tap))?;
    let gradient = back.tapped.ok_or_else(|| Error::Internal("tap not reached".into()))?;
    let activation = trace.activation(tap);
    let (_, h, w) = activation.chw()?;
    let coarse = grad_cam_map(activation, &gradient)?;
    let spec = params.image_spec.clone();
    let values = upsample_bilinear(&coarse, h, w, spec.n_y, spec.n_x);
    Ok(ImportanceField {
        spec,
        values,
        class_label: k,
        source_size: (h, w),
    })
}

pub fn grad_cam(params: &ModelParams, images: &[PersistenceImage], k: usize) -> Result<ImportanceField> {
    grad_cam_input(params, &params.input_from_images(images)?, k)
}

/// Importance at a diagram point, interpolated at `(min(b, d), |d - b|)`.
pub fn field_lookup(field: &ImportanceField, point: &PersistencePoint) -> f64 {
    let b = point.birth.min(point.death);
    let p = (point.death - point.birth).abs();
    let s = &field.spec;
    bilinear_at(&field.values, s.n_x, s.n_y, &s.extents, b, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_zero_map() {
        let a = Tensor::new(vec![2, 2, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let g = Tensor::zeros(&[2, 2, 2]);
        assert_eq!(grad_cam_map(&a, &g).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn uniform_single_channel() {
        let a = Tensor::new(vec![1, 3, 3], vec![0.7; 9]).unwrap();
        let g = Tensor::new(vec![1, 3, 3], vec![1.0; 9]).unwrap();
        assert_eq!(grad_cam_map(&a, &g).unwrap(), vec![0.7; 9]);
    }

    #[test]
    fn two_channel_example() {
        let a = Tensor::new(vec![2, 2, 2], vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        let g = Tensor::new(vec![2, 2, 2], vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]).unwrap();
        assert_eq!(grad_cam_map(&a, &g).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn upsampling_keeps_constants_and_bounds() {
        assert_eq!(upsample_bilinear(&[3.0; 4], 2, 2, 8, 8), vec![3.0; 64]);
        let v = [0.0, 1.0, 2.0, 5.0];
        let up = upsample_bilinear(&v, 2, 2, 8, 8);
        assert!(up.iter().all(|&x| (0.0..=5.0).contains(&x)));
        assert_eq!(up[0], 0.0);
        assert_eq!(up[63], 5.0);
        assert_eq!(upsample_bilinear(&[0.0, 4.0], 1, 2, 1, 4), vec![0.0, 1.0, 3.0, 4.0]);
    }
}
