//! Persistence surfaces and images.
//!
//! Each transformed point contributes an isotropic Gaussian of bandwidth
//! sigma, scaled by its weight. Pixel values are exact integrals of the surface
//! over the pixel rectangle, computed from Gaussian CDF differences, so no
//! sampling resolution is involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::{PersistenceDiagram, PointKind};

/// Birth-persistence window `(b_min, b_max, p_min, p_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extents {
    pub b_min: f64,
    pub b_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Extents {
    pub fn new(b_min: f64, b_max: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let e = Self {
            b_min,
            b_max,
            p_min,
            p_max,
        };
        e.check()?;
        Ok(e)
    }

    pub fn check(&self) -> Result<()> {
        let finite = [self.b_min, self.b_max, self.p_min, self.p_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.b_min < self.b_max) || !(self.p_min < self.p_max) {
            return Err(Error::invalid(format!("invalid extents {self:?}")));
        }
        Ok(())
    }

    /// Bounding box of all finite transformed points, padded by `pad` per side.
    pub fn bounding<'a>(diagrams: impl IntoIterator<Item = &'a PersistenceDiagram>, pad: f64) -> Result<Self> {
        let (mut b0, mut b1, mut p0, mut p1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for d in diagrams {
            for t in birth_persistence_transform(d, &Weight::Uniform) {
                b0 = b0.min(t.birth);
                b1 = b1.max(t.birth);
                p0 = p0.min(t.persistence);
                p1 = p1.max(t.persistence);
            }
        }
        if !b0.is_finite() {
            return Err(Error::invalid("no finite points to derive extents from"));
        }
        Self::new(b0 - pad, b1 + pad, p0 - pad, p1 + pad)
    }
}

impl std::str::FromStr for Extents {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad extent '{x}': {e}")))
            .collect::<std::result::Result<_, _>>()?;
        if parts.len() != 4 {
            return Err(format!("extents need 4 comma-separated numbers, got {}", parts.len()));
        }
        Extents::new(parts[0], parts[1], parts[2], parts[3]).map_err(|e| e.to_string())
    }
}

/// Weight table sampled at pixel centres of its own window, read bilinearly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub extents: Extents,
    pub n_x: usize,
    pub n_y: usize,
    /// Row-major, row 0 at `p_min`.
    pub values: Vec<f64>,
}

impl WeightTable {
    pub fn new(extents: Extents, n_x: usize, n_y: usize, values: Vec<f64>) -> Result<Self> {
        extents.check()?;
        if n_x == 0 || n_y == 0 || values.len() != n_x * n_y {
            return Err(Error::shape(format!(
                "weight table {n_x}x{n_y} with {} values",
                values.len()
            )));
        }
        Ok(Self {
            extents,
            n_x,
            n_y,
            values,
        })
    }

    pub fn lookup(&self, b: f64, p: f64) -> f64 {
        bilinear_at(&self.values, self.n_x, self.n_y, &self.extents, b, p)
    }
}

/// Bilinear interpolation between pixel centres of a row-major grid covering
/// `extents`; queries outside clamp to the boundary.
pub fn bilinear_at(values: &[f64], n_x: usize, n_y: usize, extents: &Extents, b: f64, p: f64) -> f64 {
    let fx = (b - extents.b_min) / (extents.b_max - extents.b_min) * n_x as f64 - 0.5;
    let fy = (p - extents.p_min) / (extents.p_max - extents.p_min) * n_y as f64 - 0.5;
    let fx = fx.clamp(0.0, (n_x - 1) as f64);
    let fy = fy.clamp(0.0, (n_y - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(n_x - 1), (y0 + 1).min(n_y - 1));
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    let v = |x: usize, y: usize| values[y * n_x + x];
    let top = v(x0, y0) * (1.0 - tx) + v(x1, y0) * tx;
    let bottom = v(x0, y1) * (1.0 - tx) + v(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    #[default]
    Uniform,
    Persistence,
    Table(WeightTable),
}

impl Weight {
    pub fn eval(&self, b: f64, p: f64) -> f64 {
        match self {
            Weight::Uniform => uniform_weight(b, p),
            Weight::Persistence => persistence_weight(b, p),
            Weight::Table(t) => t.lookup(b, p),
        }
    }
}

pub fn uniform_weight(_b: f64, _p: f64) -> f64 {
    1.0
}

pub fn persistence_weight(_b: f64, p: f64) -> f64 {
    p
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceImageSpec {
    pub n_x: usize,
    pub n_y: usize,
    pub extents: Extents,
    pub sigma: f64,
    pub weight: Weight,
}

impl PersistenceImageSpec {
    pub fn new(n_x: usize, n_y: usize, extents: Extents, sigma: f64, weight: Weight) -> Result<Self> {
        let s = Self {
            n_x,
            n_y,
            extents,
            sigma,
            weight,
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_x == 0 || self.n_y == 0 {
            return Err(Error::invalid("persistence image resolution must be positive"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        self.extents.check()
    }

    /// 40x40, sigma 0.1, uniform weight.
    pub fn default_for(extents: Extents) -> Self {
        Self {
            n_x: 40,
            n_y: 40,
            extents,
            sigma: 0.1,
            weight: Weight::Uniform,
        }
    }

    /// Centre of pixel (row, col) in birth-persistence coordinates.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let e = &self.extents;
        let db = (e.b_max - e.b_min) / self.n_x as f64;
        let dp = (e.p_max - e.p_min) / self.n_y as f64;
        (e.b_min + (col as f64 + 0.5) * db, e.p_min + (row as f64 + 0.5) * dp)
    }

    /// Fractional (col, row) of a birth-persistence coordinate, pixel centres at integers.
    pub fn to_pixel(&self, b: f64, p: f64) -> (f64, f64) {
        let e = &self.extents;
        (
            (b - e.b_min) / (e.b_max - e.b_min) * self.n_x as f64 - 0.5,
            (p - e.p_min) / (e.p_max - e.p_min) * self.n_y as f64 - 0.5,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformedPoint {
    pub birth: f64,
    pub persistence: f64,
    pub weight: f64,
    /// Came from the downward pass of extended persistence.
    pub extended: bool,
}

/// T(b, d) = (b, |d - b|) with weights attached. Essential points are dropped.
/// Points below the diagonal (extended 1D) use their lower coordinate as birth
/// so they land where their mirror image would.
pub fn birth_persistence_transform(d: &PersistenceDiagram, weight: &Weight) -> Vec<TransformedPoint> {
    d.points
        .iter()
        .filter(|p| p.is_finite() && p.kind != PointKind::Essential)
        .map(|p| {
            let birth = p.birth.min(p.death);
            let persistence = p.persistence();
            TransformedPoint {
                birth,
                persistence,
                weight: weight.eval(birth, persistence),
                extended: matches!(p.kind, PointKind::Extended | PointKind::Relative) && p.is_below_diagonal(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersistenceImage {
    pub spec: PersistenceImageSpec,
    /// `n_y` rows by `n_x` columns, row 0 at `p_min`.
    pub pixels: Vec<f64>,
}

impl PersistenceImage {
    pub fn zeros(spec: PersistenceImageSpec) -> Self {
        let n = spec.n_x * spec.n_y;
        Self {
            spec,
            pixels: vec![0.0; n],
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.spec.n_x + col]
    }

    pub fn total(&self) -> f64 {
        self.pixels.iter().sum()
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Integral of a 1D Gaussian over each of `n` equal bins covering [lo, hi].
fn bin_masses(center: f64, sigma: f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    let cdf: Vec<f64> = (0..=n)
        .map(|i| normal_cdf((lo + step * i as f64 - center) / sigma))
        .collect();
    cdf.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn persistence_image(d: &PersistenceDiagram, spec: &PersistenceImageSpec) -> Result<PersistenceImage> {
    spec.check()?;
    let points = birth_persistence_transform(d, &spec.weight);
    Ok(image_of_points(&points, spec))
}

pub(crate) fn image_of_points(points: &[TransformedPoint], spec: &PersistenceImageSpec) -> PersistenceImage {
    let mut img = PersistenceImage::zeros(spec.clone());
    let e = &spec.extents;
    for t in points {
        if t.weight == 0.0 {
            continue;
        }
        let gx = bin_masses(t.birth, spec.sigma, e.b_min, e.b_max, spec.n_x);
        let gy = bin_masses(t.persistence, spec.sigma, e.p_min, e.p_max, spec.n_y);
        for (row, &my) in gy.iter().enumerate() {
            if my == 0.0 {
                continue;
            }
            let out = &mut img.pixels[row * spec.n_x..(row + 1) * spec.n_x];
            for (o, &mx) in out.iter_mut().zip(&gx) {
                *o += t.weight * mx * my;
            }
        }
    }
    img
}

/// Image channels for the network: one channel, or two (upward features,
/// then extended/relative features) when `split_extended` is set.
pub fn persistence_image_channels(
    d: &PersistenceDiagram,
    spec: &PersistenceImageSpec,
    split_extended: bool,
) -> Result<Vec<PersistenceImage>> {
    spec.check()?;
    if !split_extended {
        return Ok(vec![persistence_image(d, spec)?]);
    }
    let upward: Vec<_> = d
        .points
        .iter()
        .filter(|p| matches!(p.kind, PointKind::Ordinary | PointKind::Essential))
        .cloned()
        .collect();
    let downward: Vec<_> = d
        .points
        .iter()
        .filter(|p| matches!(p.kind, PointKind::Extended | PointKind::Relative))
        .cloned()
        .collect();
    Ok(vec![
        persistence_image(&PersistenceDiagram::new(upward, ""), spec)?,
        persistence_image(&PersistenceDiagram::new(downward, ""), spec)?,
    ])
}
