//! Rendering: importance-field heatmaps with contours, diagram overlays and
//! in-image feature tinting.

mod contour;
mod tables;

pub use contour::{contours_nested, marching_squares, ContourSet};

use std::path::Path;

use crate::error::{Error, Result};
use crate::explain::{field_lookup, ImportanceField};
use crate::filtration::{feature_region, MergeHistory, PersistenceDiagram, PointKind, ScalarGrid};
use crate::vectorize::bilinear_at;

pub type Rgb = [u8; 3];

pub const CONTOUR_LEVELS: [f64; 3] = [0.5, 0.7, 0.9];
const DIAGONAL: Rgb = [255, 255, 255];
const CONTOUR: Rgb = [0, 255, 0];
const UPWARD_MARKER: Rgb = [0, 200, 255];
const EXTENDED_MARKER: Rgb = [255, 120, 0];
const TINT_ALPHA: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Colormap {
    Magma,
    Viridis,
}

impl std::str::FromStr for Colormap {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "magma" => Ok(Colormap::Magma),
            "viridis" => Ok(Colormap::Viridis),
            other => Err(format!("unknown colormap '{other}'")),
        }
    }
}

fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Linear interpolation in the 256-entry table; `t` is clamped to [0, 1]
/// (NaN maps to 0).
pub fn colormap(t: f64, map: Colormap) -> Rgb {
    let table = match map {
        Colormap::Magma => &tables::MAGMA,
        Colormap::Viridis => &tables::VIRIDIS,
    };
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let x = t * 255.0;
    let i = (x.floor() as usize).min(254);
    let f = x - i as f64;
    let (a, b) = (table[i], table[i + 1]);
    [0, 1, 2].map(|c| to_u8(a[c] * (1.0 - f) + b[c] * f))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 at the top.
    pub pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        Ok(Self {
            width,
            height,
            pixels: vec![fill; width * height],
        })
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = c;
        }
    }

    /// One-pixel line by uniform sampling along the longer axis.
    pub fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: Rgb) {
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.set(
                (x0 + (x1 - x0) * t).floor() as i64,
                (y0 + (y1 - y0) * t).floor() as i64,
                c,
            );
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().flatten());
        out
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .ok_or_else(|| Error::Internal("raster size".into()))?;
        let mut buf = std::io::Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png)
            .map_err(|e| Error::Internal(format!("png encoding failed: {e}")))?;
        Ok(buf.into_inner())
    }

    /// PNG unless the extension is `.ppm`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let ppm = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("ppm"));
        let bytes = if ppm { self.to_ppm() } else { self.to_png()? };
        crate::io::write_atomic(path, &bytes)
    }
}

/// Maps diagram coordinates (birth on x, death on y, y up) to raster
/// coordinates (x right, y down, pixel centres at +0.5).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub width: usize,
    pub height: usize,
}

impl Viewport {
    /// Window covering every diagram point whose birth-persistence image lies
    /// inside the field's extents.
    pub fn for_field(field: &ImportanceField, width: usize, height: usize) -> Self {
        let e = &field.spec.extents;
        Self {
            x_min: e.b_min,
            x_max: e.b_max,
            y_min: e.b_min + e.p_min.min(0.0),
            y_max: e.b_max + e.p_max,
            width,
            height,
        }
    }

    pub fn to_raster(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.x_min) / (self.x_max - self.x_min) * self.width as f64,
            (self.y_max - y) / (self.y_max - self.y_min) * self.height as f64,
        )
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.x_min + (col as f64 + 0.5) / self.width as f64 * (self.x_max - self.x_min),
            self.y_max - (row as f64 + 0.5) / self.height as f64 * (self.y_max - self.y_min),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldRender {
    pub width: usize,
    pub height: usize,
    /// Also paint the field below the diagonal, where extended pairs with
    /// birth > death live.
    pub mirror: bool,
}

impl FieldRender {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mirror: false,
        }
    }
}

/// Field value at diagram location (x, y); zero outside the extents.
fn field_at(field: &ImportanceField, x: f64, y: f64, mirror: bool) -> f64 {
    let (b, p) = if y >= x {
        (x, y - x)
    } else if mirror {
        (y, x - y)
    } else {
        return 0.0;
    };
    let e = &field.spec.extents;
    if b < e.b_min || b > e.b_max || p < e.p_min || p > e.p_max {
        return 0.0;
    }
    bilinear_at(&field.values, field.spec.n_x, field.spec.n_y, e, b, p)
}

/// Contours at 50/70/90% of the field maximum, in field grid coordinates.
pub fn field_contours(field: &ImportanceField) -> Vec<ContourSet> {
    let max = field.max();
    if max <= 0.0 {
        return Vec::new();
    }
    CONTOUR_LEVELS
        .iter()
        .map(|l| marching_squares(&field.values, field.spec.n_x, field.spec.n_y, l * max))
        .collect()
}

/// Magma heatmap (normalised by the field maximum) in diagram coordinates,
/// the diagonal, and green contours.
pub fn render_field(field: &ImportanceField, opts: FieldRender) -> Result<RasterImage> {
    let mut img = RasterImage::new(opts.width, opts.height, colormap(0.0, Colormap::Magma))?;
    let view = Viewport::for_field(field, opts.width, opts.height);
    let max = field.max();
    if max > 0.0 {
        for row in 0..opts.height {
            for col in 0..opts.width {
                let (x, y) = view.pixel_center(col, row);
                let t = field_at(field, x, y, opts.mirror) / max;
                img.pixels[row * opts.width + col] = colormap(t, Colormap::Magma);
            }
        }
    }
    let lo = view.x_min.max(view.y_min);
    let hi = view.x_max.min(view.y_max);
    if lo < hi {
        img.line(view.to_raster(lo, lo), view.to_raster(hi, hi), DIAGONAL);
    }
    let spec = &field.spec;
    let db = (spec.extents.b_max - spec.extents.b_min) / spec.n_x as f64;
    let dp = (spec.extents.p_max - spec.extents.p_min) / spec.n_y as f64;
    let to_bp = |(cx, cy): (f64, f64)| (spec.extents.b_min + (cx + 0.5) * db, spec.extents.p_min + (cy + 0.5) * dp);
    for set in field_contours(field) {
        for seg in &set.segments {
            let (b0, p0) = to_bp(seg[0]);
            let (b1, p1) = to_bp(seg[1]);
            img.line(view.to_raster(b0, b0 + p0), view.to_raster(b1, b1 + p1), CONTOUR);
            if opts.mirror {
                img.line(view.to_raster(b0 + p0, b0), view.to_raster(b1 + p1, b1), CONTOUR);
            }
        }
    }
    Ok(img)
}

/// Field render with the diagram's finite points as 3x3 markers; extended
/// and relative pairs in a second colour. Points with birth > death plot
/// below the diagonal.
pub fn render_diagram_overlay(d: &PersistenceDiagram, field: &ImportanceField, opts: FieldRender) -> Result<RasterImage> {
    let mut img = render_field(field, opts)?;
    let view = Viewport::for_field(field, opts.width, opts.height);
    for p in d.finite_points() {
        let (x, y) = view.to_raster(p.birth, p.death);
        let color = match p.kind {
            PointKind::Extended | PointKind::Relative => EXTENDED_MARKER,
            _ => UPWARD_MARKER,
        };
        let (cx, cy) = (x.floor() as i64, y.floor() as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                img.set(cx + dx, cy + dy, color);
            }
        }
    }
    Ok(img)
}

/// Grayscale image of the grid, each finite diagram point's feature region
/// tinted with magma(importance / field max). Regions are painted in
/// ascending importance, so overlaps show the most important feature.
pub fn render_inimage(
    grid: &ScalarGrid,
    d: &PersistenceDiagram,
    history: &MergeHistory,
    field: &ImportanceField,
    scale: usize,
) -> Result<RasterImage> {
    if history.num_cells() != grid.len() {
        return Err(Error::invalid("merge history does not belong to this grid"));
    }
    let scale = scale.max(1);
    let (lo, hi) = grid
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let gray = |v: f64| if hi > lo { ((v - lo) / (hi - lo) * 255.0).round() as u8 } else { 0 };
    let mut regions = Vec::new();
    for p in d.finite_points() {
        let region = feature_region(grid, history, p)?;
        regions.push((field_lookup(field, p), region.pixels));
    }
    regions.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut paint: Vec<Option<f64>> = vec![None; grid.len()];
    for (importance, pixels) in &regions {
        for &px in pixels {
            paint[px] = Some(*importance);
        }
    }
    let max = field.max();
    let mut img = RasterImage::new(grid.width() * scale, grid.height() * scale, [0, 0, 0])?;
    for cell in 0..grid.len() {
        let g = gray(grid.value(cell)) as f64;
        let c = match paint[cell] {
            Some(v) => {
                let t = if max > 0.0 { v / max } else { 0.0 };
                let m = colormap(t, Colormap::Magma);
                m.map(|ch| (TINT_ALPHA * ch as f64 + (1.0 - TINT_ALPHA) * g).round() as u8)
            }
            None => [g as u8; 3],
        };
        let (x, y) = (cell % grid.width(), cell / grid.width());
        for sy in 0..scale {
            for sx in 0..scale {
                img.pixels[(y * scale + sy) * img.width + x * scale + sx] = c;
            }
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magma_endpoints() {
        assert_eq!(colormap(0.0, Colormap::Magma), [0x00, 0x00, 0x04]);
        assert_eq!(colormap(1.0, Colormap::Magma), [0xFC, 0xFD, 0xBF]);
        assert_eq!(colormap(-3.0, Colormap::Magma), colormap(0.0, Colormap::Magma));
        assert_eq!(colormap(0.0, Colormap::Viridis), [0x44, 0x01, 0x54]);
    }

    #[test]
    fn midpoint_blend() {
        let a = tables::MAGMA[127];
        let b = tables::MAGMA[128];
        let want = [0, 1, 2].map(|c| to_u8(0.5 * (a[c] + b[c])));
        assert_eq!(colormap(0.5, Colormap::Magma), want);
    }

    #[test]
    fn ppm_header() {
        let img = RasterImage::new(2, 1, [1, 2, 3]).unwrap();
        assert_eq!(img.to_ppm(), b"P6\n2 1\n255\n\x01\x02\x03\x01\x02\x03".to_vec());
        assert!(RasterImage::new(0, 1, [0; 3]).is_err());
    }
}
