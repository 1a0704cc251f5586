//! Grayscale grids from PNG or PGM. Values are raw grey levels (0..=255 for
//! 8-bit, 0..=65535 for 16-bit, PGM samples as stored); no rescaling.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use super::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::filtration::ScalarGrid;

fn pgm_from_bytes(bytes: &[u8], what: &str) -> Result<ScalarGrid> {
    let mut pos = 0;
    // header tokens: magic, width, height, maxval; '#' comments run to end of line
    let token = |pos: &mut usize| -> Result<(usize, String)> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::parse(what, format!("byte {start}"), "unexpected end of file"));
        }
        Ok((start, String::from_utf8_lossy(&bytes[start..*pos]).into_owned()))
    };
    let (_, magic) = token(&mut pos)?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        _ => return Err(Error::parse(what, "byte 0", "not a P2/P5 graymap")),
    };
    let mut header = [0usize; 3];
    for h in &mut header {
        let (at, t) = token(&mut pos)?;
        *h = t
            .parse()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::parse(what, format!("byte {at}"), format!("'{t}' is not a positive integer")))?;
    }
    let [w, h, maxval] = header;
    if maxval > 65535 {
        return Err(Error::parse(what, "header", "maxval above 65535"));
    }
    let n = w.checked_mul(h).ok_or_else(|| Error::parse(what, "header", "image too large"))?;
    let mut values = Vec::with_capacity(n.min(1 << 24));
    if binary {
        pos += 1;
        let width = if maxval > 255 { 2 } else { 1 };
        let need = n * width;
        if bytes.len() < pos || bytes.len() - pos < need {
            return Err(Error::parse(
                what,
                format!("byte {}", bytes.len()),
                format!("truncated: {need} sample bytes expected from byte {pos}"),
            ));
        }
        for c in bytes[pos..pos + need].chunks(width) {
            values.push(if width == 2 { u16::from_be_bytes([c[0], c[1]]) as f64 } else { c[0] as f64 });
        }
    } else {
        for _ in 0..n {
            let (at, t) = token(&mut pos)?;
            let v: usize = t
                .parse()
                .map_err(|_| Error::parse(what, format!("byte {at}"), format!("'{t}' is not a sample")))?;
            if v > maxval {
                return Err(Error::parse(what, format!("byte {at}"), format!("sample {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64);
        }
    }
    ScalarGrid::new(w, h, values)
}

pub fn load_grid(path: &Path) -> Result<ScalarGrid> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        return pgm_from_bytes(&bytes, &path.display().to_string());
    }
    let img = image::load_from_memory(&bytes)
        .map_err(|e| Error::parse(path.display().to_string(), "image", e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = match img {
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        other if other.color().has_color() => {
            return Err(Error::invalid(format!("{}: expected a grayscale image", path.display())))
        }
        other => other.into_luma16().into_raw().into_iter().map(f64::from).collect(),
    };
    ScalarGrid::new(w, h, values)
}

/// Writes an 8-bit grid if every value is an integer in 0..=255, 16-bit if
/// in 0..=65535; anything else is rejected. Format follows the extension
/// (`.png`, `.pgm`).
pub fn save_grid(path: &Path, grid: &ScalarGrid) -> Result<()> {
    let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => ImageFormat::Png,
        Some("pgm") => ImageFormat::Pnm,
        _ => return Err(Error::invalid(format!("{}: grid files must be .png or .pgm", path.display()))),
    };
    let vals = grid.values();
    if vals.iter().any(|v| v.fract() != 0.0 || *v < 0.0 || *v > 65535.0) {
        return Err(Error::invalid("grid values must be integers in 0..=65535 to save as an image"));
    }
    let (w, h) = (grid.width() as u32, grid.height() as u32);
    if format == ImageFormat::Pnm {
        let maxval = vals.iter().cloned().fold(1.0, f64::max).max(255.0);
        let mut out = format!("P5\n{w} {h}\n{maxval}\n").into_bytes();
        for &v in vals {
            if maxval > 255.0 {
                out.extend_from_slice(&(v as u16).to_be_bytes());
            } else {
                out.push(v as u8);
            }
        }
        return write_atomic(path, &out);
    }
    let img = if vals.iter().all(|&v| v <= 255.0) {
        DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, vals.iter().map(|&v| v as u8).collect()).expect("size"),
        )
    } else {
        DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, vals.iter().map(|&v| v as u16).collect()).expect("size"),
        )
    };
    let mut bytes = std::io::Cursor::new(Vec::new());
    img.write_to(&mut bytes, format)
        .map_err(|e| Error::Internal(format!("image encoding failed: {e}")))?;
    write_atomic(path, bytes.get_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let g8 = ScalarGrid::new(3, 2, vec![0.0, 5.0, 255.0, 17.0, 1.0, 2.0]).unwrap();
        let g16 = ScalarGrid::new(2, 2, vec![0.0, 300.0, 65535.0, 7.0]).unwrap();
        for name in ["a.png", "a.pgm"] {
            let p = dir.path().join(name);
            save_grid(&p, &g8).unwrap();
            assert_eq!(load_grid(&p).unwrap(), g8);
            save_grid(&p, &g16).unwrap();
            assert_eq!(load_grid(&p).unwrap(), g16);
        }
        let frac = ScalarGrid::new(1, 1, vec![0.5]).unwrap();
        assert!(save_grid(&dir.path().join("f.png"), &frac).is_err());
        assert!(save_grid(&dir.path().join("f.jpg"), &g8).is_err());
    }

    #[test]
    fn pgm_text_parses() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.pgm");
        std::fs::write(&p, "P2\n3 2\n9\n1 5 2\n0 9 3\n").unwrap();
        let g = load_grid(&p).unwrap();
        assert_eq!((g.width(), g.height()), (3, 2));
        assert_eq!(g.values(), &[1.0, 5.0, 2.0, 0.0, 9.0, 3.0]);
        std::fs::write(&p, "P2\n3 2\n9\n1 5").unwrap();
        assert!(load_grid(&p).is_err());
        std::fs::write(&p, b"P5 2 2 255\n\x01\x02\x03").unwrap();
        let e = load_grid(&p).unwrap_err().to_string();
        assert!(e.contains("truncated"), "{e}");
    }
}
