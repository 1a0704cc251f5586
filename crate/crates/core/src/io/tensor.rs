//! Tensor binary: `TNSR`, u32 version, u8 dtype tag (1 = f64), u8 ndim,
//! ndim u64 dims, then the payload. All little-endian.

use std::path::Path;

use super::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::neural::Tensor;

const MAGIC: &[u8; 4] = b"TNSR";
const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

pub fn tensor_to_bytes(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + 8 * t.dims().len() + 8 * t.len());
    write_tensor(&mut out, t);
    out
}

pub(crate) fn write_tensor(out: &mut Vec<u8>, t: &Tensor) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F64);
    out.push(t.dims().len() as u8);
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Cursor over a byte buffer whose errors report the byte offset.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pub pos: usize,
    what: &'a str,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], what: &'a str) -> Self {
        Self { bytes, pos: 0, what }
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(self.what, format!("byte {}", self.pos), message)
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(format!(
                "truncated: need {n} more bytes, {} available",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        let start = self.pos;
        if self.take(4)? != m {
            self.pos = start;
            return Err(self.error(format!("bad magic, expected {}", String::from_utf8_lossy(m))));
        }
        Ok(())
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn tensor(&mut self) -> Result<Tensor> {
        self.magic(MAGIC)?;
        let version = self.u32()?;
        if version != VERSION {
            self.pos -= 4;
            return Err(self.error(format!("unsupported tensor version {version}")));
        }
        let dtype = self.u8()?;
        if dtype != DTYPE_F64 {
            self.pos -= 1;
            return Err(self.error(format!("unsupported dtype tag {dtype}")));
        }
        let ndim = self.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        let mut len: usize = 1;
        for _ in 0..ndim {
            let d = self.u64()?;
            len = usize::try_from(d)
                .ok()
                .and_then(|d| len.checked_mul(d))
                .ok_or_else(|| self.error("tensor size overflows"))?;
            dims.push(d as usize);
        }
        if len.checked_mul(8).map_or(true, |b| b > self.remaining()) {
            return Err(self.error(format!("truncated: payload of {len} values missing")));
        }
        let data = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Tensor::new(dims, data)
    }
}

pub fn tensor_from_bytes(bytes: &[u8], what: &str) -> Result<Tensor> {
    let mut r = Reader::new(bytes, what);
    let t = r.tensor()?;
    if r.remaining() != 0 {
        return Err(r.error("trailing bytes after tensor"));
    }
    Ok(t)
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    tensor_from_bytes(&read_bytes(path)?, &path.display().to_string())
}

pub fn save_tensor(path: &Path, t: &Tensor) -> Result<()> {
    write_atomic(path, &tensor_to_bytes(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitwise_round_trip() {
        let t = Tensor::new(vec![2, 3], vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300, -7.5, f64::EPSILON]).unwrap();
        let bytes = tensor_to_bytes(&t);
        assert_eq!(&bytes[..4], b"TNSR");
        let back = tensor_from_bytes(&bytes, "t").unwrap();
        assert_eq!(back.dims(), t.dims());
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&t));
    }

    #[test]
    fn truncation_names_offset() {
        let t = Tensor::new(vec![4], vec![1.0; 4]).unwrap();
        let bytes = tensor_to_bytes(&t);
        let e = tensor_from_bytes(&bytes[..bytes.len() - 3], "t").unwrap_err().to_string();
        assert!(e.contains("byte 18") && e.contains("truncated"), "{e}");
        let e = tensor_from_bytes(&bytes[..6], "t").unwrap_err().to_string();
        assert!(e.contains("byte 4"), "{e}");
        let e = tensor_from_bytes(b"NOPE", "t").unwrap_err().to_string();
        assert!(e.contains("byte 0") && e.contains("magic"), "{e}");
    }
}
