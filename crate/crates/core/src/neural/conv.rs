use super::Tensor;
use crate::error::{Error, Result};

/// 2D cross-correlation with square kernels, weights `[out, in, k, k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub struct ConvCache {
    cols: Vec<f64>,
    in_dims: (usize, usize, usize),
    out_hw: (usize, usize),
}

pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Output side length; windows that would run past the padded edge are dropped.
pub fn conv_out_size(size: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = size + 2 * pad;
    if stride == 0 || kernel == 0 || padded < kernel {
        return Err(Error::shape(format!(
            "kernel {kernel} stride {stride} pad {pad} does not fit input size {size}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

impl Conv2d {
    pub fn zeros(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
            weight: Tensor::zeros(&[out_ch, in_ch, kernel, kernel]),
            bias: Tensor::zeros(&[out_ch]),
        }
    }

    fn patch_len(&self) -> usize {
        self.in_ch * self.kernel * self.kernel
    }

    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((
            conv_out_size(h, self.kernel, self.stride, self.pad)?,
            conv_out_size(w, self.kernel, self.stride, self.pad)?,
        ))
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ConvCache)> {
        let (c, h, w) = input.chw()?;
        if c != self.in_ch {
            return Err(Error::shape(format!("conv expects {} channels, got {c}", self.in_ch)));
        }
        let (oh, ow) = self.out_hw(h, w)?;
        let cols = self.im2col(input.data(), h, w, oh, ow);
        let n = oh * ow;
        let mut out = vec![0.0; self.out_ch * n];
        for (o, row) in out.chunks_mut(n).enumerate() {
            row.fill(self.bias.data()[o]);
        }
        gemm(
            self.out_ch,
            self.patch_len(),
            n,
            self.weight.data(),
            false,
            &cols,
            false,
            &mut out,
            1.0,
        );
        Ok((
            Tensor::new(vec![self.out_ch, oh, ow], out)?,
            ConvCache {
                cols,
                in_dims: (c, h, w),
                out_hw: (oh, ow),
            },
        ))
    }

    pub fn backward(&self, cache: &ConvCache, grad_out: &Tensor) -> Result<ConvGrads> {
        let (oh, ow) = cache.out_hw;
        let n = oh * ow;
        if grad_out.len() != self.out_ch * n {
            return Err(Error::shape("conv gradient has the wrong size"));
        }
        let g = grad_out.data();
        let k = self.patch_len();

        let mut gw = vec![0.0; self.out_ch * k];
        gemm(self.out_ch, n, k, g, false, &cache.cols, true, &mut gw, 0.0);
        let gb: Vec<f64> = g.chunks(n).map(|row| row.iter().sum()).collect();

        let mut gcols = vec![0.0; k * n];
        gemm(k, self.out_ch, n, self.weight.data(), true, g, false, &mut gcols, 0.0);
        let (c, h, w) = cache.in_dims;
        let gin = self.col2im(&gcols, c, h, w, oh, ow);

        Ok(ConvGrads {
            input: Tensor::new(vec![c, h, w], gin)?,
            weight: Tensor::new(self.weight.dims().to_vec(), gw)?,
            bias: Tensor::new(vec![self.out_ch], gb)?,
        })
    }

    // Rows are (channel, ky, kx), columns are output positions.
    fn im2col(&self, x: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
        let (k, s, p) = (self.kernel, self.stride, self.pad as isize);
        let n = oh * ow;
        let mut cols = vec![0.0; self.patch_len() * n];
        for c in 0..self.in_ch {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut cols[((c * k + ky) * k + kx) * n..][..n];
                    for oy in 0..oh {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut row[oy * ow..(oy + 1) * ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * s + kx) as isize - p;
                            if ix >= 0 && ix < w as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], c_in: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
        let (k, s, p) = (self.kernel, self.stride, self.pad as isize);
        let n = oh * ow;
        let mut x = vec![0.0; c_in * h * w];
        for c in 0..c_in {
            let plane = &mut x[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &cols[((c * k + ky) * k + kx) * n..][..n];
                    for oy in 0..oh {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..ow {
                            let ix = (ox * s + kx) as isize - p;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += row[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
        x
    }
}

/// C (m x n) = A (m x k) * B (k x n) + beta * C, with optional transposes of
/// row-major inputs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], beta: f64) {
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slices cover m*k, k*n and m*n elements with the strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
