use rand::Rng;

use super::conv::gemm;
use super::Tensor;
use crate::error::{Error, Result};

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Subgradient 0 at the kink.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(x.dims().to_vec(), data).expect("same shape")
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// SimAM attention scaling factors `sigmoid(1/e)` for every neuron, where
/// `1/e = (t - mean)^2 / (4 (var + lambda)) + 1/2` with per-channel spatial
/// mean and population variance.
pub fn simam_scale(x: &Tensor, lambda: f64) -> Result<Tensor> {
    let (c, h, w) = x.chw()?;
    let n = h * w;
    if n < 2 {
        return Err(Error::shape("SimAM needs at least two spatial positions"));
    }
    let mut out = Vec::with_capacity(c * n);
    for plane in x.data().chunks(n) {
        let mean = plane.iter().sum::<f64>() / n as f64;
        let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let denom = 4.0 * (var + lambda);
        out.extend(plane.iter().map(|v| sigmoid((v - mean).powi(2) / denom + 0.5)));
    }
    Tensor::new(vec![c, h, w], out)
}

pub fn simam(x: &Tensor, lambda: f64) -> Result<Tensor> {
    let s = simam_scale(x, lambda)?;
    let data = x.data().iter().zip(s.data()).map(|(a, b)| a * b).collect();
    Tensor::new(x.dims().to_vec(), data)
}

pub fn simam_backward(x: &Tensor, lambda: f64, grad_out: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.chw()?;
    let n = h * w;
    let nf = n as f64;
    let mut gin = vec![0.0; c * n];
    let mut a = vec![0.0; n];
    for ch in 0..c {
        let xs = &x.data()[ch * n..(ch + 1) * n];
        let gs = &grad_out.data()[ch * n..(ch + 1) * n];
        let mean = xs.iter().sum::<f64>() / nf;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
        let vl = var + lambda;
        let mut dvar = 0.0;
        for i in 0..n {
            let d = xs[i] - mean;
            let s = sigmoid(d * d / (4.0 * vl) + 0.5);
            let dz = gs[i] * xs[i] * s * (1.0 - s);
            dvar -= dz * d * d / (4.0 * vl * vl);
            a[i] = dz * d / (2.0 * vl);
            gin[ch * n + i] = gs[i] * s;
        }
        let a_mean = a.iter().sum::<f64>() / nf;
        for i in 0..n {
            let d = xs[i] - mean;
            gin[ch * n + i] += a[i] - a_mean + dvar * 2.0 * d / nf;
        }
    }
    Tensor::new(vec![c, h, w], gin)
}

/// Inverted-dropout keep mask (entries 0 or 1/(1-rate)).
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub fn dropout(x: &Tensor, rate: f64, mode: Mode, rng: &mut impl Rng) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.len(), rate, rng);
    let data = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
    Tensor::new(x.dims().to_vec(), data)
}

/// Affine map `y = W x + b`, weights `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[n_out, n_in]),
            bias: Tensor::zeros(&[n_out]),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn n_out(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.len() != self.n_in() {
            return Err(Error::shape(format!(
                "fully connected layer expects {} inputs, got {}",
                self.n_in(),
                x.len()
            )));
        }
        let mut y = self.bias.data().to_vec();
        gemm(self.n_out(), self.n_in(), 1, self.weight.data(), false, x.data(), false, &mut y, 1.0);
        Ok(Tensor::from_vec(y))
    }

    /// Returns (grad_input, grad_weight, grad_bias).
    pub fn backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        if grad_out.len() != self.n_out() || x.len() != self.n_in() {
            return Err(Error::shape("fully connected gradient has the wrong size"));
        }
        let (o, i) = (self.n_out(), self.n_in());
        let mut gw = vec![0.0; o * i];
        gemm(o, 1, i, grad_out.data(), false, x.data(), false, &mut gw, 0.0);
        let mut gx = vec![0.0; i];
        gemm(i, o, 1, self.weight.data(), true, grad_out.data(), false, &mut gx, 0.0);
        Ok((
            Tensor::new(x.dims().to_vec(), gx)?,
            Tensor::new(vec![o, i], gw)?,
            Tensor::from_vec(grad_out.data().to_vec()),
        ))
    }
}
