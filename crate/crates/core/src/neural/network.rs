use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{Conv2d, ConvCache};
use super::layers::{self, Linear, Mode};
use super::{keyed_rng, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Relu,
    SimAm {
        lambda: f64,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    FullyConnected {
        n_in: usize,
        n_out: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    Relu,
    SimAm { lambda: f64 },
    Dropout { rate: f64 },
    Flatten,
    Linear(Linear),
}

impl Layer {
    pub fn zeros(spec: &LayerSpec) -> Self {
        match *spec {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                pad,
            } => Layer::Conv(Conv2d::zeros(in_ch, out_ch, kernel, stride, pad)),
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::SimAm { lambda } => Layer::SimAm { lambda },
            LayerSpec::Dropout { rate } => Layer::Dropout { rate },
            LayerSpec::Flatten => Layer::Flatten,
            LayerSpec::FullyConnected { n_in, n_out } => Layer::Linear(Linear::zeros(n_in, n_out)),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv(c) => vec![&c.weight, &c.bias],
            Layer::Linear(l) => vec![&l.weight, &l.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Linear(l) => vec![&mut l.weight, &mut l.bias],
            _ => vec![],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Relu => "relu",
            Layer::SimAm { .. } => "simam",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
            Layer::Linear(_) => "fc",
        }
    }

    /// He-uniform weights, zero biases.
    fn init(&mut self, rng: &mut impl Rng) {
        let (weight, fan_in) = match self {
            Layer::Conv(c) => {
                let fan_in = c.in_ch * c.kernel * c.kernel;
                (&mut c.weight, fan_in)
            }
            Layer::Linear(l) => {
                let fan_in = l.n_in();
                (&mut l.weight, fan_in)
            }
            _ => return,
        };
        let bound = (6.0 / fan_in as f64).sqrt();
        for w in weight.data_mut() {
            *w = rng.random_range(-bound..bound);
        }
    }
}

/// Dropout masks are keyed by `(seed, layer index, step)`.
#[derive(Clone, Copy, Debug)]
pub struct ForwardCtx {
    pub mode: Mode,
    pub seed: u64,
    pub step: u64,
}

impl ForwardCtx {
    pub fn eval() -> Self {
        Self {
            mode: Mode::Eval,
            seed: 0,
            step: 0,
        }
    }

    pub fn train(seed: u64, step: u64) -> Self {
        Self {
            mode: Mode::Train,
            seed,
            step,
        }
    }
}

enum Cache {
    None,
    Conv(ConvCache),
    Mask(Vec<f64>),
}

/// Everything the backward pass needs from one forward pass.
pub struct Trace {
    /// `inputs[i]` is the input of layer `i`; the last entry is the network output.
    inputs: Vec<Tensor>,
    caches: Vec<Cache>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.inputs.last().expect("trace has the input")
    }

    /// Output of layer `i`.
    pub fn activation(&self, i: usize) -> &Tensor {
        &self.inputs[i + 1]
    }
}

pub struct Backward {
    /// One entry per layer, in `Layer::params` order.
    pub params: Vec<Vec<Tensor>>,
    pub input: Tensor,
    /// Gradient with respect to the output of the tapped layer.
    pub tapped: Option<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn zeros(specs: &[LayerSpec]) -> Self {
        Self {
            layers: specs.iter().map(Layer::zeros).collect(),
        }
    }

    pub fn init(specs: &[LayerSpec], seed: u64) -> Self {
        let mut net = Self::zeros(specs);
        for (i, layer) in net.layers.iter_mut().enumerate() {
            layer.init(&mut keyed_rng(seed, i as u64, u64::MAX));
        }
        net
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(Tensor::len).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| l.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut())
    }

    /// Which inputs of each ReLU layer were positive in `trace`. Two traces
    /// with the same pattern lie on one smooth piece of the network.
    pub fn relu_pattern(&self, trace: &Trace) -> Vec<bool> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, Layer::Relu))
            .flat_map(|(i, _)| trace.inputs[i].data().iter().map(|&v| v > 0.0))
            .collect()
    }

    pub fn forward(&self, x: &Tensor, ctx: ForwardCtx) -> Result<Trace> {
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut caches = Vec::with_capacity(self.layers.len());
        inputs.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = inputs.last().unwrap();
            let (y, cache) = match layer {
                Layer::Conv(c) => {
                    let (y, cache) = c.forward(x)?;
                    (y, Cache::Conv(cache))
                }
                Layer::Relu => (layers::relu(x), Cache::None),
                Layer::SimAm { lambda } => (layers::simam(x, *lambda)?, Cache::None),
                Layer::Dropout { rate } => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(Error::invalid(format!("dropout rate must be in [0, 1), got {rate}")));
                    }
                    if ctx.mode == Mode::Eval || *rate == 0.0 {
                        (x.clone(), Cache::None)
                    } else {
                        let mut rng = keyed_rng(ctx.seed, i as u64, ctx.step);
                        let mask = layers::dropout_mask(x.len(), *rate, &mut rng);
                        let data = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
                        (Tensor::new(x.dims().to_vec(), data)?, Cache::Mask(mask))
                    }
                }
                Layer::Flatten => (x.clone().reshape(&[x.len()])?, Cache::None),
                Layer::Linear(l) => (l.forward(x)?, Cache::None),
            };
            inputs.push(y);
            caches.push(cache);
        }
        Ok(Trace { inputs, caches })
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let mut t = self.forward(x, ForwardCtx::eval())?;
        Ok(t.inputs.pop().unwrap())
    }

    pub fn backward(&self, trace: &Trace, grad_out: &Tensor, tap: Option<usize>) -> Result<Backward> {
        if grad_out.len() != trace.output().len() {
            return Err(Error::shape("output gradient has the wrong size"));
        }
        let mut g = grad_out.clone();
        let mut params = vec![Vec::new(); self.layers.len()];
        let mut tapped = None;
        for i in (0..self.layers.len()).rev() {
            if tap == Some(i) {
                tapped = Some(g.clone());
            }
            let x = &trace.inputs[i];
            g = match (&self.layers[i], &trace.caches[i]) {
                (Layer::Conv(c), Cache::Conv(cache)) => {
                    let grads = c.backward(cache, &g)?;
                    params[i] = vec![grads.weight, grads.bias];
                    grads.input
                }
                (Layer::Relu, _) => layers::relu_backward(x, &g),
                (Layer::SimAm { lambda }, _) => layers::simam_backward(x, *lambda, &g)?,
                (Layer::Dropout { .. }, Cache::Mask(mask)) => {
                    let data = g.data().iter().zip(mask).map(|(a, m)| a * m).collect();
                    Tensor::new(g.dims().to_vec(), data)?
                }
                (Layer::Dropout { .. }, _) => g,
                (Layer::Flatten, _) => g.reshape(x.dims())?,
                (Layer::Linear(l), _) => {
                    let (gx, gw, gb) = l.backward(x, &g)?;
                    params[i] = vec![gw, gb];
                    gx
                }
                _ => return Err(Error::Internal("trace does not match network".into())),
            };
        }
        Ok(Backward {
            params,
            input: g,
            tapped,
        })
    }
}

/// Element-wise sum of per-layer gradients.
pub fn accumulate(into: &mut Vec<Vec<Tensor>>, from: &[Vec<Tensor>]) {
    if into.is_empty() {
        *into = from.to_vec();
        return;
    }
    for (a, b) in into.iter_mut().zip(from) {
        for (ta, tb) in a.iter_mut().zip(b) {
            ta.add_assign(tb);
        }
    }
}
