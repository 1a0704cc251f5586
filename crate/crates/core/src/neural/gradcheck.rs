//! Central finite-difference check of analytic parameter gradients.

use rand::seq::index::sample;

use super::network::{ForwardCtx, Network, Trace};
use super::{keyed_rng, Tensor};
use crate::error::Result;

/// Relative error `|a - n| / max(|a|, |n|, floor)`; the floor keeps
/// near-zero gradients from turning rounding noise into large ratios.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerCheck {
    pub layer: usize,
    pub name: &'static str,
    pub checked: usize,
    /// Probes whose `±h` interval crossed a kink and were left out.
    pub skipped: usize,
    pub max_rel_error: f64,
}

/// Loss value at one probe plus the sign pattern of every piecewise-linear
/// switch it passes through. Central differences are only compared when both
/// probes share the unperturbed pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub value: f64,
    pub pattern: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub layers: Vec<LayerCheck>,
    /// Check of the gradient with respect to the network input.
    pub input_max_rel_error: f64,
    pub input_checked: usize,
    pub input_skipped: usize,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.max_rel_error)
            .fold(self.input_max_rel_error, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.layers.iter().map(|l| l.checked).sum::<usize>() + self.input_checked
    }

    pub fn skipped(&self) -> usize {
        self.layers.iter().map(|l| l.skipped).sum::<usize>() + self.input_skipped
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error() <= tol
    }
}

/// A scalar objective of the network output: value and gradient.
pub trait Objective {
    fn eval(&self, output: &Tensor) -> (f64, Tensor);
}

impl<F: Fn(&Tensor) -> (f64, Tensor)> Objective for F {
    fn eval(&self, output: &Tensor) -> (f64, Tensor) {
        self(output)
    }
}

/// Central-difference check of `analytic` (one entry per layer, in
/// `Layer::params` order) against `loss` evaluated on perturbed copies of
/// `net`. At most `per_tensor` random entries of each tensor are probed.
pub fn check_params(
    net: &Network,
    analytic: &[Vec<Tensor>],
    loss: impl Fn(&Network) -> Result<Probe>,
    h: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<Vec<LayerCheck>> {
    let base = loss(net)?.pattern;
    let mut probe = net.clone();
    let mut layers = Vec::new();
    for (li, layer) in net.layers.iter().enumerate() {
        let n_params = layer.params().len();
        if n_params == 0 {
            continue;
        }
        let mut worst = 0.0f64;
        let mut checked = 0;
        let mut skipped = 0;
        for pi in 0..n_params {
            let len = layer.params()[pi].len();
            let mut rng = keyed_rng(seed, li as u64, pi as u64);
            for k in sample(&mut rng, len, per_tensor.min(len)) {
                let orig = probe.layers[li].params()[pi].data()[k];
                probe.layers[li].params_mut()[pi].data_mut()[k] = orig + h;
                let up = loss(&probe)?;
                probe.layers[li].params_mut()[pi].data_mut()[k] = orig - h;
                let down = loss(&probe)?;
                probe.layers[li].params_mut()[pi].data_mut()[k] = orig;
                if up.pattern != base || down.pattern != base {
                    skipped += 1;
                    continue;
                }
                let numeric = (up.value - down.value) / (2.0 * h);
                worst = worst.max(relative_error(analytic[li][pi].data()[k], numeric, REL_ERROR_FLOOR));
                checked += 1;
            }
        }
        layers.push(LayerCheck {
            layer: li,
            name: layer.name(),
            checked,
            skipped,
            max_rel_error: worst,
        });
    }
    Ok(layers)
}

/// Compares backprop against central differences with step `h`, for every
/// parameter tensor and the input, with the forward pass run under `ctx`
/// (so a dropout mask stays fixed across probes).
pub fn grad_check(
    net: &Network,
    objective: &impl Objective,
    input: &Tensor,
    ctx: ForwardCtx,
    h: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let trace = net.forward(input, ctx)?;
    let (_, g_out) = objective.eval(trace.output());
    let back = net.backward(&trace, &g_out, None)?;

    let loss_at = |net: &Network, x: &Tensor| -> Result<Probe> {
        let t: Trace = net.forward(x, ctx)?;
        Ok(Probe {
            value: objective.eval(t.output()).0,
            pattern: net.relu_pattern(&t),
        })
    };
    let base = net.relu_pattern(&trace);
    let layers = check_params(net, &back.params, |n| loss_at(n, input), h, per_tensor, seed)?;

    let mut x = input.clone();
    let mut input_worst = 0.0f64;
    let (mut input_checked, mut input_skipped) = (0, 0);
    let mut rng = keyed_rng(seed, u64::MAX, 0);
    for k in sample(&mut rng, x.len(), per_tensor.min(x.len())) {
        let orig = x.data()[k];
        x.data_mut()[k] = orig + h;
        let up = loss_at(net, &x)?;
        x.data_mut()[k] = orig - h;
        let down = loss_at(net, &x)?;
        x.data_mut()[k] = orig;
        if up.pattern != base || down.pattern != base {
            input_skipped += 1;
            continue;
        }
        let numeric = (up.value - down.value) / (2.0 * h);
        input_worst = input_worst.max(relative_error(back.input.data()[k], numeric, REL_ERROR_FLOOR));
        input_checked += 1;
    }

    Ok(GradCheckReport {
        layers,
        input_max_rel_error: input_worst,
        input_checked,
        input_skipped,
    })
}

/// `0.5 * ||y - target||^2`.
pub fn squared_error(target: Tensor) -> impl Fn(&Tensor) -> (f64, Tensor) {
    move |y: &Tensor| {
        let diff: Vec<f64> = y.data().iter().zip(target.data()).map(|(a, b)| a - b).collect();
        let loss = 0.5 * diff.iter().map(|d| d * d).sum::<f64>();
        (loss, Tensor::new(y.dims().to_vec(), diff).unwrap())
    }
}
