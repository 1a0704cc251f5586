//! Gradient checks for every layer type and for the end-to-end triplet loss.

use rand::Rng;

use super::arch::ArchitectureSpec;
use super::loss::{triplet_loss, DistanceMode};
use crate::error::Result;
use crate::neural::gradcheck::{check_params, squared_error, Probe};
use crate::neural::{accumulate, grad_check, keyed_rng, ForwardCtx, LayerSpec, Network, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckSuite {
    pub seeds: Vec<u64>,
    pub h: f64,
    pub per_tensor: usize,
}

impl Default for GradCheckSuite {
    fn default() -> Self {
        Self {
            seeds: (0..20).collect(),
            h: 1e-5,
            per_tensor: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub seed: u64,
    pub check: String,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.rows.iter().map(|r| r.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.rows.iter().map(|r| r.skipped).sum()
    }

    /// Worst error per check name, in first-appearance order.
    pub fn by_check(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(n, _)| *n == r.check) {
                Some((_, e)) => *e = e.max(r.max_rel_error),
                None => out.push((r.check.clone(), r.max_rel_error)),
            }
        }
        out
    }

    pub fn table(&self) -> String {
        let mut s = String::from("check,max_rel_error,checked,skipped\n");
        for (name, e) in self.by_check() {
            let rows = self.rows.iter().filter(|r| r.check == name);
            let (c, k) = rows.fold((0, 0), |(c, k), r| (c + r.checked, k + r.skipped));
            s.push_str(&format!("{name},{e:.3e},{c},{k}\n"));
        }
        s
    }
}

fn random_tensor(dims: &[usize], rng: &mut impl Rng, lo: f64, hi: f64) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Small nets isolating one layer type each, checked against `0.5 |y - t|^2`.
fn layer_checks(seed: u64, h: f64, per_tensor: usize) -> Result<Vec<SuiteRow>> {
    let conv = |in_ch, out_ch, stride| LayerSpec::Conv {
        in_ch,
        out_ch,
        kernel: 3,
        stride,
        pad: 1,
    };
    let cases: Vec<(&str, Vec<LayerSpec>, [usize; 3], bool)> = vec![
        ("conv", vec![conv(2, 3, 2)], [2, 7, 6], false),
        ("relu", vec![conv(2, 3, 1), LayerSpec::Relu], [2, 5, 5], false),
        ("simam", vec![conv(2, 3, 1), LayerSpec::SimAm { lambda: 1e-4 }], [2, 5, 4], false),
        ("dropout", vec![conv(2, 3, 1), LayerSpec::Dropout { rate: 0.5 }], [2, 4, 4], true),
        ("flatten+fc", vec![LayerSpec::Flatten, LayerSpec::FullyConnected { n_in: 24, n_out: 5 }], [2, 3, 4], false),
    ];
    let mut rows = Vec::new();
    for (i, (name, specs, dims, train)) in cases.into_iter().enumerate() {
        let mut rng = keyed_rng(seed, 1000 + i as u64, 0);
        let net = Network::init(&specs, seed.wrapping_mul(31).wrapping_add(i as u64));
        let x = random_tensor(&dims, &mut rng, -1.0, 1.0);
        let ctx = if train { ForwardCtx::train(seed, 7) } else { ForwardCtx::eval() };
        let y = net.forward(&x, ctx)?;
        let target = random_tensor(y.output().dims(), &mut rng, -1.0, 1.0);
        let report = grad_check(&net, &squared_error(target), &x, ctx, h, per_tensor, seed)?;
        rows.push(SuiteRow {
            seed,
            check: name.to_string(),
            checked: report.checked(),
            skipped: report.skipped(),
            max_rel_error: report.max_rel_error(),
        });
    }
    Ok(rows)
}

/// Triplet loss through `arch` (train mode, fixed dropout masks): analytic
/// parameter gradients against central differences. One row per layer.
pub fn triplet_check(
    arch: &ArchitectureSpec,
    mode: DistanceMode,
    seed: u64,
    h: f64,
    per_tensor: usize,
) -> Result<Vec<SuiteRow>> {
    let net = Network::init(&arch.layer_specs()?, seed);
    let mut rng = keyed_rng(seed, 2000, 0);
    let dims = [arch.input_channels, arch.input_size.0, arch.input_size.1];
    let inputs: Vec<Tensor> = (0..3).map(|_| random_tensor(&dims, &mut rng, 0.0, 1.0)).collect();
    let ctxs: Vec<ForwardCtx> = (0..3).map(|i| ForwardCtx::train(seed, i)).collect();
    let (margin, reg) = (0.1, 1e-4);
    let loss = |net: &Network| -> Result<Probe> {
        let mut pattern = Vec::new();
        let mut e = Vec::new();
        for (x, c) in inputs.iter().zip(&ctxs) {
            let t = net.forward(x, *c)?;
            pattern.extend(net.relu_pattern(&t));
            e.push(t.output().data().to_vec());
        }
        let l = triplet_loss(&e[0], &e[1], &e[2], margin, mode, reg)?;
        pattern.push(l.hinge > 0.0);
        Ok(Probe { value: l.total(), pattern })
    };
    let traces = inputs
        .iter()
        .zip(&ctxs)
        .map(|(x, c)| net.forward(x, *c))
        .collect::<Result<Vec<_>>>()?;
    let e: Vec<&[f64]> = traces.iter().map(|t| t.output().data()).collect();
    let l = triplet_loss(e[0], e[1], e[2], margin, mode, reg)?;
    let mut analytic = Vec::new();
    for (t, g) in traces.iter().zip(&l.grads) {
        let back = net.backward(t, &Tensor::from_vec(g.clone()), None)?;
        accumulate(&mut analytic, &back.params);
    }
    let mode_name = match mode {
        DistanceMode::Cosine => "cosine",
        DistanceMode::SquaredEuclidean => "squared_euclidean",
    };
    Ok(check_params(&net, &analytic, loss, h, per_tensor, seed)?
        .into_iter()
        .map(|c| SuiteRow {
            seed,
            check: format!("triplet[{mode_name}] layer {} {}", c.layer, c.name),
            checked: c.checked,
            skipped: c.skipped,
            max_rel_error: c.max_rel_error,
        })
        .collect())
}

/// Reduced architecture with every layer kind of the default one.
pub fn small_architecture() -> ArchitectureSpec {
    ArchitectureSpec {
        channels: vec![3, 4, 4],
        strides: vec![1, 2, 1],
        simam_after: vec![2, 3],
        embedding_dim: 6,
        input_size: (8, 8),
        ..Default::default()
    }
}

/// Layer checks plus end-to-end triplet checks (both distance modes) on the
/// reduced architecture, for every seed.
pub fn grad_check_suite(suite: &GradCheckSuite) -> Result<SuiteReport> {
    let arch = small_architecture();
    let mut rows = Vec::new();
    for &seed in &suite.seeds {
        rows.extend(layer_checks(seed, suite.h, suite.per_tensor)?);
        for mode in [DistanceMode::Cosine, DistanceMode::SquaredEuclidean] {
            rows.extend(triplet_check(&arch, mode, seed, suite.h, suite.per_tensor)?);
        }
    }
    Ok(SuiteReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_seed_passes() {
        let report = grad_check_suite(&GradCheckSuite {
            seeds: vec![3],
            h: 1e-5,
            per_tensor: 6,
        })
        .unwrap();
        assert!(report.max_rel_error() <= 1e-4, "{}", report.table());
        assert!(report.by_check().iter().any(|(n, _)| n.contains("simam")));
    }
}
