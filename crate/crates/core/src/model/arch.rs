use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{conv_out_size, LayerSpec};

/// CNN embedding network: conv blocks (conv, ReLU, optional SimAM), dropout,
/// then one fully connected layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
    pub kernel: usize,
    pub pad: usize,
    /// 1-based conv layers followed by SimAM attention.
    pub simam_after: Vec<usize>,
    pub simam_lambda: f64,
    pub embedding_dim: usize,
    pub dropout: f64,
    pub input_channels: usize,
    /// (height, width) of the input images.
    pub input_size: (usize, usize),
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        Self {
            channels: vec![32, 32, 64, 64, 128, 128],
            strides: vec![1, 1, 2, 1, 2, 1],
            kernel: 3,
            pad: 1,
            simam_after: vec![3, 5, 6],
            simam_lambda: 1e-4,
            embedding_dim: 64,
            dropout: 0.5,
            input_channels: 1,
            input_size: (40, 40),
        }
    }
}

impl ArchitectureSpec {
    pub fn check(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.len() != self.strides.len() {
            return Err(Error::invalid("need one stride per conv layer"));
        }
        if self.channels.iter().chain(&self.strides).any(|&c| c == 0) {
            return Err(Error::invalid("channels and strides must be positive"));
        }
        if self.embedding_dim == 0 || self.input_channels == 0 {
            return Err(Error::invalid("embedding dim and input channels must be positive"));
        }
        if self
            .simam_after
            .iter()
            .any(|&s| s == 0 || s > self.channels.len())
        {
            return Err(Error::invalid("SimAM site outside the conv stack"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must be in [0, 1)"));
        }
        self.final_map()?;
        Ok(())
    }

    /// (channels, height, width) of the last conv block's output.
    pub fn final_map(&self) -> Result<(usize, usize, usize)> {
        let (mut h, mut w) = self.input_size;
        for &s in &self.strides {
            h = conv_out_size(h, self.kernel, s, self.pad)?;
            w = conv_out_size(w, self.kernel, s, self.pad)?;
        }
        if h * w < 2 && !self.simam_after.is_empty() {
            return Err(Error::invalid("final feature map too small for attention"));
        }
        Ok((*self.channels.last().unwrap(), h, w))
    }

    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        self.check()?;
        let mut specs = Vec::new();
        let mut in_ch = self.input_channels;
        for (i, (&out_ch, &stride)) in self.channels.iter().zip(&self.strides).enumerate() {
            specs.push(LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel: self.kernel,
                stride,
                pad: self.pad,
            });
            specs.push(LayerSpec::Relu);
            if self.simam_after.contains(&(i + 1)) {
                specs.push(LayerSpec::SimAm {
                    lambda: self.simam_lambda,
                });
            }
            in_ch = out_ch;
        }
        let (c, h, w) = self.final_map()?;
        specs.push(LayerSpec::Dropout { rate: self.dropout });
        specs.push(LayerSpec::Flatten);
        specs.push(LayerSpec::FullyConnected {
            n_in: c * h * w,
            n_out: self.embedding_dim,
        });
        Ok(specs)
    }

    /// Index of the layer whose output is the last conv block's (attended)
    /// activation map.
    pub fn last_conv_activation(&self) -> Result<usize> {
        let specs = self.layer_specs()?;
        specs
            .iter()
            .position(|s| matches!(s, LayerSpec::Dropout { .. }))
            .map(|i| i - 1)
            .ok_or_else(|| Error::Internal("architecture has no dropout layer".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_architecture_shape() {
        let arch = ArchitectureSpec::default();
        assert_eq!(arch.final_map().unwrap(), (128, 10, 10));
        let specs = arch.layer_specs().unwrap();
        let simam_count = specs.iter().filter(|s| matches!(s, LayerSpec::SimAm { .. })).count();
        assert_eq!(simam_count, 3);
        assert!(matches!(specs[arch.last_conv_activation().unwrap()], LayerSpec::SimAm { .. }));
        assert!(matches!(specs.last(), Some(LayerSpec::FullyConnected { n_in: 12800, n_out: 64 })));
    }

    #[test]
    fn rejects_bad_sites() {
        let arch = ArchitectureSpec {
            simam_after: vec![7],
            ..Default::default()
        };
        assert!(arch.check().is_err());
    }
}
