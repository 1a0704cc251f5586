//! Small dense-tensor neural network core with hand-written backward passes.

mod conv;
pub mod gradcheck;
mod layers;
mod network;
mod rng;
mod tensor;

pub use conv::{conv_out_size, Conv2d, ConvCache, ConvGrads};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, LayerCheck, Objective, Probe};
pub use layers::{
    dropout, dropout_mask, relu, relu_backward, simam, simam_backward, simam_scale, Linear, Mode,
};
pub use network::{accumulate, Backward, ForwardCtx, Layer, LayerSpec, Network, Trace};
pub use rng::keyed_rng;
pub use tensor::Tensor;
