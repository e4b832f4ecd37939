//! Minimal deterministic reverse-mode differentiation with the layers the
//! attack and the sampler need.

mod gradcheck;
mod nn;
mod optim;
mod params;
mod tape;

pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use nn::{gnn_layer, mean_pool, softmax_cross_entropy, GinLayer, GnnKind, Linear, Mlp2, SageLayer};
pub use optim::{adamw_step, AdamWConfig, OptimizerState};
pub use params::{Initializer, ParamSet, PARAM_FORMAT_VERSION};
pub use tape::{Gradients, MessageGraph, Tape, Var};

pub(crate) use tape::{sigmoid_scalar, softmax_rows};
