//! Differentiable tanh networks: input jets up to second order and exact
//! parameter gradients of objectives built from them.

mod jet;
mod network;

pub use jet::Jet2;
pub use network::{
    param_count, param_gradient, validate_layer_sizes, DenseNet, DerivOrder, LayerView,
    ParamGradient, Recorded,
};
