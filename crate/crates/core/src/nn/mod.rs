//! Layers with explicit forward and backward passes.
//!
//! Every layer caches what its backward pass needs during `forward`, and
//! `backward` accumulates into parameter gradients and returns the gradient
//! with respect to its input.

mod activation;
pub mod archive;
mod batchnorm;
mod cheb;
mod conv1d;
mod gat;
mod gcn;
pub mod gradcheck;
mod init;
mod layer;
mod linear;
mod param;

pub use activation::{
    leaky_relu, leaky_relu_backward, log_softmax, log_softmax_backward, relu, relu_backward, Dropout,
};
pub use batchnorm::{BatchNorm, BN_EPSILON, BN_MOMENTUM};
pub use cheb::ChebConv;
pub use conv1d::{Conv1d, KERNEL_SIZE};
pub use gat::{GatConv, ATTENTION_SLOPE};
pub use gcn::{gcn_propagation, GcnConv};
pub use init::glorot_uniform;
pub use layer::{GraphLayer, GraphLayerFactory, GraphLayerRegistry, GraphLayerSpec};
pub(crate) use layer::{flatten_rows, unflatten_rows};
pub use linear::Linear;
pub use param::{BufferSlot, ParamSlot, Parameter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
