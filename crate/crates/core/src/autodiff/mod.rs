//! Layer-wise reverse-mode differentiation for small sequential networks,
//! plus SGD/Adam and a deterministic training loop.
//!
//! Batches are tensors with the batch axis first; images are channel-last.

mod network;
mod optim;
pub(crate) mod params;
mod spec;
mod train;

pub use network::{Gradient, Mode, Network, Targets, Trace, BATCHNORM_EPS, BATCHNORM_MOMENTUM};
pub use optim::{step, OptimizerConfig, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use params::{LayerSlots, ParamLayout, ParamState, Slot};
pub use spec::{LayerSpec, LossKind, NetworkSpec};
pub use train::{
    accuracy, evaluate, gradient_check, train, train_from, EpochStats, GradientCheck,
    TrainConfig, TrainOutcome, GRADIENT_CHECK_MAX_PARAMS,
};
