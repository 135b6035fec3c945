//! Dense and GRU layers with exact analytic gradients in `f64`.

mod checkpoint;
pub(crate) mod linalg;
mod optim;
mod params;
mod pass;
mod topology;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use linalg::softmax_in_place;
pub use optim::{apply_update, clip_global_norm, OptimizerConfig, OptimizerKind, OptimizerState};
pub use params::{init_parameters, init_parameters_with, GradientStore, ParameterStore};
pub use pass::{backward, backward_into, forward, BackwardFlow, ForwardCache, ForwardPass, RecurrentState};
pub use topology::{Activation, LayerBlocks, LayerKind, LayerSpec, NetworkTopology};
