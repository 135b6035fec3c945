//! One root network serving N agents.
//!
//! Agent `i` evaluates `f(x; θ ⊙ M_i)`. Structured masks are applied as
//! activation gates on the hidden vectors, per-weight masks through a cached
//! masked copy of the root. Gradients from all agents are averaged into the
//! root, so a unit kept by several agents learns from all of them while a
//! unit kept by one agent learns only from that agent.

mod features;
mod mode;
mod network;

pub use features::{dump_hidden_features, dump_hidden_features_batch, FeatureDump, FeatureRecord};
pub use mode::SharingMode;
pub use network::{AgentStep, ParameterCount, SharedAgentNetwork};
