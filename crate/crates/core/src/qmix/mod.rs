//! Value decomposition with a monotone mixer over recurrent per-agent utilities.

mod mixer;
mod replay;
mod trainer;

pub use mixer::{MixerCache, MixerConfig, MixingNetwork};
pub use replay::{Episode, ReplayBuffer, Transition};
pub use trainer::{greedy_action, ActionSelection, EpisodeStats, QmixConfig, QmixTrainer, TdLoss};
