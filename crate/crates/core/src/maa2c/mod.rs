//! Synchronous n-step advantage actor-critic for several agents with
//! per-agent rewards. Actor and critic are separate shared networks, each
//! with its own sharing layout and pruning schedule.

mod trainer;

pub use trainer::{
    entropy, log_softmax, n_step_advantage, sample_categorical, A2cConfig, A2cLoss, A2cTrainer, LossTerms,
    Advantages, EpisodeReturns, PolicySample, RolloutSegment, SegmentStats,
};

