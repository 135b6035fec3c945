//! Cooperative multi-agent environments.
//!
//! [`Lbf`] is level-based foraging on a grid; [`CoordGame`] is a one-step
//! game whose reward requires agents with identical observations to pick
//! pairwise different actions.

mod coord;
mod lbf;

pub use coord::{coord_game_step, CoordGame, CoordGameConfig};
pub use lbf::{
    lbf_preset, lbf_step, Lbf, LbfAction, LbfConfig, LbfSnapshot, ReplayRecord, LBF_PRESETS,
};

use crate::Result;

/// Initial (or post-reset) view of the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeStep {
    pub state: Vec<f64>,
    pub observations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub observations: Vec<Vec<f64>>,
    /// One reward per agent.
    pub rewards: Vec<f64>,
    pub team_reward: f64,
    /// True terminal state; bootstrapping stops here.
    pub terminated: bool,
    /// Episode cut by the step limit.
    pub truncated: bool,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Partially observable multi-agent environment with per-agent rewards.
pub trait Environment {
    fn n_agents(&self) -> usize;
    fn observation_width(&self) -> usize;
    fn state_width(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset(&mut self) -> TimeStep;
    /// Rejects malformed actions and any step after the episode ended.
    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn n_agents(&self) -> usize {
        (**self).n_agents()
    }
    fn observation_width(&self) -> usize {
        (**self).observation_width()
    }
    fn state_width(&self) -> usize {
        (**self).state_width()
    }
    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }
    fn reset(&mut self) -> TimeStep {
        (**self).reset()
    }
    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        (**self).step(actions)
    }
}
