use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome, TimeStep};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordGameConfig {
    pub n_agents: usize,
    pub n_actions: usize,
    #[serde(default = "default_obs_width")]
    pub observation_width: usize,
}

fn default_obs_width() -> usize {
    4
}

impl CoordGameConfig {
    pub fn new(n_agents: usize, n_actions: usize) -> Self {
        Self { n_agents, n_actions, observation_width: default_obs_width() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::config("env.n_agents", "at least one agent is required"));
        }
        if self.n_actions < self.n_agents {
            return Err(Error::config(
                "env.n_actions",
                "need at least as many actions as agents for a distinct assignment",
            ));
        }
        if self.observation_width == 0 {
            return Err(Error::config("env.observation_width", "must be positive"));
        }
        Ok(())
    }
}

/// Team reward 1 iff the joint action equals `target`, else 0.
pub fn coord_game_step(target: &[usize], actions: &[usize]) -> f64 {
    if target == actions {
        1.0
    } else {
        0.0
    }
}

/// One-step game: every agent sees the same constant observation and the
/// team is paid only for a hidden assignment of pairwise distinct actions.
#[derive(Debug, Clone)]
pub struct CoordGame {
    config: CoordGameConfig,
    target: Vec<usize>,
    done: bool,
}

impl CoordGame {
    /// Draws the hidden target assignment from `rng`.
    pub fn new(config: CoordGameConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let target = sample(rng, config.n_actions, config.n_agents).into_vec();
        Ok(Self { config, target, done: false })
    }

    pub fn with_target(config: CoordGameConfig, target: Vec<usize>) -> Result<Self> {
        config.validate()?;
        let distinct = target.iter().enumerate().all(|(i, a)| !target[..i].contains(a));
        if target.len() != config.n_agents || !distinct || target.iter().any(|&a| a >= config.n_actions) {
            return Err(Error::config("env.target", "target must be a distinct in-range assignment"));
        }
        Ok(Self { config, target, done: false })
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    fn observation(&self) -> Vec<f64> {
        vec![1.0; self.config.observation_width]
    }
}

impl Environment for CoordGame {
    fn n_agents(&self) -> usize {
        self.config.n_agents
    }

    fn observation_width(&self) -> usize {
        self.config.observation_width
    }

    fn state_width(&self) -> usize {
        self.config.observation_width
    }

    fn n_actions(&self) -> usize {
        self.config.n_actions
    }

    fn reset(&mut self) -> TimeStep {
        self.done = false;
        TimeStep {
            state: self.observation(),
            observations: vec![self.observation(); self.config.n_agents],
        }
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Environment("step called after the episode ended".into()));
        }
        if actions.len() != self.config.n_agents || actions.iter().any(|&a| a >= self.config.n_actions) {
            return Err(Error::usage("malformed joint action for the coordination game"));
        }
        self.done = true;
        let r = coord_game_step(&self.target, actions);
        Ok(StepOutcome {
            state: self.observation(),
            observations: vec![self.observation(); self.config.n_agents],
            rewards: vec![r; self.config.n_agents],
            team_reward: r,
            terminated: true,
            truncated: false,
        })
    }
}
