use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome, TimeStep};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbfConfig {
    pub rows: usize,
    pub cols: usize,
    pub agent_levels: Vec<u32>,
    pub food_levels: Vec<u32>,
    pub max_steps: usize,
    pub observation_radius: usize,
}

pub const LBF_PRESETS: [&str; 4] = ["LBF1", "LBF2", "LBF1-desk", "LBF2-desk"];

pub fn lbf_preset(name: &str) -> Result<LbfConfig> {
    let (rows, levels, food, n_food, max_steps): (usize, &[u32], u32, usize, usize) = match name {
        "LBF1" => (8, &[1, 1, 1, 2, 2, 2], 3, 6, 50),
        "LBF2" => (8, &[1, 1, 2, 2, 3, 3], 4, 6, 50),
        "LBF1-desk" => (5, &[1, 1, 2], 3, 2, 25),
        "LBF2-desk" => (5, &[1, 2, 3], 4, 2, 25),
        other => {
            return Err(Error::config(
                "env.preset",
                format!("unknown preset `{other}` (known: {})", LBF_PRESETS.join(", ")),
            ))
        }
    };
    Ok(LbfConfig {
        rows,
        cols: rows,
        agent_levels: levels.to_vec(),
        food_levels: vec![food; n_food],
        max_steps,
        observation_radius: 2,
    })
}

impl LbfConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |p: &str, m: String| Err(Error::config(format!("env.{p}"), m));
        if self.rows < 3 || self.cols < 3 {
            return err("rows", "grid must be at least 3x3".into());
        }
        if self.agent_levels.is_empty() {
            return err("agent_levels", "at least one agent is required".into());
        }
        if self.food_levels.is_empty() {
            return err("food_levels", "at least one food is required".into());
        }
        if self.agent_levels.iter().chain(&self.food_levels).any(|&l| l == 0) {
            return err("agent_levels", "levels must be >= 1".into());
        }
        if self.max_steps == 0 {
            return err("max_steps", "must be positive".into());
        }
        // Foods spawn off the border with no other food among their 8 neighbours.
        let capacity = (self.rows - 2).div_ceil(2) * (self.cols - 2).div_ceil(2);
        if self.food_levels.len() > capacity {
            return err("food_levels", "too many foods for the grid interior".into());
        }
        if self.agent_levels.len() + self.food_levels.len() > self.rows * self.cols {
            return err("food_levels", "agents and foods exceed the grid cells".into());
        }
        // At most four agents can stand next to a food.
        let mut sorted = self.agent_levels.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let best: u32 = sorted.iter().take(4).sum();
        if let Some(&f) = self.food_levels.iter().find(|&&f| f > best) {
            return err(
                "food_levels",
                format!("no group of adjacent agents reaches food level {f}"),
            );
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.agent_levels.len()
    }

    pub fn window(&self) -> usize {
        2 * self.observation_radius + 1
    }

    /// Three channels per window cell: other agent level, food level, own level.
    pub fn observation_width(&self) -> usize {
        self.window() * self.window() * 3
    }

    pub fn state_width(&self) -> usize {
        self.rows * self.cols * 2
    }

    fn max_level(&self) -> f64 {
        self.agent_levels.iter().chain(&self.food_levels).copied().max().unwrap_or(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
    Forage,
}

impl LbfAction {
    pub const COUNT: usize = 6;

    pub fn from_index(i: usize) -> Result<Self> {
        Ok(match i {
            0 => Self::Up,
            1 => Self::Down,
            2 => Self::Left,
            3 => Self::Right,
            4 => Self::Stay,
            5 => Self::Forage,
            _ => return Err(Error::usage(format!("action index {i} is not an LBF action"))),
        })
    }

    fn delta(self) -> Option<(isize, isize)> {
        match self {
            Self::Up => Some((-1, 0)),
            Self::Down => Some((1, 0)),
            Self::Left => Some((0, -1)),
            Self::Right => Some((0, 1)),
            Self::Stay | Self::Forage => None,
        }
    }
}

/// Full layout: `(row, col, level)` for agents and for foods still on the grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LbfSnapshot {
    pub agents: Vec<(usize, usize, u32)>,
    pub foods: Vec<(usize, usize, u32)>,
    pub step: usize,
}

/// One line of a JSON-lines episode replay log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplayRecord {
    Reset { layout: LbfSnapshot },
    Step { actions: Vec<usize>, rewards: Vec<f64>, done: bool },
}

/// Applies one joint action to `state` (in place) and returns per-agent
/// rewards. `total_food_level` is the summed level of every food spawned this
/// episode, so an episode's rewards add up to at most 1.
pub fn lbf_step(
    config: &LbfConfig,
    state: &mut LbfSnapshot,
    actions: &[usize],
    total_food_level: u32,
) -> Result<Vec<f64>> {
    if actions.len() != state.agents.len() {
        return Err(Error::usage(format!(
            "expected {} actions, got {}",
            state.agents.len(),
            actions.len()
        )));
    }
    let actions = actions.iter().map(|&a| LbfAction::from_index(a)).collect::<Result<Vec<_>>>()?;

    let occupied_by_agent =
        |r: usize, c: usize| state.agents.iter().any(|&(ar, ac, _)| (ar, ac) == (r, c));
    let has_food = |r: usize, c: usize| state.foods.iter().any(|&(fr, fc, _)| (fr, fc) == (r, c));

    // Proposed targets; blocked moves stay put.
    let targets: Vec<Option<(usize, usize)>> = state
        .agents
        .iter()
        .zip(&actions)
        .map(|(&(r, c, _), a)| {
            let (dr, dc) = a.delta()?;
            let nr = r.checked_add_signed(dr).filter(|&v| v < config.rows)?;
            let nc = c.checked_add_signed(dc).filter(|&v| v < config.cols)?;
            (!has_food(nr, nc) && !occupied_by_agent(nr, nc)).then_some((nr, nc))
        })
        .collect();
    // Simultaneous moves into one cell all fail.
    let moved: Vec<Option<(usize, usize)>> = targets
        .iter()
        .map(|t| t.filter(|cell| targets.iter().filter(|u| u.as_ref() == Some(cell)).count() == 1))
        .collect();
    for (agent, m) in state.agents.iter_mut().zip(moved) {
        if let Some((r, c)) = m {
            agent.0 = r;
            agent.1 = c;
        }
    }

    let mut rewards = vec![0.0; state.agents.len()];
    let total = f64::from(total_food_level.max(1));
    state.foods.retain(|&(fr, fc, level)| {
        let foragers: Vec<usize> = state
            .agents
            .iter()
            .enumerate()
            .filter(|(i, &(ar, ac, _))| {
                actions[*i] == LbfAction::Forage && ar.abs_diff(fr) + ac.abs_diff(fc) == 1
            })
            .map(|(i, _)| i)
            .collect();
        let level_sum: u32 = foragers.iter().map(|&i| state.agents[i].2).sum();
        if foragers.is_empty() || level_sum < level {
            return true;
        }
        for &i in &foragers {
            rewards[i] += f64::from(level) * f64::from(state.agents[i].2)
                / (f64::from(level_sum) * total);
        }
        false
    });
    state.step += 1;
    Ok(rewards)
}

/// Level-based foraging environment.
#[derive(Debug, Clone)]
pub struct Lbf {
    config: LbfConfig,
    rng: Rng,
    state: LbfSnapshot,
    total_food_level: u32,
    done: bool,
}

impl Lbf {
    pub fn new(config: LbfConfig, rng: Rng) -> Result<Self> {
        config.validate()?;
        let mut env = Self {
            state: LbfSnapshot { agents: Vec::new(), foods: Vec::new(), step: 0 },
            total_food_level: 0,
            done: true,
            config,
            rng,
        };
        env.reset();
        Ok(env)
    }

    pub fn config(&self) -> &LbfConfig {
        &self.config
    }

    pub fn snapshot(&self) -> &LbfSnapshot {
        &self.state
    }

    /// Starts an episode from an explicit layout instead of a random one.
    pub fn reset_to(&mut self, layout: LbfSnapshot) -> Result<TimeStep> {
        if layout.agents.len() != self.config.n_agents() {
            return Err(Error::usage("layout agent count does not match the config"));
        }
        let inside = |&(r, c, _): &(usize, usize, u32)| r < self.config.rows && c < self.config.cols;
        if !layout.agents.iter().chain(&layout.foods).all(inside) {
            return Err(Error::usage("layout places an entity outside the grid"));
        }
        self.total_food_level = layout.foods.iter().map(|f| f.2).sum();
        self.state = layout;
        self.done = self.state.foods.is_empty();
        Ok(self.timestep())
    }

    fn spawn(&mut self) -> LbfSnapshot {
        let (rows, cols) = (self.config.rows, self.config.cols);
        loop {
            let mut foods: Vec<(usize, usize, u32)> = Vec::new();
            let mut ok = true;
            for &level in &self.config.food_levels {
                let candidates: Vec<(usize, usize)> = (1..rows - 1)
                    .flat_map(|r| (1..cols - 1).map(move |c| (r, c)))
                    .filter(|&(r, c)| {
                        foods.iter().all(|&(fr, fc, _)| r.abs_diff(fr) > 1 || c.abs_diff(fc) > 1)
                    })
                    .collect();
                match candidates.choose(&mut self.rng) {
                    Some(&(r, c)) => foods.push((r, c, level)),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let mut free: Vec<(usize, usize)> = (0..rows)
                .flat_map(|r| (0..cols).map(move |c| (r, c)))
                .filter(|&(r, c)| foods.iter().all(|&(fr, fc, _)| (fr, fc) != (r, c)))
                .collect();
            free.shuffle(&mut self.rng);
            let agents = self
                .config
                .agent_levels
                .iter()
                .zip(free)
                .map(|(&l, (r, c))| (r, c, l))
                .collect();
            return LbfSnapshot { agents, foods, step: 0 };
        }
    }

    fn timestep(&self) -> TimeStep {
        TimeStep { state: self.state_vector(), observations: self.observations() }
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.state.agents.len()).map(|i| self.observe(i)).collect()
    }

    /// Local window around agent `i`. Cells outside the grid read -1 in the
    /// agent channel.
    pub fn observe(&self, i: usize) -> Vec<f64> {
        let rad = self.config.observation_radius as isize;
        let scale = 1.0 / self.config.max_level();
        let (ar, ac, own) = self.state.agents[i];
        let mut obs = Vec::with_capacity(self.config.observation_width());
        for dr in -rad..=rad {
            for dc in -rad..=rad {
                let cell = ar
                    .checked_add_signed(dr)
                    .filter(|&r| r < self.config.rows)
                    .zip(ac.checked_add_signed(dc).filter(|&c| c < self.config.cols));
                let (agent, food) = match cell {
                    None => (-1.0, 0.0),
                    Some((r, c)) => {
                        let agent = self
                            .state
                            .agents
                            .iter()
                            .enumerate()
                            .find(|(j, a)| *j != i && (a.0, a.1) == (r, c))
                            .map_or(0.0, |(_, a)| f64::from(a.2) * scale);
                        let food = self
                            .state
                            .foods
                            .iter()
                            .find(|f| (f.0, f.1) == (r, c))
                            .map_or(0.0, |f| f64::from(f.2) * scale);
                        (agent, food)
                    }
                };
                let me = if dr == 0 && dc == 0 { f64::from(own) * scale } else { 0.0 };
                obs.extend([agent, food, me]);
            }
        }
        obs
    }

    /// Whole-grid agent-level and food-level planes.
    pub fn state_vector(&self) -> Vec<f64> {
        let scale = 1.0 / self.config.max_level();
        let cells = self.config.rows * self.config.cols;
        let mut s = vec![0.0; 2 * cells];
        for &(r, c, l) in &self.state.agents {
            s[r * self.config.cols + c] = f64::from(l) * scale;
        }
        for &(r, c, l) in &self.state.foods {
            s[cells + r * self.config.cols + c] = f64::from(l) * scale;
        }
        s
    }
}

impl Environment for Lbf {
    fn n_agents(&self) -> usize {
        self.config.n_agents()
    }

    fn observation_width(&self) -> usize {
        self.config.observation_width()
    }

    fn state_width(&self) -> usize {
        self.config.state_width()
    }

    fn n_actions(&self) -> usize {
        LbfAction::COUNT
    }

    fn reset(&mut self) -> TimeStep {
        let layout = self.spawn();
        self.total_food_level = layout.foods.iter().map(|f| f.2).sum();
        self.state = layout;
        self.done = false;
        self.timestep()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Environment("step called after the episode ended".into()));
        }
        let rewards = lbf_step(&self.config, &mut self.state, actions, self.total_food_level)?;
        let terminated = self.state.foods.is_empty();
        let truncated = !terminated && self.state.step >= self.config.max_steps;
        self.done = terminated || truncated;
        Ok(StepOutcome {
            state: self.state_vector(),
            observations: self.observations(),
            team_reward: rewards.iter().sum(),
            rewards,
            terminated,
            truncated,
        })
    }
}
