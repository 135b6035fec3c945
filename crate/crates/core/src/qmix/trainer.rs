use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mixer::{MixerConfig, MixingNetwork};
use super::replay::{Episode, ReplayBuffer, Transition};
use crate::envs::Environment;
use crate::netcore::{clip_global_norm, apply_update, ForwardCache, GradientStore, OptimizerConfig, OptimizerState, RecurrentState};
use crate::rng::{substream, Rng};
use crate::sharednet::SharedAgentNetwork;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmixConfig {
    pub gamma: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Episodes stored before the first gradient step.
    pub min_buffer_episodes: usize,
    pub updates_per_episode: usize,
    /// Gradient steps between target refreshes.
    pub target_update_interval: usize,
    pub epsilon_start: f64,
    pub epsilon_finish: f64,
    pub epsilon_anneal_steps: usize,
    /// Width of the dense and GRU layers of each utility network.
    pub hidden_width: usize,
    pub mixer: MixerConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for QmixConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            buffer_capacity: 5000,
            batch_size: 32,
            min_buffer_episodes: 32,
            updates_per_episode: 1,
            target_update_interval: 200,
            epsilon_start: 1.0,
            epsilon_finish: 0.05,
            epsilon_anneal_steps: 50_000,
            hidden_width: 64,
            mixer: MixerConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl QmixConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("qmix.gamma", "must lie in [0, 1]"));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.target_update_interval == 0 {
            return Err(Error::config("qmix", "batch size, capacity and target interval must be positive"));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_finish", self.epsilon_finish)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::config(format!("qmix.{name}"), "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Linearly annealed exploration rate after `env_steps` steps.
    pub fn epsilon_at(&self, env_steps: usize) -> f64 {
        if self.epsilon_anneal_steps == 0 {
            return self.epsilon_finish;
        }
        let frac = (env_steps as f64 / self.epsilon_anneal_steps as f64).min(1.0);
        self.epsilon_start + (self.epsilon_finish - self.epsilon_start) * frac
    }
}

#[derive(Debug, Clone)]
pub struct ActionSelection {
    pub actions: Vec<usize>,
    pub states: Vec<RecurrentState>,
    pub q_values: Vec<Vec<f64>>,
}

/// Loss and gradients for one batch. `agent_grads[i]` is the gradient with
/// respect to agent `i`'s (masked) view of its root.
#[derive(Debug, Clone)]
pub struct TdLoss {
    pub loss: f64,
    pub agent_grads: Vec<GradientStore>,
    pub mixer_grads: Vec<GradientStore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub team_return: f64,
    pub length: usize,
    pub losses: Vec<f64>,
    pub epsilon: f64,
}

/// Index of the largest value; the lowest index wins ties.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = a;
        }
    }
    best
}

pub struct QmixTrainer {
    config: QmixConfig,
    agents: SharedAgentNetwork,
    target_agents: SharedAgentNetwork,
    mixer: MixingNetwork,
    target_mixer: MixingNetwork,
    mixer_optim: Vec<OptimizerState>,
    buffer: ReplayBuffer,
    explore_rng: Rng,
    replay_rng: Rng,
    env_steps: usize,
    updates: usize,
    episodes: usize,
}

impl QmixTrainer {
    /// `seed` feeds the mixer initialisation, exploration and replay sampling
    /// streams; the utility networks arrive already initialised.
    pub fn new(config: QmixConfig, agents: SharedAgentNetwork, state_width: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mixer = MixingNetwork::new(
            agents.n_agents(),
            state_width,
            &config.mixer,
            crate::rng::derive_seed(seed, "mixer-init"),
        )?;
        let mixer_optim = mixer.params().iter().map(|p| OptimizerState::new(p.len())).collect();
        Ok(Self {
            target_agents: agents.clone(),
            target_mixer: mixer.clone(),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            explore_rng: substream(seed, "exploration"),
            replay_rng: substream(seed, "replay"),
            config,
            agents,
            mixer,
            mixer_optim,
            env_steps: 0,
            updates: 0,
            episodes: 0,
        })
    }

    pub fn config(&self) -> &QmixConfig {
        &self.config
    }

    pub fn agents(&self) -> &SharedAgentNetwork {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut SharedAgentNetwork {
        &mut self.agents
    }

    pub fn target_agents(&self) -> &SharedAgentNetwork {
        &self.target_agents
    }

    pub fn mixer(&self) -> &MixingNetwork {
        &self.mixer
    }

    pub fn mixer_mut(&mut self) -> &mut MixingNetwork {
        &mut self.mixer
    }

    pub fn target_mixer(&self) -> &MixingNetwork {
        &self.target_mixer
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon_at(self.env_steps)
    }

    /// Copies the online utilities and mixer into the target networks.
    pub fn refresh_targets(&mut self) {
        self.target_agents.copy_parameters_from(&self.agents);
        self.target_mixer.copy_parameters_from(&self.mixer);
    }

    /// Epsilon-greedy joint action.
    pub fn select_actions(
        &mut self,
        observations: &[Vec<f64>],
        states: &[RecurrentState],
        epsilon: f64,
    ) -> Result<ActionSelection> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::usage(format!("epsilon {epsilon} outside [0, 1]")));
        }
        let n = self.agents.n_agents();
        if observations.len() != n || states.len() != n {
            return Err(Error::usage("one observation and state per agent is required"));
        }
        let mut sel = ActionSelection { actions: Vec::with_capacity(n), states: Vec::with_capacity(n), q_values: Vec::with_capacity(n) };
        for i in 0..n {
            let step = self.agents.agent_forward(i, &observations[i], &states[i])?;
            // Greedy selection leaves the exploration stream untouched.
            let explore = epsilon > 0.0 && self.explore_rng.gen::<f64>() < epsilon;
            let a = if explore {
                self.explore_rng.gen_range(0..step.output.len())
            } else {
                greedy_action(&step.output)
            };
            sel.actions.push(a);
            sel.states.push(step.state);
            sel.q_values.push(step.output);
        }
        Ok(sel)
    }

    /// Mean squared TD error over every transition in `batch`, with
    /// gradients through the online networks only. The bootstrap maximises
    /// each target utility separately and mixes the maxima.
    pub fn td_loss(&self, batch: &[&Episode]) -> Result<TdLoss> {
        let count: usize = batch.iter().map(|e| e.len()).sum();
        if count == 0 {
            return Err(Error::usage("td_loss needs a non-empty batch"));
        }
        let n = self.agents.n_agents();
        let gamma = self.config.gamma;
        let mut agent_grads = self.agents.zero_gradients();
        let mut mixer_grads = self.mixer.zero_gradients();
        let mut loss = 0.0;

        for ep in batch {
            let t_len = ep.len();
            // Online utilities along the episode.
            let mut caches: Vec<Vec<ForwardCache>> = Vec::with_capacity(n);
            let mut chosen = vec![vec![0.0; n]; t_len];
            // Target utilities along o_1..o_T, maximised per agent.
            let mut next_max = vec![vec![0.0; n]; t_len];
            for i in 0..n {
                let mut state = self.agents.initial_state();
                let mut tstate = self.target_agents.initial_state();
                let mut agent_caches = Vec::with_capacity(t_len);
                let first = self.target_agents.agent_forward(i, &ep.transitions[0].observations[i], &tstate)?;
                tstate = first.state;
                for (t, tr) in ep.transitions.iter().enumerate() {
                    let step = self.agents.agent_forward(i, &tr.observations[i], &state)?;
                    let a = tr.actions[i];
                    if a >= step.output.len() {
                        return Err(Error::usage(format!("stored action {a} out of range")));
                    }
                    chosen[t][i] = step.output[a];
                    state = step.state;
                    agent_caches.push(step.cache);
                    let next = self.target_agents.agent_forward(i, &tr.next_observations[i], &tstate)?;
                    next_max[t][i] = next.output.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    tstate = next.state;
                }
                caches.push(agent_caches);
            }

            let mut d_qs = vec![vec![0.0; n]; t_len];
            for (t, tr) in ep.transitions.iter().enumerate() {
                let (q_tot, cache) = self.mixer.forward(&tr.state, &chosen[t])?;
                let bootstrap = if tr.terminal || gamma == 0.0 {
                    0.0
                } else {
                    self.target_mixer.forward(&tr.next_state, &next_max[t])?.0
                };
                let target = tr.reward + gamma * bootstrap;
                let delta = q_tot - target;
                loss += delta * delta;
                let d_q_tot = 2.0 * delta / count as f64;
                d_qs[t] = self.mixer.backward(&cache, d_q_tot, &mut mixer_grads)?;
            }

            for i in 0..n {
                let width = self.agents.output_width();
                let mut d_state: Option<Vec<f64>> = None;
                for t in (0..t_len).rev() {
                    let mut d_out = vec![0.0; width];
                    d_out[ep.transitions[t].actions[i]] = d_qs[t][i];
                    let ds = self.agents.agent_backward(
                        i,
                        &caches[i][t],
                        &d_out,
                        d_state.as_deref(),
                        &mut agent_grads[i],
                    )?;
                    d_state = (!ds.is_empty()).then_some(ds);
                }
            }
        }
        for (i, g) in agent_grads.iter_mut().enumerate() {
            self.agents.mask_agent_gradient(i, g);
        }
        let loss = loss / count as f64;
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite td loss {loss}")));
        }
        Ok(TdLoss { loss, agent_grads, mixer_grads })
    }

    /// One optimisation step on `batch`; refreshes targets on schedule.
    pub fn learn(&mut self, batch: &[&Episode]) -> Result<f64> {
        let td = self.td_loss(batch)?;
        let mut root_grads = self.agents.accumulate_agent_gradients(&td.agent_grads)?;
        let mut mixer_grads = td.mixer_grads;
        if let Some(max) = self.config.optimizer.max_grad_norm {
            let mut all: Vec<&mut GradientStore> = root_grads.iter_mut().chain(mixer_grads.iter_mut()).collect();
            clip_global_norm(&mut all, max);
        }
        let unclipped = OptimizerConfig { max_grad_norm: None, ..self.config.optimizer };
        self.agents.apply_gradients(&root_grads, &unclipped)?;
        for ((p, g), s) in self.mixer.params_mut().iter_mut().zip(&mixer_grads).zip(&mut self.mixer_optim) {
            apply_update(p, g, s, &unclipped)?;
        }
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_update_interval) {
            self.refresh_targets();
        }
        Ok(td.loss)
    }

    /// Plays one episode with the current exploration rate and stores it.
    pub fn rollout(&mut self, env: &mut dyn Environment, epsilon: f64, store: bool) -> Result<Episode> {
        let n = self.agents.n_agents();
        let start = env.reset();
        let (mut state, mut obs) = (start.state, start.observations);
        let mut rstates = vec![self.agents.initial_state(); n];
        let mut episode = Episode::default();
        loop {
            let sel = self.select_actions(&obs, &rstates, epsilon)?;
            let out = env.step(&sel.actions)?;
            if store {
                self.env_steps += 1;
            }
            let done = out.done();
            episode.transitions.push(Transition {
                state: std::mem::replace(&mut state, out.state),
                observations: std::mem::replace(&mut obs, out.observations),
                actions: sel.actions,
                reward: out.team_reward,
                next_state: state.clone(),
                next_observations: obs.clone(),
                terminal: out.terminated,
            });
            rstates = sel.states;
            if done {
                break;
            }
        }
        Ok(episode)
    }

    /// Rollout, storage, the configured gradient steps and target refreshes.
    pub fn train_episode(&mut self, env: &mut dyn Environment) -> Result<EpisodeStats> {
        let epsilon = self.epsilon();
        let episode = self.rollout(env, epsilon, true)?;
        let stats_return = episode.team_return();
        let length = episode.len();
        self.buffer.push(episode);
        self.episodes += 1;
        let mut losses = Vec::new();
        if self.buffer.len() >= self.config.min_buffer_episodes.max(1) {
            for _ in 0..self.config.updates_per_episode {
                let batch: Vec<Episode> = self
                    .buffer
                    .sample(self.config.batch_size, &mut self.replay_rng)
                    .into_iter()
                    .cloned()
                    .collect();
                let refs: Vec<&Episode> = batch.iter().collect();
                losses.push(self.learn(&refs)?);
            }
        }
        Ok(EpisodeStats { team_return: stats_return, length, losses, epsilon })
    }

    /// Mean team return of greedy episodes.
    pub fn evaluate(&mut self, env: &mut dyn Environment, episodes: usize) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..episodes {
            total += self.rollout(env, 0.0, false)?.team_return();
        }
        Ok(total / episodes.max(1) as f64)
    }
}
