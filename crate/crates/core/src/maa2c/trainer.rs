use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::netcore::{clip_global_norm, ForwardCache, GradientStore, LayerKind, OptimizerConfig};
use crate::qmix::greedy_action;
use crate::rng::{substream, Rng};
use crate::sharednet::SharedAgentNetwork;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2cConfig {
    pub gamma: f64,
    /// Maximum segment length `n`.
    pub n_steps: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Hidden widths of both actor and critic.
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerConfig,
}

impl Default for A2cConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            n_steps: 5,
            entropy_coef: 0.01,
            value_coef: 0.5,
            hidden: vec![128, 128, 128],
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl A2cConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("a2c.gamma", "must lie in [0, 1]"));
        }
        if self.n_steps == 0 {
            return Err(Error::config("a2c.n_steps", "must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("a2c.hidden", "need at least one non-empty hidden layer"));
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return Err(Error::config("a2c", "loss coefficients must be non-negative"));
        }
        Ok(())
    }
}

/// Numerically stable `log softmax(logits)`.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training(format!("non-finite policy logits {logits:?}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|z| z - lse).collect())
}

/// Shannon entropy in nats; zero-probability actions contribute nothing.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Inverse-CDF draw from a categorical distribution.
pub fn sample_categorical(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // Rounding left `u` above the final partial sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
}

/// `n` or fewer consecutive steps of one episode, indexed `[t][agent]`.
#[derive(Debug, Clone, Default)]
pub struct RolloutSegment {
    pub observations: Vec<Vec<Vec<f64>>>,
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<Vec<f64>>,
    /// Critic estimates `V(o_t)` recorded during the rollout.
    pub values: Vec<Vec<f64>>,
    /// Per-agent critic estimate after the last step.
    pub bootstrap: Vec<f64>,
    /// The segment ends in a true terminal state; `bootstrap` is ignored.
    pub terminated: bool,
    actor_caches: Vec<Vec<ForwardCache>>,
    critic_caches: Vec<Vec<ForwardCache>>,
}

impl RolloutSegment {
    pub fn new(
        observations: Vec<Vec<Vec<f64>>>,
        actions: Vec<Vec<usize>>,
        rewards: Vec<Vec<f64>>,
        values: Vec<Vec<f64>>,
        bootstrap: Vec<f64>,
        terminated: bool,
    ) -> Result<Self> {
        let t = observations.len();
        if t == 0 || actions.len() != t || rewards.len() != t || values.len() != t {
            return Err(Error::usage("segment sequences must be non-empty and aligned"));
        }
        let n = bootstrap.len();
        let rows_ok = |rows: usize| rows == n;
        if !observations.iter().all(|r| rows_ok(r.len()))
            || !actions.iter().all(|r| rows_ok(r.len()))
            || !rewards.iter().all(|r| rows_ok(r.len()))
            || !values.iter().all(|r| rows_ok(r.len()))
        {
            return Err(Error::usage("every step needs one entry per agent"));
        }
        Ok(Self {
            observations,
            actions,
            rewards,
            values,
            bootstrap,
            terminated,
            actor_caches: Vec::new(),
            critic_caches: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.bootstrap.len()
    }
}

/// Indexed `[t][agent]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
}

/// Discounted return from each step to the segment end plus the discounted
/// bootstrap (dropped at a terminal), minus the recorded value.
pub fn n_step_advantage(segment: &RolloutSegment, gamma: f64) -> Advantages {
    let (t_len, n) = (segment.len(), segment.n_agents());
    let mut returns = vec![vec![0.0; n]; t_len];
    let mut advantages = vec![vec![0.0; n]; t_len];
    for i in 0..n {
        let mut ret = if segment.terminated { 0.0 } else { segment.bootstrap[i] };
        for t in (0..t_len).rev() {
            ret = segment.rewards[t][i] + gamma * ret;
            returns[t][i] = ret;
            advantages[t][i] = ret - segment.values[t][i];
        }
    }
    Advantages { advantages, returns }
}

/// Loss terms averaged over agents and steps:
/// `total = policy_loss + value_coef * value_loss - entropy_coef * entropy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// Loss terms plus per-agent gradients; store `i` holds the gradient of
/// agent `i`'s own loss.
#[derive(Debug, Clone)]
pub struct A2cLoss {
    pub terms: LossTerms,
    pub actor_grads: Vec<GradientStore>,
    pub critic_grads: Vec<GradientStore>,
}

/// Reused gradient storage for the update step.
struct GradBuffers {
    actor: Vec<GradientStore>,
    critic: Vec<GradientStore>,
    actor_roots: Vec<GradientStore>,
    critic_roots: Vec<GradientStore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReturns {
    pub agent_returns: Vec<f64>,
    pub team_return: f64,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStats {
    pub steps: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Set when the segment closed an episode.
    pub episode: Option<EpisodeReturns>,
}

pub struct A2cTrainer {
    config: A2cConfig,
    actor: SharedAgentNetwork,
    critic: SharedAgentNetwork,
    policy_rng: Rng,
    env_steps: usize,
    updates: usize,
    current: Option<Vec<Vec<f64>>>,
    episode_returns: Vec<f64>,
    episode_team: f64,
    episode_len: usize,
    buffers: Option<GradBuffers>,
}

fn feed_forward(net: &SharedAgentNetwork) -> bool {
    net.topology().layers().iter().all(|l| l.kind == LayerKind::Dense)
}

impl A2cTrainer {
    /// `seed` feeds the action-sampling stream only.
    pub fn new(config: A2cConfig, actor: SharedAgentNetwork, critic: SharedAgentNetwork, seed: u64) -> Result<Self> {
        config.validate()?;
        if actor.n_agents() != critic.n_agents() || actor.observation_width() != critic.observation_width() {
            return Err(Error::usage("actor and critic must serve the same agents and observations"));
        }
        if critic.output_width() != 1 {
            return Err(Error::usage("critic must output one value"));
        }
        if !feed_forward(&actor) || !feed_forward(&critic) {
            return Err(Error::config("a2c", "actor and critic must be feed-forward"));
        }
        let n = actor.n_agents();
        Ok(Self {
            config,
            actor,
            critic,
            policy_rng: substream(seed, "policy"),
            env_steps: 0,
            updates: 0,
            current: None,
            episode_returns: vec![0.0; n],
            episode_team: 0.0,
            episode_len: 0,
            buffers: None,
        })
    }

    pub fn config(&self) -> &A2cConfig {
        &self.config
    }

    pub fn actor(&self) -> &SharedAgentNetwork {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut SharedAgentNetwork {
        &mut self.actor
    }

    pub fn critic(&self) -> &SharedAgentNetwork {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut SharedAgentNetwork {
        &mut self.critic
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Per-agent action probabilities.
    pub fn policy(&self, observations: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_agents(observations)?;
        observations
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let logits = self.actor.agent_forward(i, o, &self.actor.initial_state())?.output;
                Ok(log_softmax(&logits)?.into_iter().map(f64::exp).collect())
            })
            .collect()
    }

    fn check_agents(&self, observations: &[Vec<f64>]) -> Result<()> {
        if observations.len() != self.actor.n_agents() {
            return Err(Error::usage(format!(
                "expected {} observations, got {}",
                self.actor.n_agents(),
                observations.len()
            )));
        }
        Ok(())
    }

    fn sample_with_caches(&mut self, observations: &[Vec<f64>]) -> Result<(PolicySample, Vec<ForwardCache>)> {
        self.check_agents(observations)?;
        let n = observations.len();
        let mut s = PolicySample {
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            entropies: Vec::with_capacity(n),
            probs: Vec::with_capacity(n),
        };
        let mut caches = Vec::with_capacity(n);
        let empty = self.actor.initial_state();
        for (i, o) in observations.iter().enumerate() {
            let step = self.actor.agent_forward(i, o, &empty)?;
            let logp = log_softmax(&step.output)?;
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            let a = sample_categorical(&probs, &mut self.policy_rng);
            s.actions.push(a);
            s.log_probs.push(logp[a]);
            s.entropies.push(entropy(&probs));
            s.probs.push(probs);
            caches.push(step.cache);
        }
        Ok((s, caches))
    }

    /// Categorical sample per agent from the softmax policy.
    pub fn sample_actions(&mut self, observations: &[Vec<f64>]) -> Result<PolicySample> {
        Ok(self.sample_with_caches(observations)?.0)
    }

    /// Most probable action per agent (lowest index on ties).
    pub fn greedy_actions(&self, observations: &[Vec<f64>]) -> Result<Vec<usize>> {
        self.check_agents(observations)?;
        let empty = self.actor.initial_state();
        observations
            .iter()
            .enumerate()
            .map(|(i, o)| Ok(greedy_action(&self.actor.agent_forward(i, o, &empty)?.output)))
            .collect()
    }

    fn values_with_caches(&self, observations: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<ForwardCache>)> {
        let empty = self.critic.initial_state();
        let mut values = Vec::with_capacity(observations.len());
        let mut caches = Vec::with_capacity(observations.len());
        for (i, o) in observations.iter().enumerate() {
            let step = self.critic.agent_forward(i, o, &empty)?;
            values.push(step.output[0]);
            caches.push(step.cache);
        }
        Ok((values, caches))
    }

    pub fn values(&self, observations: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_agents(observations)?;
        Ok(self.values_with_caches(observations)?.0)
    }

    /// Steps `env` for up to `n` steps, stopping early at the end of an
    /// episode. The environment is reset lazily at the start of the next
    /// segment. Truncated episodes bootstrap from the critic.
    pub fn collect_segment(&mut self, env: &mut dyn Environment) -> Result<(RolloutSegment, Option<EpisodeReturns>)> {
        let mut obs = match self.current.take() {
            Some(o) => o,
            None => env.reset().observations,
        };
        let mut seg = RolloutSegment::default();
        let mut finished = None;
        for _ in 0..self.config.n_steps {
            let (sample, a_caches) = self.sample_with_caches(&obs)?;
            let (values, c_caches) = self.values_with_caches(&obs)?;
            let out = env.step(&sample.actions)?;
            self.env_steps += 1;
            let (done, terminated) = (out.done(), out.terminated);
            self.episode_len += 1;
            self.episode_team += out.team_reward;
            for (acc, r) in self.episode_returns.iter_mut().zip(&out.rewards) {
                *acc += r;
            }
            seg.observations.push(std::mem::replace(&mut obs, out.observations));
            seg.actions.push(sample.actions);
            seg.rewards.push(out.rewards);
            seg.values.push(values);
            seg.actor_caches.push(a_caches);
            seg.critic_caches.push(c_caches);
            if done {
                seg.terminated = terminated;
                let n = self.actor.n_agents();
                finished = Some(EpisodeReturns {
                    agent_returns: std::mem::replace(&mut self.episode_returns, vec![0.0; n]),
                    team_return: std::mem::take(&mut self.episode_team),
                    length: std::mem::take(&mut self.episode_len),
                });
                break;
            }
        }
        seg.bootstrap = if seg.terminated {
            vec![0.0; self.actor.n_agents()]
        } else {
            self.values_with_caches(&obs)?.0
        };
        if finished.is_none() {
            self.current = Some(obs);
        }
        Ok((seg, finished))
    }

    /// Losses and per-agent gradients for `segment`. Forward passes cached
    /// during collection are reused; a hand-built segment is re-evaluated.
    pub fn a2c_loss(&self, segment: &RolloutSegment) -> Result<A2cLoss> {
        let mut actor_grads = self.actor.zero_gradients();
        let mut critic_grads = self.critic.zero_gradients();
        let terms = self.loss_into(segment, &mut actor_grads, &mut critic_grads)?;
        Ok(A2cLoss { terms, actor_grads, critic_grads })
    }

    fn loss_into(
        &self,
        segment: &RolloutSegment,
        actor_grads: &mut [GradientStore],
        critic_grads: &mut [GradientStore],
    ) -> Result<LossTerms> {
        let (t_len, n) = (segment.len(), segment.n_agents());
        if t_len == 0 || n != self.actor.n_agents() {
            return Err(Error::usage("segment does not match the trainer"));
        }
        let adv = n_step_advantage(segment, self.config.gamma);
        let cached = segment.actor_caches.len() == t_len;
        actor_grads.iter_mut().for_each(GradientStore::clear);
        critic_grads.iter_mut().for_each(GradientStore::clear);
        let (beta, c) = (self.config.entropy_coef, self.config.value_coef);
        let inv_t = 1.0 / t_len as f64;
        let (mut policy_loss, mut value_loss, mut ent) = (0.0, 0.0, 0.0);
        let a_empty = self.actor.initial_state();
        let c_empty = self.critic.initial_state();

        for t in 0..t_len {
            for i in 0..n {
                let fresh_actor;
                let a_cache = if cached {
                    &segment.actor_caches[t][i]
                } else {
                    fresh_actor = self.actor.agent_forward(i, &segment.observations[t][i], &a_empty)?.cache;
                    &fresh_actor
                };
                let logp = log_softmax(a_cache.output())?;
                let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
                let h = entropy(&probs);
                let a = segment.actions[t][i];
                if a >= probs.len() {
                    return Err(Error::usage(format!("action {a} out of range")));
                }
                let adv_ti = adv.advantages[t][i];
                policy_loss -= adv_ti * logp[a];
                ent += h;
                // d/dz of -A log p_a - beta H
                let d_logits: Vec<f64> = probs
                    .iter()
                    .zip(&logp)
                    .enumerate()
                    .map(|(j, (&p, &lp))| {
                        let onehot = if j == a { 1.0 } else { 0.0 };
                        let plogp = if p > 0.0 { lp } else { 0.0 };
                        inv_t * (-adv_ti * (onehot - p) + beta * p * (plogp + h))
                    })
                    .collect();
                self.actor.agent_backward(i, a_cache, &d_logits, None, &mut actor_grads[i])?;

                let fresh_critic;
                let c_cache = if cached {
                    &segment.critic_caches[t][i]
                } else {
                    fresh_critic = self.critic.agent_forward(i, &segment.observations[t][i], &c_empty)?.cache;
                    &fresh_critic
                };
                let v = c_cache.output()[0];
                let err = v - adv.returns[t][i];
                value_loss += err * err;
                self.critic.agent_backward(i, c_cache, &[inv_t * 2.0 * c * err], None, &mut critic_grads[i])?;
            }
        }
        for i in 0..n {
            self.actor.mask_agent_gradient(i, &mut actor_grads[i]);
            self.critic.mask_agent_gradient(i, &mut critic_grads[i]);
        }
        let scale = 1.0 / (t_len * n) as f64;
        let (policy_loss, value_loss, entropy) = (policy_loss * scale, value_loss * scale, ent * scale);
        let total = policy_loss + c * value_loss - beta * entropy;
        if !total.is_finite() {
            return Err(Error::Training(format!(
                "non-finite loss (policy {policy_loss}, value {value_loss}, entropy {entropy})"
            )));
        }
        Ok(LossTerms { total, policy_loss, value_loss, entropy })
    }

    /// One combined step on actor and critic; returns the loss terms.
    pub fn a2c_update(&mut self, segment: &RolloutSegment) -> Result<LossTerms> {
        let mut b = match self.buffers.take() {
            Some(b) => b,
            None => GradBuffers {
                actor: self.actor.zero_gradients(),
                critic: self.critic.zero_gradients(),
                actor_roots: self.actor.zero_root_gradients(),
                critic_roots: self.critic.zero_root_gradients(),
            },
        };
        let result = self.update_with(segment, &mut b);
        self.buffers = Some(b);
        result
    }

    fn update_with(&mut self, segment: &RolloutSegment, b: &mut GradBuffers) -> Result<LossTerms> {
        let terms = self.loss_into(segment, &mut b.actor, &mut b.critic)?;
        self.actor.accumulate_agent_gradients_into(&b.actor, &mut b.actor_roots)?;
        self.critic.accumulate_agent_gradients_into(&b.critic, &mut b.critic_roots)?;
        if let Some(max) = self.config.optimizer.max_grad_norm {
            let mut all: Vec<&mut GradientStore> =
                b.actor_roots.iter_mut().chain(b.critic_roots.iter_mut()).collect();
            clip_global_norm(&mut all, max);
        }
        let unclipped = OptimizerConfig { max_grad_norm: None, ..self.config.optimizer };
        self.actor.apply_gradients(&b.actor_roots, &unclipped)?;
        self.critic.apply_gradients(&b.critic_roots, &unclipped)?;
        self.updates += 1;
        Ok(terms)
    }

    pub fn train_segment(&mut self, env: &mut dyn Environment) -> Result<SegmentStats> {
        let (seg, episode) = self.collect_segment(env)?;
        let loss = self.a2c_update(&seg)?;
        Ok(SegmentStats {
            steps: seg.len(),
            policy_loss: loss.policy_loss,
            value_loss: loss.value_loss,
            entropy: loss.entropy,
            episode,
        })
    }

    /// Mean team return over greedy episodes on `env`.
    pub fn evaluate(&self, env: &mut dyn Environment, episodes: usize) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..episodes {
            let mut obs = env.reset().observations;
            loop {
                let out = env.step(&self.greedy_actions(&obs)?)?;
                total += out.team_reward;
                if out.done() {
                    break;
                }
                obs = out.observations;
            }
        }
        Ok(total / episodes.max(1) as f64)
    }
}
