//! State-conditioned monotone mixer.
//!
//! Hypernetworks map the global state to the mixer's weights and biases:
//!
//! ```text
//! h    = elu(q · |W1(s)| + b1(s))      W1: N x E, b1: E
//! Q_jt = h · |w2(s)| + v(s)            w2: E,     v: scalar
//! ```
//!
//! The absolute values keep every mixing weight non-negative and `elu` is
//! increasing, so `Q_jt` is non-decreasing in every agent utility.

use serde::{Deserialize, Serialize};

use crate::netcore::{
    backward_into, forward, init_parameters, Activation, ForwardCache, GradientStore,
    NetworkTopology, ParameterStore, RecurrentState,
};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixerConfig {
    /// Mixer hidden width `E`.
    pub embed_width: usize,
    /// Hidden width of the weight hypernetworks.
    pub hypernet_width: usize,
}

impl Default for MixerConfig {
    fn default() -> Self {
        Self { embed_width: 32, hypernet_width: 64 }
    }
}

const W1: usize = 0;
const B1: usize = 1;
const W2: usize = 2;
const V: usize = 3;

/// Hypernetwork parameters; index order is `[w1, b1, w2, v]`.
#[derive(Debug, Clone)]
pub struct MixingNetwork {
    n_agents: usize,
    state_width: usize,
    embed: usize,
    topologies: Vec<NetworkTopology>,
    params: Vec<ParameterStore>,
}

#[derive(Debug, Clone)]
pub struct MixerCache {
    qs: Vec<f64>,
    w1_raw: Vec<f64>,
    w2_raw: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    hyper: Vec<ForwardCache>,
}

fn abs_grad(raw: f64) -> f64 {
    if raw > 0.0 {
        1.0
    } else if raw < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

impl MixingNetwork {
    pub fn new(n_agents: usize, state_width: usize, config: &MixerConfig, seed: u64) -> Result<Self> {
        if n_agents == 0 || state_width == 0 || config.embed_width == 0 || config.hypernet_width == 0 {
            return Err(Error::config("qmix.mixer", "mixer widths must be positive"));
        }
        let (e, h) = (config.embed_width, config.hypernet_width);
        let relu = Activation::Relu;
        let id = Activation::Identity;
        let topologies = vec![
            NetworkTopology::mlp(state_width, &[h], n_agents * e, relu, id)?,
            NetworkTopology::mlp(state_width, &[], e, relu, id)?,
            NetworkTopology::mlp(state_width, &[h], e, relu, id)?,
            NetworkTopology::mlp(state_width, &[e], 1, relu, id)?,
        ];
        let params = topologies
            .iter()
            .enumerate()
            .map(|(k, t)| init_parameters(t, derive_seed(seed, &format!("hyper-{k}"))))
            .collect();
        Ok(Self { n_agents, state_width, embed: e, topologies, params })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn topologies(&self) -> &[NetworkTopology] {
        &self.topologies
    }

    pub fn params(&self) -> &[ParameterStore] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [ParameterStore] {
        &mut self.params
    }

    pub fn zero_gradients(&self) -> Vec<GradientStore> {
        self.topologies.iter().map(GradientStore::zeros).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.topologies.iter().map(NetworkTopology::parameter_count).sum()
    }

    /// The mixing weights `(|W1(s)|, |w2(s)|)` generated for `state`.
    pub fn mixing_weights(&self, state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (_, cache) = self.forward(state, &vec![0.0; self.n_agents])?;
        Ok((
            cache.w1_raw.iter().map(|v| v.abs()).collect(),
            cache.w2_raw.iter().map(|v| v.abs()).collect(),
        ))
    }

    fn hyper(&self, k: usize, state: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let empty = RecurrentState { hidden: Vec::new() };
        let pass = forward(&self.params[k], &self.topologies[k], state, &empty, None)?;
        Ok((pass.output, pass.cache))
    }

    pub fn forward(&self, state: &[f64], qs: &[f64]) -> Result<(f64, MixerCache)> {
        if qs.len() != self.n_agents {
            return Err(Error::usage(format!("mixer expects {} utilities", self.n_agents)));
        }
        if state.len() != self.state_width {
            return Err(Error::usage("mixer state width mismatch"));
        }
        let e = self.embed;
        let (w1_raw, c_w1) = self.hyper(W1, state)?;
        let (b1, c_b1) = self.hyper(B1, state)?;
        let (w2_raw, c_w2) = self.hyper(W2, state)?;
        let (v, c_v) = self.hyper(V, state)?;
        let mut pre = b1;
        for (i, &q) in qs.iter().enumerate() {
            for (k, p) in pre.iter_mut().enumerate() {
                *p += q * w1_raw[i * e + k].abs();
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|&x| elu(x)).collect();
        let q_tot = hidden.iter().zip(&w2_raw).map(|(h, w)| h * w.abs()).sum::<f64>() + v[0];
        Ok((
            q_tot,
            MixerCache { qs: qs.to_vec(), w1_raw, w2_raw, pre, hidden, hyper: vec![c_w1, c_b1, c_w2, c_v] },
        ))
    }

    /// Accumulates `d q_tot` into `grads` (one store per hypernetwork) and
    /// returns `d q_tot / d q_i` scaled by `d_q_tot`.
    pub fn backward(&self, cache: &MixerCache, d_q_tot: f64, grads: &mut [GradientStore]) -> Result<Vec<f64>> {
        if grads.len() != 4 {
            return Err(Error::usage("mixer gradient needs four stores"));
        }
        let e = self.embed;
        let d_w2_raw: Vec<f64> = cache
            .hidden
            .iter()
            .zip(&cache.w2_raw)
            .map(|(h, w)| d_q_tot * h * abs_grad(*w))
            .collect();
        let d_pre: Vec<f64> = cache
            .pre
            .iter()
            .zip(&cache.w2_raw)
            .map(|(&p, w)| d_q_tot * w.abs() * elu_grad(p))
            .collect();
        let mut d_w1_raw = vec![0.0; self.n_agents * e];
        let mut d_qs = vec![0.0; self.n_agents];
        for (i, &q) in cache.qs.iter().enumerate() {
            for k in 0..e {
                let raw = cache.w1_raw[i * e + k];
                d_w1_raw[i * e + k] = d_pre[k] * q * abs_grad(raw);
                d_qs[i] += d_pre[k] * raw.abs();
            }
        }
        let outs = [d_w1_raw, d_pre, d_w2_raw, vec![d_q_tot]];
        for (k, d) in outs.iter().enumerate() {
            backward_into(&self.params[k], &self.topologies[k], &cache.hyper[k], d, None, &mut grads[k])?;
        }
        Ok(d_qs)
    }

    pub fn copy_parameters_from(&mut self, other: &MixingNetwork) {
        self.params.clone_from(&other.params);
    }
}
