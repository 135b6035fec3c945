//! Forward and backward passes.
//!
//! `gates` optionally multiplies each hidden feature vector elementwise after
//! its activation. A zero gate entry removes that neuron: its value, its
//! downstream influence and every gradient routed through it vanish, which is
//! the same function as zeroing its incoming row, bias and outgoing column.

use super::linalg::{affine, outer_acc, sigmoid, softmax_in_place, transpose_matvec_acc};
use super::params::{GradientStore, ParameterStore};
use super::topology::{Activation, LayerKind, NetworkTopology};
use crate::{Error, Result};

/// Hidden state of the (single) GRU layer; empty for feed-forward nets.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub hidden: Vec<f64>,
}

impl RecurrentState {
    pub fn initial(topology: &NetworkTopology) -> Self {
        Self { hidden: vec![0.0; topology.gru_width().unwrap_or(0)] }
    }
}

#[derive(Debug, Clone)]
struct GruCache {
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// `W_hn h + b_hn`, needed for the reset-gate derivative.
    hn: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Vec<f64>,
    /// Pre-activation for dense layers, unused for GRU.
    pre: Vec<f64>,
    /// Post-activation, post-gate output.
    output: Vec<f64>,
    gate: Option<Vec<f64>>,
    gru: Option<GruCache>,
}

/// Everything `backward` needs from one forward step.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    /// Post-activation vector of every layer, output layer last.
    pub fn activations(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().map(|l| l.output.as_slice())
    }

    pub fn hidden_activations(&self) -> impl Iterator<Item = &[f64]> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.output.as_slice())
    }

    pub fn output(&self) -> &[f64] {
        &self.layers[self.layers.len() - 1].output
    }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub output: Vec<f64>,
    pub state: RecurrentState,
    pub cache: ForwardCache,
}

fn check_gates(topology: &NetworkTopology, gates: Option<&[Vec<f64>]>) -> Result<()> {
    if let Some(g) = gates {
        let widths = topology.hidden_widths();
        if g.len() != widths.len() || g.iter().zip(&widths).any(|(v, &w)| v.len() != w) {
            return Err(Error::usage("gate vectors do not match the hidden widths"));
        }
    }
    Ok(())
}

pub fn forward(
    params: &ParameterStore,
    topology: &NetworkTopology,
    input: &[f64],
    state: &RecurrentState,
    gates: Option<&[Vec<f64>]>,
) -> Result<ForwardPass> {
    if !params.matches(topology) {
        return Err(Error::usage("parameter store does not match topology"));
    }
    if input.len() != topology.input_width() {
        return Err(Error::usage(format!(
            "input has {} values, topology expects {}",
            input.len(),
            topology.input_width()
        )));
    }
    if state.hidden.len() != topology.gru_width().unwrap_or(0) {
        return Err(Error::usage("recurrent state width does not match the gru layer"));
    }
    check_gates(topology, gates)?;

    let values = params.values();
    let n_layers = topology.layers().len();
    let mut layers = Vec::with_capacity(n_layers);
    let mut x = input.to_vec();
    let mut new_state = RecurrentState { hidden: Vec::new() };

    for (k, (spec, blocks)) in topology.layers().iter().zip(topology.blocks()).enumerate() {
        let gate = gates.filter(|_| k + 1 < n_layers).map(|g| g[k].clone());
        let o = spec.output_width;
        match spec.kind {
            LayerKind::Dense => {
                let mut pre = vec![0.0; o];
                affine(&values[blocks.weight.clone()], &values[blocks.bias.clone()], &x, &mut pre);
                let mut out = pre.clone();
                match spec.activation {
                    Activation::Relu => out.iter_mut().for_each(|v| *v = v.max(0.0)),
                    Activation::Tanh => out.iter_mut().for_each(|v| *v = v.tanh()),
                    Activation::Identity => {}
                    Activation::Softmax => softmax_in_place(&mut out),
                }
                if let Some(g) = &gate {
                    out.iter_mut().zip(g).for_each(|(v, m)| *v *= m);
                }
                let input = std::mem::replace(&mut x, out.clone());
                layers.push(LayerCache { input, pre, output: out, gate, gru: None });
            }
            LayerKind::Gru => {
                let h = &state.hidden;
                let mut gi = vec![0.0; 3 * o];
                let mut gh = vec![0.0; 3 * o];
                affine(&values[blocks.weight.clone()], &values[blocks.bias.clone()], &x, &mut gi);
                affine(
                    &values[blocks.recurrent_weight.clone().expect("gru block")],
                    &values[blocks.recurrent_bias.clone().expect("gru block")],
                    h,
                    &mut gh,
                );
                let mut r = vec![0.0; o];
                let mut z = vec![0.0; o];
                let mut n = vec![0.0; o];
                let mut out = vec![0.0; o];
                for j in 0..o {
                    r[j] = sigmoid(gi[j] + gh[j]);
                    z[j] = sigmoid(gi[o + j] + gh[o + j]);
                    n[j] = (gi[2 * o + j] + r[j] * gh[2 * o + j]).tanh();
                    out[j] = (1.0 - z[j]) * n[j] + z[j] * h[j];
                }
                if let Some(g) = &gate {
                    out.iter_mut().zip(g).for_each(|(v, m)| *v *= m);
                }
                new_state.hidden = out.clone();
                let hn = gh[2 * o..].to_vec();
                let input = std::mem::replace(&mut x, out.clone());
                layers.push(LayerCache {
                    input,
                    pre: Vec::new(),
                    output: out,
                    gate,
                    gru: Some(GruCache { h_prev: h.clone(), r, z, n, hn }),
                });
            }
        }
    }
    Ok(ForwardPass { output: x, state: new_state, cache: ForwardCache { layers } })
}

/// Gradients flowing out of one backward step.
#[derive(Debug, Clone)]
pub struct BackwardFlow {
    pub input: Vec<f64>,
    /// Gradient with respect to the recurrent state fed into this step.
    pub state: Vec<f64>,
}

/// Backpropagates `output_gradient` (and optionally the gradient arriving at
/// this step's outgoing recurrent state) and accumulates into `grads`.
pub fn backward_into(
    params: &ParameterStore,
    topology: &NetworkTopology,
    cache: &ForwardCache,
    output_gradient: &[f64],
    state_gradient: Option<&[f64]>,
    grads: &mut GradientStore,
) -> Result<BackwardFlow> {
    if cache.layers.len() != topology.layers().len() {
        return Err(Error::usage("forward cache does not belong to this topology"));
    }
    if output_gradient.len() != topology.output_width() {
        return Err(Error::usage("output gradient width mismatch"));
    }
    if grads.len() != topology.parameter_count() || !params.matches(topology) {
        return Err(Error::usage("gradient store does not match topology"));
    }
    let gru_width = topology.gru_width().unwrap_or(0);
    if let Some(s) = state_gradient {
        if s.len() != gru_width {
            return Err(Error::usage("state gradient width mismatch"));
        }
    }

    let values = params.values();
    let mut d = output_gradient.to_vec();
    let mut d_state = vec![0.0; gru_width];

    for ((spec, blocks), lc) in
        topology.layers().iter().zip(topology.blocks()).zip(&cache.layers).rev()
    {
        let o = spec.output_width;
        if d.len() != o || lc.output.len() != o || lc.input.len() != spec.input_width {
            return Err(Error::usage("forward cache does not belong to this topology"));
        }
        match spec.kind {
            LayerKind::Dense => {
                if let Some(g) = &lc.gate {
                    d.iter_mut().zip(g).for_each(|(v, m)| *v *= m);
                }
                match spec.activation {
                    Activation::Relu => {
                        d.iter_mut().zip(&lc.pre).for_each(|(v, &p)| {
                            if p <= 0.0 {
                                *v = 0.0
                            }
                        });
                    }
                    Activation::Tanh => {
                        d.iter_mut().zip(&lc.pre).for_each(|(v, &p)| {
                            let t = p.tanh();
                            *v *= 1.0 - t * t;
                        });
                    }
                    Activation::Identity => {}
                    Activation::Softmax => {
                        let y = &lc.output;
                        let s: f64 = d.iter().zip(y).map(|(a, b)| a * b).sum();
                        d.iter_mut().zip(y).for_each(|(v, &yi)| *v = yi * (*v - s));
                    }
                }
                let g = grads.values_mut();
                outer_acc(&mut g[blocks.weight.clone()], &d, &lc.input);
                g[blocks.bias.clone()].iter_mut().zip(&d).for_each(|(a, b)| *a += b);
                let mut dx = vec![0.0; spec.input_width];
                transpose_matvec_acc(&values[blocks.weight.clone()], &d, &mut dx);
                d = dx;
            }
            LayerKind::Gru => {
                let gc = lc.gru.as_ref().ok_or_else(|| Error::usage("missing gru cache"))?;
                if let Some(s) = state_gradient {
                    d.iter_mut().zip(s).for_each(|(a, b)| *a += b);
                }
                if let Some(g) = &lc.gate {
                    d.iter_mut().zip(g).for_each(|(v, m)| *v *= m);
                }
                let mut d_gi = vec![0.0; 3 * o];
                let mut d_gh = vec![0.0; 3 * o];
                let mut d_h = vec![0.0; o];
                for j in 0..o {
                    let (r, z, n, h) = (gc.r[j], gc.z[j], gc.n[j], gc.h_prev[j]);
                    let dn = d[j] * (1.0 - z);
                    let dz = d[j] * (h - n);
                    d_h[j] = d[j] * z;
                    let dan = dn * (1.0 - n * n);
                    let dar = dan * gc.hn[j] * r * (1.0 - r);
                    let daz = dz * z * (1.0 - z);
                    d_gi[j] = dar;
                    d_gi[o + j] = daz;
                    d_gi[2 * o + j] = dan;
                    d_gh[j] = dar;
                    d_gh[o + j] = daz;
                    d_gh[2 * o + j] = dan * r;
                }
                let rw = blocks.recurrent_weight.clone().expect("gru block");
                let rb = blocks.recurrent_bias.clone().expect("gru block");
                let g = grads.values_mut();
                outer_acc(&mut g[blocks.weight.clone()], &d_gi, &lc.input);
                outer_acc(&mut g[rw.clone()], &d_gh, &gc.h_prev);
                g[blocks.bias.clone()].iter_mut().zip(&d_gi).for_each(|(a, b)| *a += b);
                g[rb].iter_mut().zip(&d_gh).for_each(|(a, b)| *a += b);
                transpose_matvec_acc(&values[rw], &d_gh, &mut d_h);
                d_state = d_h;
                let mut dx = vec![0.0; spec.input_width];
                transpose_matvec_acc(&values[blocks.weight.clone()], &d_gi, &mut dx);
                d = dx;
            }
        }
    }
    grads.bump();
    Ok(BackwardFlow { input: d, state: d_state })
}

/// Gradient of a scalar loss whose derivative with respect to the network
/// output is `output_gradient`, for a single cached step.
pub fn backward(
    params: &ParameterStore,
    topology: &NetworkTopology,
    cache: &ForwardCache,
    output_gradient: &[f64],
) -> Result<GradientStore> {
    let mut grads = GradientStore::zeros(topology);
    backward_into(params, topology, cache, output_gradient, None, &mut grads)?;
    Ok(grads)
}
