use rand::seq::index::sample;

use super::schedule::PruningSchedule;
use crate::netcore::{LayerKind, NetworkTopology};
use crate::rng::indexed_stream;
use crate::Result;

/// Keep/prune flags for every hidden unit of one agent's network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NeuronMask {
    layers: Vec<Vec<bool>>,
}

impl NeuronMask {
    pub fn new(layers: Vec<Vec<bool>>) -> Self {
        Self { layers }
    }

    pub fn all_kept(topology: &NetworkTopology) -> Self {
        Self { layers: topology.hidden_widths().into_iter().map(|w| vec![true; w]).collect() }
    }

    pub fn layers(&self) -> &[Vec<bool>] {
        &self.layers
    }

    pub fn kept(&self, layer: usize) -> usize {
        self.layers[layer].iter().filter(|&&k| k).count()
    }

    pub fn pruned(&self, layer: usize) -> usize {
        self.layers[layer].len() - self.kept(layer)
    }

    pub fn is_all_kept(&self) -> bool {
        self.layers.iter().flatten().all(|&k| k)
    }

    /// Activation gates (1.0 kept, 0.0 pruned) for [`crate::netcore::forward`].
    pub fn gates(&self) -> Vec<Vec<f64>> {
        self.layers
            .iter()
            .map(|l| l.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    pub fn matches(&self, topology: &NetworkTopology) -> bool {
        let widths = topology.hidden_widths();
        self.layers.len() == widths.len() && self.layers.iter().zip(&widths).all(|(l, &w)| l.len() == w)
    }
}

/// One mask per agent, all drawn under the same schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronMaskGroup {
    pub masks: Vec<NeuronMask>,
    pub schedule: PruningSchedule,
    pub seed: u64,
}

impl NeuronMaskGroup {
    pub fn n_agents(&self) -> usize {
        self.masks.len()
    }

    pub fn mask(&self, agent: usize) -> &NeuronMask {
        &self.masks[agent]
    }

    /// True when some pair of agents drew identical masks.
    pub fn has_collisions(&self) -> bool {
        (0..self.masks.len())
            .any(|i| (i + 1..self.masks.len()).any(|j| self.masks[i] == self.masks[j]))
    }
}

fn draw_mask(
    topology: &NetworkTopology,
    schedule: &PruningSchedule,
    rng: &mut crate::rng::Rng,
) -> NeuronMask {
    let layers = topology
        .hidden_widths()
        .into_iter()
        .enumerate()
        .map(|(k, w)| {
            let mut keep = vec![true; w];
            for j in sample(rng, w, schedule.prune_count(k, w)) {
                keep[j] = false;
            }
            keep
        })
        .collect();
    NeuronMask { layers }
}

/// Independent structured masks, one RNG substream per agent.
pub fn generate_group_tickets(
    topology: &NetworkTopology,
    schedule: &PruningSchedule,
    n_agents: usize,
    seed: u64,
) -> Result<NeuronMaskGroup> {
    check_agents(n_agents)?;
    schedule.validate(&topology.hidden_widths())?;
    let masks = (0..n_agents)
        .map(|i| draw_mask(topology, schedule, &mut indexed_stream(seed, i as u64)))
        .collect();
    Ok(NeuronMaskGroup { masks, schedule: schedule.clone(), seed })
}

/// A single structured mask replicated for every agent.
pub fn generate_single_ticket(
    topology: &NetworkTopology,
    schedule: &PruningSchedule,
    n_agents: usize,
    seed: u64,
) -> Result<NeuronMaskGroup> {
    check_agents(n_agents)?;
    schedule.validate(&topology.hidden_widths())?;
    let mask = draw_mask(topology, schedule, &mut indexed_stream(seed, 0));
    Ok(NeuronMaskGroup { masks: vec![mask; n_agents], schedule: schedule.clone(), seed })
}

fn check_agents(n_agents: usize) -> Result<()> {
    if n_agents == 0 {
        return Err(crate::Error::config("n_agents", "at least one agent is required"));
    }
    Ok(())
}

/// Elementwise 0/1 multiplier over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMask {
    values: Vec<f64>,
}

impl WeightMask {
    pub fn ones(topology: &NetworkTopology) -> Self {
        Self { values: vec![1.0; topology.parameter_count()] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0.0).count()
    }

    pub fn is_zero(&self, index: usize) -> bool {
        self.values[index] == 0.0
    }

    /// `values ⊙ mask`, in place.
    pub fn apply(&self, values: &mut [f64]) {
        for (v, m) in values.iter_mut().zip(&self.values) {
            *v *= m;
        }
    }
}

/// Per-weight random masks (biases untouched), drawn per agent.
///
/// For hidden vector `k` the pool is every weight of the layer producing it;
/// a GRU pools its input and recurrent weights.
pub fn generate_unstructured_masks(
    topology: &NetworkTopology,
    schedule: &PruningSchedule,
    n_agents: usize,
    seed: u64,
) -> Result<Vec<WeightMask>> {
    check_agents(n_agents)?;
    schedule.validate(&topology.hidden_widths())?;
    let n_hidden = topology.hidden_widths().len();
    Ok((0..n_agents)
        .map(|i| {
            let mut rng = indexed_stream(seed, i as u64);
            let mut mask = WeightMask::ones(topology);
            for (k, (spec, blocks)) in
                topology.layers().iter().zip(topology.blocks()).take(n_hidden).enumerate()
            {
                let mut pool: Vec<usize> = blocks.weight.clone().collect();
                if let Some(rw) = &blocks.recurrent_weight {
                    debug_assert_eq!(spec.kind, LayerKind::Gru);
                    pool.extend(rw.clone());
                }
                let count = schedule.prune_count(k, pool.len());
                for idx in sample(&mut rng, pool.len(), count) {
                    mask.values[pool[idx]] = 0.0;
                }
            }
            mask
        })
        .collect())
}

/// Zeroes every weight attached to a pruned unit: its incoming row, its bias
/// and its outgoing column. GRU units are removed across all three gates,
/// both bias vectors and the recurrent column.
pub fn expand_to_weight_mask(mask: &NeuronMask, topology: &NetworkTopology) -> Result<WeightMask> {
    if !mask.matches(topology) {
        return Err(crate::Error::usage("neuron mask does not match topology"));
    }
    let mut out = WeightMask::ones(topology);
    let layers = topology.layers();
    let blocks = topology.blocks();
    for (k, keep) in mask.layers.iter().enumerate() {
        let spec = &layers[k];
        let b = &blocks[k];
        let o = spec.output_width;
        for j in keep.iter().enumerate().filter(|(_, &kept)| !kept).map(|(j, _)| j) {
            match spec.kind {
                LayerKind::Dense => {
                    let i = spec.input_width;
                    out.values[b.weight.start + j * i..b.weight.start + (j + 1) * i].fill(0.0);
                    out.values[b.bias.start + j] = 0.0;
                }
                LayerKind::Gru => {
                    let i = spec.input_width;
                    let rw = b.recurrent_weight.clone().expect("gru block");
                    let rb = b.recurrent_bias.clone().expect("gru block");
                    for gate in 0..3 {
                        let row = gate * o + j;
                        out.values[b.weight.start + row * i..b.weight.start + (row + 1) * i]
                            .fill(0.0);
                        out.values[rw.start + row * o..rw.start + (row + 1) * o].fill(0.0);
                        out.values[b.bias.start + row] = 0.0;
                        out.values[rb.start + row] = 0.0;
                    }
                    for row in 0..3 * o {
                        out.values[rw.start + row * o + j] = 0.0;
                    }
                }
            }
            // Outgoing column in the next layer.
            let next = &layers[k + 1];
            let nb = &blocks[k + 1];
            let rows = match next.kind {
                LayerKind::Dense => next.output_width,
                LayerKind::Gru => 3 * next.output_width,
            };
            for row in 0..rows {
                out.values[nb.weight.start + row * next.input_width + j] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Sharing statistics of one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOverlap {
    /// Mean over agent pairs of jointly kept units; `None` with a single agent.
    pub mean_shared: Option<f64>,
    pub min_shared: Option<usize>,
    pub max_shared: Option<usize>,
    /// Per unit, how many agents keep it.
    pub owners: Vec<usize>,
}

pub fn mask_overlap_stats(group: &NeuronMaskGroup) -> Vec<LayerOverlap> {
    let n = group.masks.len();
    let n_layers = group.masks.first().map_or(0, |m| m.layers.len());
    (0..n_layers)
        .map(|k| {
            let width = group.masks[0].layers[k].len();
            let owners = (0..width)
                .map(|j| group.masks.iter().filter(|m| m.layers[k][j]).count())
                .collect();
            let mut shared = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    let la = &group.masks[a].layers[k];
                    let lb = &group.masks[b].layers[k];
                    shared.push(la.iter().zip(lb).filter(|(x, y)| **x && **y).count());
                }
            }
            LayerOverlap {
                mean_shared: (!shared.is_empty())
                    .then(|| shared.iter().sum::<usize>() as f64 / shared.len() as f64),
                min_shared: shared.iter().copied().min(),
                max_shared: shared.iter().copied().max(),
                owners,
            }
        })
        .collect()
}
