use rand::Rng as _;
use rand::SeedableRng;

use super::topology::{LayerKind, NetworkTopology};
use crate::rng::Rng;

/// Flat parameter vector laid out by [`NetworkTopology::blocks`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    values: Vec<f64>,
}

impl ParameterStore {
    pub fn zeros(topology: &NetworkTopology) -> Self {
        Self { values: vec![0.0; topology.parameter_count()] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn matches(&self, topology: &NetworkTopology) -> bool {
        self.values.len() == topology.parameter_count()
    }
}

/// Uniform fan-in scaled weights with unit-variance scaling
/// (`std = 1/sqrt(fan_in)`), zero biases.
pub fn init_parameters(topology: &NetworkTopology, seed: u64) -> ParameterStore {
    let mut rng = Rng::seed_from_u64(seed);
    init_parameters_with(topology, &mut rng)
}

pub fn init_parameters_with(topology: &NetworkTopology, rng: &mut Rng) -> ParameterStore {
    let mut store = ParameterStore::zeros(topology);
    let values = store.values_mut();
    for (spec, blocks) in topology.layers().iter().zip(topology.blocks()) {
        let bound = (3.0 / spec.input_width as f64).sqrt();
        for v in &mut values[blocks.weight.clone()] {
            *v = rng.gen_range(-bound..bound);
        }
        if spec.kind == LayerKind::Gru {
            let bound = (3.0 / spec.output_width as f64).sqrt();
            for v in &mut values[blocks.recurrent_weight.clone().expect("gru block")] {
                *v = rng.gen_range(-bound..bound);
            }
        }
    }
    store
}

/// Gradient accumulator congruent with a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientStore {
    values: Vec<f64>,
    count: usize,
}

impl GradientStore {
    pub fn zeros(topology: &NetworkTopology) -> Self {
        Self::with_len(topology.parameter_count())
    }

    pub fn with_len(len: usize) -> Self {
        Self { values: vec![0.0; len], count: 0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Number of backward passes accumulated into this store.
    pub fn count(&self) -> usize {
        self.count
    }

    pub(crate) fn bump(&mut self) {
        self.count += 1;
    }

    pub fn add_assign(&mut self, other: &GradientStore) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        self.count += other.count;
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        self.count = 0;
    }
}
