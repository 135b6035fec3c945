use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(input_width: usize, output_width: usize, activation: Activation) -> Self {
        Self { kind: LayerKind::Dense, input_width, output_width, activation }
    }

    /// GRU layers emit their hidden state directly, so they carry the identity activation.
    pub fn gru(input_width: usize, hidden_width: usize) -> Self {
        Self {
            kind: LayerKind::Gru,
            input_width,
            output_width: hidden_width,
            activation: Activation::Identity,
        }
    }

    /// Number of trainable scalars in this layer.
    pub fn parameter_count(&self) -> usize {
        let (i, o) = (self.input_width, self.output_width);
        match self.kind {
            LayerKind::Dense => o * i + o,
            LayerKind::Gru => 3 * o * i + 3 * o * o + 6 * o,
        }
    }
}

/// Offsets of one layer's tensors inside the flat parameter vector.
///
/// Dense layers use `weight` (row-major `out x in`) and `bias`. GRU layers
/// additionally use `recurrent_weight` and `recurrent_bias`; every GRU tensor
/// stacks the reset, update and candidate gates in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerBlocks {
    pub weight: Range<usize>,
    pub bias: Range<usize>,
    pub recurrent_weight: Option<Range<usize>>,
    pub recurrent_bias: Option<Range<usize>>,
}

impl LayerBlocks {
    /// `(rows, cols, range)` for every tensor in storage order.
    pub fn tensors(&self, spec: &LayerSpec) -> Vec<(usize, usize, Range<usize>)> {
        let (i, o) = (spec.input_width, spec.output_width);
        match spec.kind {
            LayerKind::Dense => vec![(o, i, self.weight.clone()), (1, o, self.bias.clone())],
            LayerKind::Gru => vec![
                (3 * o, i, self.weight.clone()),
                (3 * o, o, self.recurrent_weight.clone().expect("gru block")),
                (1, 3 * o, self.bias.clone()),
                (1, 3 * o, self.recurrent_bias.clone().expect("gru block")),
            ],
        }
    }
}

/// Ordered layer stack with validated width chaining.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    layers: Vec<LayerSpec>,
    blocks: Vec<LayerBlocks>,
    parameter_count: usize,
}

impl NetworkTopology {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::usage("topology needs at least one layer"));
        }
        let mut gru_layers = 0;
        for (k, spec) in layers.iter().enumerate() {
            if spec.input_width == 0 || spec.output_width == 0 {
                return Err(Error::usage(format!("layer {k} has a zero width")));
            }
            if let Some(next) = layers.get(k + 1) {
                if spec.output_width != next.input_width {
                    return Err(Error::usage(format!(
                        "layer {k} outputs {} values but layer {} expects {}",
                        spec.output_width,
                        k + 1,
                        next.input_width
                    )));
                }
                if spec.activation == Activation::Softmax {
                    return Err(Error::usage("softmax is only allowed on the output layer"));
                }
            }
            if spec.kind == LayerKind::Gru {
                gru_layers += 1;
                if spec.activation != Activation::Identity {
                    return Err(Error::usage("gru layers must use the identity activation"));
                }
            }
        }
        if gru_layers > 1 {
            return Err(Error::usage("at most one gru layer is supported"));
        }

        let mut offset = 0;
        let mut take = |n: usize| {
            let r = offset..offset + n;
            offset += n;
            r
        };
        let blocks = layers
            .iter()
            .map(|s| {
                let (i, o) = (s.input_width, s.output_width);
                match s.kind {
                    LayerKind::Dense => LayerBlocks {
                        weight: take(o * i),
                        bias: take(o),
                        recurrent_weight: None,
                        recurrent_bias: None,
                    },
                    LayerKind::Gru => {
                        let weight = take(3 * o * i);
                        let recurrent_weight = Some(take(3 * o * o));
                        let bias = take(3 * o);
                        let recurrent_bias = Some(take(3 * o));
                        LayerBlocks { weight, bias, recurrent_weight, recurrent_bias }
                    }
                }
            })
            .collect();
        Ok(Self { layers, blocks, parameter_count: offset })
    }

    /// Fully connected stack: `input -> hidden... -> output`.
    pub fn mlp(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for &h in hidden {
            layers.push(LayerSpec::dense(prev, h, hidden_activation));
            prev = h;
        }
        layers.push(LayerSpec::dense(prev, output, output_activation));
        Self::new(layers)
    }

    /// Dense(relu) -> GRU -> Dense(identity), the recurrent utility layout.
    pub fn recurrent(input: usize, hidden: usize, output: usize) -> Result<Self> {
        Self::new(vec![
            LayerSpec::dense(input, hidden, Activation::Relu),
            LayerSpec::gru(hidden, hidden),
            LayerSpec::dense(hidden, output, Activation::Identity),
        ])
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn blocks(&self) -> &[LayerBlocks] {
        &self.blocks
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output_width
    }

    /// Widths of the hidden feature vectors (every layer output except the last).
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.output_width).collect()
    }

    pub fn gru_width(&self) -> Option<usize> {
        self.layers.iter().find(|l| l.kind == LayerKind::Gru).map(|l| l.output_width)
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_count
    }

    /// Same layers with a wider first input, used for one-hot agent indication.
    pub fn with_extra_inputs(&self, extra: usize) -> Result<Self> {
        let mut layers = self.layers.clone();
        layers[0].input_width += extra;
        Self::new(layers)
    }

    /// Stable 64-bit fingerprint of the layer stack.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for l in &self.layers {
            feed(l.kind as u64);
            feed(l.activation as u64);
            feed(l.input_width as u64);
            feed(l.output_width as u64);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_broken_chain() {
        let err = NetworkTopology::new(vec![
            LayerSpec::dense(3, 4, Activation::Relu),
            LayerSpec::dense(5, 2, Activation::Identity),
        ]);
        assert!(matches!(err, Err(Error::Usage(_))));
    }

    #[test]
    fn rejects_two_grus() {
        let err = NetworkTopology::new(vec![
            LayerSpec::gru(3, 4),
            LayerSpec::gru(4, 4),
            LayerSpec::dense(4, 2, Activation::Identity),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_hidden_softmax() {
        let err = NetworkTopology::mlp(3, &[4], 2, Activation::Softmax, Activation::Identity);
        assert!(err.is_err());
    }

    #[test]
    fn blocks_tile_the_parameter_vector() {
        let t = NetworkTopology::recurrent(5, 8, 3).unwrap();
        let mut next = 0;
        for (spec, b) in t.layers().iter().zip(t.blocks()) {
            for (rows, cols, r) in b.tensors(spec) {
                assert_eq!(r.start, next);
                assert_eq!(r.len(), rows * cols);
                next = r.end;
            }
        }
        assert_eq!(next, t.parameter_count());
        assert_eq!(t.hidden_widths(), vec![8, 8]);
        assert_eq!(t.gru_width(), Some(8));
    }
}
