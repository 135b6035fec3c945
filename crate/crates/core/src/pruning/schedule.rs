use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Per-hidden-vector pruning ratios, written dash-separated: `"0-0.1-0.9"`
/// prunes 0%, 10% and 90% of the first, second and third hidden vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PruningSchedule {
    ratios: Vec<f64>,
}

impl PruningSchedule {
    pub fn new(ratios: Vec<f64>) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::config("schedule", "empty pruning schedule"));
        }
        for (k, &r) in ratios.iter().enumerate() {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::config(
                    format!("schedule[{k}]"),
                    format!("ratio {r} is outside [0, 1)"),
                ));
            }
        }
        Ok(Self { ratios })
    }

    /// All-zero schedule with `layers` entries.
    pub fn dense(layers: usize) -> Self {
        Self { ratios: vec![0.0; layers] }
    }

    pub fn uniform(layers: usize, ratio: f64) -> Result<Self> {
        Self::new(vec![ratio; layers])
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }

    pub fn is_dense(&self) -> bool {
        self.ratios.iter().all(|&r| r == 0.0)
    }

    /// Number of units pruned out of `width` at `layer`: `floor(ratio * width)`.
    ///
    /// A 1e-9 slack absorbs binary rounding of decimal ratios (0.29 * 100).
    pub fn prune_count(&self, layer: usize, width: usize) -> usize {
        ((self.ratios[layer] * width as f64) + 1e-9).floor() as usize
    }

    /// Same schedule with the last entry replaced.
    pub fn with_last(&self, ratio: f64) -> Result<Self> {
        let mut ratios = self.ratios.clone();
        *ratios.last_mut().expect("non-empty") = ratio;
        Self::new(ratios)
    }

    /// Checks arity against the hidden widths and that every layer keeps a unit.
    pub fn validate(&self, hidden_widths: &[usize]) -> Result<()> {
        if self.ratios.len() != hidden_widths.len() {
            return Err(Error::config(
                "schedule",
                format!(
                    "schedule `{self}` has {} entries but the network has {} hidden vectors",
                    self.ratios.len(),
                    hidden_widths.len()
                ),
            ));
        }
        for (k, &w) in hidden_widths.iter().enumerate() {
            if self.prune_count(k, w) >= w {
                return Err(Error::config(
                    format!("schedule[{k}]"),
                    format!("ratio {} prunes every unit of a width-{w} layer", self.ratios[k]),
                ));
            }
        }
        Ok(())
    }
}

impl FromStr for PruningSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::config("schedule", "empty pruning schedule"));
        }
        let mut ratios = Vec::new();
        for (k, token) in s.split('-').enumerate() {
            let r: f64 = token.trim().parse().map_err(|_| {
                Error::config(format!("schedule[{k}]"), format!("malformed ratio token `{token}`"))
            })?;
            if !(0.0..1.0).contains(&r) {
                return Err(Error::config(
                    format!("schedule[{k}]"),
                    format!("ratio token `{token}` is outside [0, 1)"),
                ));
            }
            ratios.push(r);
        }
        Ok(Self { ratios })
    }
}

impl fmt::Display for PruningSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, r) in self.ratios.iter().enumerate() {
            if k > 0 {
                f.write_str("-")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}
