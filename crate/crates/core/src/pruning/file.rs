//! Text format for neuron mask groups.
//!
//! ```text
//! snpps-masks 1
//! topology: 9f3c0a12be44d001
//! schedule: 0-0.1-0.9
//! seed: 42
//! agents: 3
//! mode: snp_ps
//!
//! 0 0 1111111111
//! 0 1 1101111011
//! ```
//!
//! Header lines are `key: value` up to the first blank line. `topology`,
//! `schedule`, `seed` and `agents` are required; other keys are preserved in
//! order. Each body line is `<agent> <layer> <bits>` with `1` = kept. The body
//! may be empty when the masks are implied (unmasked or per-weight modes).

use std::fmt::Write as _;
use std::path::Path;

use super::masks::{NeuronMask, NeuronMaskGroup};
use super::schedule::PruningSchedule;
use crate::{Error, Result};

const MAGIC: &str = "snpps-masks 1";

#[derive(Debug, Clone, PartialEq)]
pub struct MaskFile {
    pub topology_hash: u64,
    pub schedule: PruningSchedule,
    pub seed: u64,
    pub n_agents: usize,
    /// Extra header entries such as `mode` or `run`.
    pub attributes: Vec<(String, String)>,
    /// Empty, or exactly `n_agents` masks.
    pub masks: Vec<NeuronMask>,
}

impl MaskFile {
    pub fn from_group(topology_hash: u64, group: &NeuronMaskGroup) -> Self {
        Self {
            topology_hash,
            schedule: group.schedule.clone(),
            seed: group.seed,
            n_agents: group.n_agents(),
            attributes: Vec::new(),
            masks: group.masks.clone(),
        }
    }

    pub fn attribute(&self, key: &str) -> Option<&str> {
        self.attributes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn group(&self) -> Option<NeuronMaskGroup> {
        (!self.masks.is_empty()).then(|| NeuronMaskGroup {
            masks: self.masks.clone(),
            schedule: self.schedule.clone(),
            seed: self.seed,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "topology: {:016x}", self.topology_hash);
        let _ = writeln!(s, "schedule: {}", self.schedule);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "agents: {}", self.n_agents);
        for (k, v) in &self.attributes {
            let _ = writeln!(s, "{k}: {v}");
        }
        s.push('\n');
        for (a, m) in self.masks.iter().enumerate() {
            for (l, bits) in m.layers().iter().enumerate() {
                let b: String = bits.iter().map(|&k| if k { '1' } else { '0' }).collect();
                let _ = writeln!(s, "{a} {l} {b}");
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format(format!("mask file: {msg}"));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(bad("missing `snpps-masks 1` magic line".into()));
        }
        let mut header = Vec::new();
        for line in lines.by_ref() {
            if line.trim().is_empty() {
                break;
            }
            let (k, v) = line.split_once(':').ok_or_else(|| bad(format!("bad header `{line}`")))?;
            header.push((k.trim().to_string(), v.trim().to_string()));
        }
        let take = |key: &str| -> Result<String> {
            header
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| bad(format!("missing `{key}` header")))
        };
        let topology_hash = u64::from_str_radix(&take("topology")?, 16)
            .map_err(|_| bad("topology hash is not hex".into()))?;
        let schedule: PruningSchedule = take("schedule")?.parse()?;
        let seed = take("seed")?.parse().map_err(|_| bad("seed is not an integer".into()))?;
        let n_agents: usize =
            take("agents")?.parse().map_err(|_| bad("agents is not an integer".into()))?;
        let attributes = header
            .into_iter()
            .filter(|(k, _)| !matches!(k.as_str(), "topology" | "schedule" | "seed" | "agents"))
            .collect();

        let mut rows: Vec<Vec<Vec<bool>>> = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut parts = line.split_whitespace();
            let (a, l, bits) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(l), Some(b), None) => (a, l, b),
                _ => return Err(bad(format!("bad mask line `{line}`"))),
            };
            let a: usize = a.parse().map_err(|_| bad(format!("bad agent index `{a}`")))?;
            let l: usize = l.parse().map_err(|_| bad(format!("bad layer index `{l}`")))?;
            if rows.len() != a + 1 {
                if a != rows.len() {
                    return Err(bad(format!("agent {a} out of order")));
                }
                rows.push(Vec::new());
            }
            let agent = rows.last_mut().expect("pushed");
            if l != agent.len() {
                return Err(bad(format!("layer {l} out of order for agent {a}")));
            }
            let bits = bits
                .chars()
                .map(|c| match c {
                    '1' => Ok(true),
                    '0' => Ok(false),
                    _ => Err(bad(format!("bad mask bit `{c}`"))),
                })
                .collect::<Result<Vec<bool>>>()?;
            agent.push(bits);
        }
        if !rows.is_empty() && rows.len() != n_agents {
            return Err(bad(format!("{} agents listed, header says {n_agents}", rows.len())));
        }
        let masks: Vec<NeuronMask> = rows.into_iter().map(NeuronMask::new).collect();
        if masks.iter().any(|m| m.layers().len() != schedule.len()) {
            return Err(bad("mask layer count differs from the schedule".into()));
        }
        Ok(Self { topology_hash, schedule, seed, n_agents, attributes, masks })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
