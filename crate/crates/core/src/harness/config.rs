use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{lbf_preset, CoordGame, CoordGameConfig, Environment, Lbf, LbfConfig, LbfSnapshot, StepOutcome, TimeStep};
use crate::maa2c::A2cConfig;
use crate::netcore::{Activation, NetworkTopology};
use crate::pruning::PruningSchedule;
use crate::qmix::QmixConfig;
use crate::rng::substream;
use crate::sharednet::SharingMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Qmix,
    A2c,
}

/// Exactly one of `preset`, `lbf` or `coord`. The preset `coord` is the
/// three-agent, three-action coordination game.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lbf: Option<LbfConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord: Option<CoordGameConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    Lbf(LbfConfig),
    Coord(CoordGameConfig),
}

impl EnvBlock {
    pub fn lbf_preset(name: &str) -> Self {
        Self { preset: Some(name.into()), ..Self::default() }
    }

    pub fn resolve(&self) -> Result<EnvKind> {
        let kind = match (&self.preset, &self.lbf, &self.coord) {
            (Some(p), None, None) if p == "coord" => EnvKind::Coord(CoordGameConfig::new(3, 3)),
            (Some(p), None, None) => EnvKind::Lbf(lbf_preset(p)?),
            (None, Some(l), None) => EnvKind::Lbf(l.clone()),
            (None, None, Some(c)) => EnvKind::Coord(c.clone()),
            _ => return Err(Error::config("env", "set exactly one of `preset`, `lbf` or `coord`")),
        };
        match &kind {
            EnvKind::Lbf(c) => c.validate()?,
            EnvKind::Coord(c) => c.validate()?,
        }
        Ok(kind)
    }
}

/// A built environment. Coordination targets depend only on the run seed,
/// so training and evaluation instances share the task.
#[derive(Debug, Clone)]
pub enum EnvInstance {
    Lbf(Lbf),
    Coord(CoordGame),
}

impl EnvInstance {
    pub fn build(kind: &EnvKind, seed: u64, stream: &str) -> Result<Self> {
        Ok(match kind {
            EnvKind::Lbf(c) => EnvInstance::Lbf(Lbf::new(c.clone(), substream(seed, stream))?),
            EnvKind::Coord(c) => EnvInstance::Coord(CoordGame::new(c.clone(), &mut substream(seed, "task"))?),
        })
    }

    pub fn lbf_snapshot(&self) -> Option<&LbfSnapshot> {
        match self {
            EnvInstance::Lbf(e) => Some(e.snapshot()),
            EnvInstance::Coord(_) => None,
        }
    }

    fn inner(&self) -> &dyn Environment {
        match self {
            EnvInstance::Lbf(e) => e,
            EnvInstance::Coord(e) => e,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Environment {
        match self {
            EnvInstance::Lbf(e) => e,
            EnvInstance::Coord(e) => e,
        }
    }
}

impl Environment for EnvInstance {
    fn n_agents(&self) -> usize {
        self.inner().n_agents()
    }
    fn observation_width(&self) -> usize {
        self.inner().observation_width()
    }
    fn state_width(&self) -> usize {
        self.inner().state_width()
    }
    fn n_actions(&self) -> usize {
        self.inner().n_actions()
    }
    fn reset(&mut self) -> TimeStep {
        self.inner_mut().reset()
    }
    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        self.inner_mut().step(actions)
    }
}

fn default_eval_interval() -> usize {
    10_000
}

fn default_eval_episodes() -> usize {
    20
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// One experiment file. Schedules use dash notation, one ratio per hidden
/// vector; omitted schedules mean no pruning. For QMIX only the actor
/// schedule is used, on the per-agent utility network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub sharing: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_schedule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic_schedule: Option<String>,
    pub seeds: Vec<u64>,
    pub total_steps: usize,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Not part of the config hash.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Write the final evaluation's LBF episodes as JSON lines.
    #[serde(default)]
    pub replay_log: bool,
    pub env: EnvBlock,
    #[serde(default)]
    pub a2c: A2cConfig,
    #[serde(default)]
    pub qmix: QmixConfig,
}

/// Re-anchors a config error raised by a nested parser at `field`, keeping
/// any index suffix (`schedule[2]` becomes `actor_schedule[2]`).
fn reroot(err: Error, field: &str) -> Error {
    match err {
        Error::Config { path, message } => {
            let suffix = path.find('[').map_or("", |i| &path[i..]);
            Error::config(format!("{field}{suffix}"), message)
        }
        other => other,
    }
}

/// Dash-separated ratios, e.g. `0-0.1-0.9`.
pub fn parse_schedule(s: &str) -> Result<PruningSchedule> {
    s.parse()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let path = e
                .span()
                .map(|s| format!("line {}", text[..s.start].lines().count().max(1)))
                .unwrap_or_else(|| "<root>".into());
            Error::config(path, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Ok((Self::from_toml(&text)?, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn sharing_mode(&self) -> Result<SharingMode> {
        self.sharing.parse().map_err(|e| reroot(e, "sharing"))
    }

    pub fn env_kind(&self) -> Result<EnvKind> {
        self.env.resolve()
    }

    pub fn n_agents(&self) -> Result<usize> {
        Ok(match self.env_kind()? {
            EnvKind::Lbf(c) => c.n_agents(),
            EnvKind::Coord(c) => c.n_agents,
        })
    }

    /// Base topologies `(actor or utility, critic)`; the critic is `None`
    /// for QMIX.
    pub fn topologies(&self) -> Result<(NetworkTopology, Option<NetworkTopology>)> {
        let env = EnvInstance::build(&self.env_kind()?, 0, "probe")?;
        let (obs, acts) = (env.observation_width(), env.n_actions());
        Ok(match self.algorithm {
            Algorithm::Qmix => (NetworkTopology::recurrent(obs, self.qmix.hidden_width, acts)?, None),
            Algorithm::A2c => {
                let h = &self.a2c.hidden;
                (
                    NetworkTopology::mlp(obs, h, acts, Activation::Relu, Activation::Identity)?,
                    Some(NetworkTopology::mlp(obs, h, 1, Activation::Relu, Activation::Identity)?),
                )
            }
        })
    }

    fn schedule_for(&self, field: &str, text: Option<&str>, topology: &NetworkTopology) -> Result<PruningSchedule> {
        let widths = topology.hidden_widths();
        let schedule = match text {
            Some(s) => parse_schedule(s).map_err(|e| reroot(e, field))?,
            None => PruningSchedule::dense(widths.len()),
        };
        schedule.validate(&widths).map_err(|e| reroot(e, field))?;
        Ok(schedule)
    }

    /// Parsed `(actor, critic)` schedules checked against the topologies.
    pub fn schedules(&self) -> Result<(PruningSchedule, Option<PruningSchedule>)> {
        let (actor, critic) = self.topologies()?;
        let a = self.schedule_for("actor_schedule", self.actor_schedule.as_deref(), &actor)?;
        let c = match &critic {
            Some(t) => Some(self.schedule_for("critic_schedule", self.critic_schedule.as_deref(), t)?),
            None => None,
        };
        Ok((a, c))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.total_steps == 0 {
            return Err(Error::config("total_steps", "must be positive"));
        }
        if self.eval_interval == 0 {
            return Err(Error::config("eval_interval", "must be positive"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes", "must be positive"));
        }
        let mode = self.sharing_mode()?;
        mode.assignment(self.n_agents()?).map_err(|e| reroot(e, "sharing"))?;
        match self.algorithm {
            Algorithm::A2c => self.a2c.validate()?,
            Algorithm::Qmix => {
                self.qmix.validate()?;
                if self.critic_schedule.is_some() {
                    return Err(Error::config("critic_schedule", "qmix has no critic; use actor_schedule"));
                }
            }
        }
        self.schedules()?;
        Ok(())
    }

    /// Short hex digest of the canonical config, excluding `output_dir`.
    pub fn config_hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canon).expect("experiment config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
