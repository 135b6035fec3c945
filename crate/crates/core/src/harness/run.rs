use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, EnvInstance, EnvKind, ExperimentConfig};
use super::output::{fmt_f64, CsvSink, Provenance};
use crate::envs::{Environment, ReplayRecord};
use crate::maa2c::A2cTrainer;
use crate::pruning::MaskFile;
use crate::qmix::{MixingNetwork, QmixTrainer};
use crate::rng::derive_seed;
use crate::sharednet::SharedAgentNetwork;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_return: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub actor: usize,
    /// Zero for QMIX.
    pub critic: usize,
    /// Zero for A2C.
    pub mixer: usize,
    pub total: usize,
}

/// Outcome of one seed of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub sharing: String,
    pub actor_schedule: String,
    pub critic_schedule: Option<String>,
    pub curve: Vec<CurvePoint>,
    pub final_return: f64,
    pub env_steps: usize,
    pub episodes: usize,
    pub parameters: ParameterSummary,
    /// Training wall-clock (evaluation excluded).
    pub ms_per_1000_steps: f64,
}

/// Freshly initialised networks of one run.
pub struct RunNetworks {
    pub actor: SharedAgentNetwork,
    pub critic: Option<SharedAgentNetwork>,
}

/// Builds the networks of `seed`. Roots depend only on the `init` stream and
/// masks only on the `masks` stream, so every sharing mode starts from the
/// same root weights.
pub fn build_networks(config: &ExperimentConfig, seed: u64) -> Result<RunNetworks> {
    let mode = config.sharing_mode()?;
    let n = config.n_agents()?;
    let (actor_topo, critic_topo) = config.topologies()?;
    let (actor_sched, critic_sched) = config.schedules()?;
    let init = derive_seed(seed, "init");
    let masks = derive_seed(seed, "masks");
    let actor = SharedAgentNetwork::new(
        &actor_topo,
        mode.clone(),
        &actor_sched,
        n,
        derive_seed(init, "actor"),
        derive_seed(masks, "actor"),
    )?;
    let critic = match (critic_topo, critic_sched) {
        (Some(t), Some(s)) => Some(SharedAgentNetwork::new(
            &t,
            mode,
            &s,
            n,
            derive_seed(init, "critic"),
            derive_seed(masks, "critic"),
        )?),
        _ => None,
    };
    Ok(RunNetworks { actor, critic })
}

pub fn parameter_summary(config: &ExperimentConfig) -> Result<ParameterSummary> {
    let nets = build_networks(config, 0)?;
    let actor = nets.actor.parameter_count().trainable;
    let critic = nets.critic.as_ref().map_or(0, |c| c.parameter_count().trainable);
    let mixer = match config.algorithm {
        Algorithm::Qmix => {
            let env = EnvInstance::build(&config.env_kind()?, 0, "probe")?;
            MixingNetwork::new(config.n_agents()?, env.state_width(), &config.qmix.mixer, 0)?.parameter_count()
        }
        Algorithm::A2c => 0,
    };
    Ok(ParameterSummary { actor, critic, mixer, total: actor + critic + mixer })
}

/// Directory of one seed's artifacts.
pub fn run_dir(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(format!("seed-{seed}"))
}

/// Runs every seed (in parallel when threads are available) and writes the
/// config echo, per-seed artifacts and `records.csv` under `output_dir`.
/// `config_text` is echoed verbatim when given; otherwise the canonical
/// serialization is written.
pub fn run_experiment(config: &ExperimentConfig, config_text: Option<&str>) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let hash = config.config_hash();
    fs::create_dir_all(&config.output_dir)?;
    let echo = config_text.map_or_else(|| config.to_toml(), str::to_string);
    fs::write(config.output_dir.join("config.toml"), format!("# config_hash={hash}\n{echo}"))?;

    let records: Vec<RunRecord> =
        config.seeds.par_iter().map(|&seed| run_seed(config, seed)).collect::<Result<_>>()?;

    let mut sink = CsvSink::create(
        config.output_dir.join("records.csv"),
        &Provenance::new(&hash, None),
        &[],
        &["config_hash", "seed", "final_return", "env_steps", "episodes"],
    )?;
    for r in &records {
        sink.row(&[
            r.config_hash.clone(),
            r.seed.to_string(),
            fmt_f64(r.final_return),
            r.env_steps.to_string(),
            r.episodes.to_string(),
        ])?;
    }
    sink.flush()?;
    Ok(records)
}

struct Evaluator<'a> {
    config: &'a ExperimentConfig,
    kind: EnvKind,
    seed: u64,
    index: usize,
    sink: CsvSink,
    curve: Vec<CurvePoint>,
}

impl Evaluator<'_> {
    /// Evaluation `k` always runs on environment stream `eval-k`, so every
    /// sharing mode is scored on the same episodes.
    fn evaluate(
        &mut self,
        step: usize,
        mut act: impl FnMut(&[Vec<f64>], bool) -> Result<Vec<usize>>,
        replay: Option<&mut Vec<ReplayRecord>>,
    ) -> Result<f64> {
        let mut env = EnvInstance::build(&self.kind, self.seed, &format!("eval-{}", self.index))?;
        self.index += 1;
        let mean = evaluate_policy(&mut env, self.config.eval_episodes, &mut act, replay)?;
        self.sink.row(&[step.to_string(), fmt_f64(mean)])?;
        self.curve.push(CurvePoint { step, mean_return: mean });
        Ok(mean)
    }
}

/// Mean team return of `episodes` episodes. `act` receives the observations
/// and whether a new episode just started.
pub fn evaluate_policy(
    env: &mut EnvInstance,
    episodes: usize,
    act: &mut dyn FnMut(&[Vec<f64>], bool) -> Result<Vec<usize>>,
    mut replay: Option<&mut Vec<ReplayRecord>>,
) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut obs = env.reset().observations;
        if let (Some(log), Some(layout)) = (replay.as_deref_mut(), env.lbf_snapshot()) {
            log.push(ReplayRecord::Reset { layout: layout.clone() });
        }
        let mut first = true;
        loop {
            let actions = act(&obs, first)?;
            first = false;
            let out = env.step(&actions)?;
            total += out.team_reward;
            let done = out.done();
            if let Some(log) = replay.as_deref_mut() {
                if env.lbf_snapshot().is_some() {
                    log.push(ReplayRecord::Step { actions, rewards: out.rewards.clone(), done });
                }
            }
            if done {
                break;
            }
            obs = out.observations;
        }
    }
    Ok(total / episodes.max(1) as f64)
}

fn save_network(net: &SharedAgentNetwork, dir: &Path, name: &str, prov: &Provenance, step: usize) -> Result<()> {
    net.to_checkpoint(format!("{};step={step}", prov.tag())).save(dir.join(format!("{name}.ckpt")))?;
    let mut masks: MaskFile = net.mask_file();
    masks.attributes.push(("config_hash".into(), prov.config_hash.clone()));
    if let Some(s) = prov.seed {
        masks.attributes.push(("seed".into(), s.to_string()));
    }
    masks.save(dir.join(format!("{name}.masks")))
}

fn write_replay(dir: &Path, prov: &Provenance, log: &[ReplayRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("replay.jsonl"))?);
    writeln!(f, "{}", serde_json::json!({ "config_hash": prov.config_hash, "seed": prov.seed }))?;
    for r in log {
        writeln!(f, "{}", serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?)?;
    }
    f.flush()?;
    Ok(())
}

/// One seed of `config`; artifacts go to `output_dir/seed-<seed>`.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let hash = config.config_hash();
    let prov = Provenance::new(&hash, Some(seed));
    let dir = run_dir(&config.output_dir, seed);
    fs::create_dir_all(&dir)?;
    let kind = config.env_kind()?;
    let nets = build_networks(config, seed)?;
    let mut env = EnvInstance::build(&kind, seed, "env")?;
    let n = env.n_agents();
    let mut eval = Evaluator {
        config,
        kind: kind.clone(),
        seed,
        index: 0,
        sink: CsvSink::create(dir.join("eval.csv"), &prov, &[], &["step", "mean_return"])?,
        curve: Vec::new(),
    };
    let want_replay = config.replay_log && matches!(kind, EnvKind::Lbf(_));
    let mut replay = Vec::new();
    let interval = config.eval_interval;
    let mut train_secs = 0.0;

    let (env_steps, episodes, final_return) = match config.algorithm {
        Algorithm::A2c => {
            let critic = nets.critic.ok_or_else(|| Error::usage("a2c run without a critic"))?;
            let mut trainer = A2cTrainer::new(config.a2c.clone(), nets.actor, critic, derive_seed(seed, "policy"))?;
            let mut cols = vec!["step".to_string(), "episode".into(), "team_return".into()];
            cols.extend((0..n).map(|i| format!("return_{i}")));
            cols.extend(["policy_loss".into(), "value_loss".into(), "entropy".into()]);
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut train = CsvSink::create(dir.join("train.csv"), &prov, &[], &cols)?;
            let mut episodes = 0usize;
            let result = (|| -> Result<f64> {
                eval.evaluate(0, |o, _| trainer.greedy_actions(o), None)?;
                let mut next_eval = interval;
                let (mut pl, mut vl, mut ent, mut segs) = (0.0, 0.0, 0.0, 0usize);
                while trainer.env_steps() < config.total_steps {
                    let t0 = Instant::now();
                    let st = trainer.train_segment(&mut env)?;
                    train_secs += t0.elapsed().as_secs_f64();
                    pl += st.policy_loss;
                    vl += st.value_loss;
                    ent += st.entropy;
                    segs += 1;
                    if let Some(ep) = st.episode {
                        episodes += 1;
                        let k = segs as f64;
                        let mut row = vec![trainer.env_steps().to_string(), episodes.to_string(), fmt_f64(ep.team_return)];
                        row.extend(ep.agent_returns.iter().map(|&r| fmt_f64(r)));
                        row.extend([fmt_f64(pl / k), fmt_f64(vl / k), fmt_f64(ent / k)]);
                        train.row(&row)?;
                        (pl, vl, ent, segs) = (0.0, 0.0, 0.0, 0);
                    }
                    let done = trainer.env_steps() >= config.total_steps;
                    if trainer.env_steps() >= next_eval || done {
                        while next_eval <= trainer.env_steps() {
                            next_eval += interval;
                        }
                        let log = (done && want_replay).then_some(&mut replay);
                        eval.evaluate(trainer.env_steps(), |o, _| trainer.greedy_actions(o), log)?;
                    }
                }
                Ok(eval.curve.last().map_or(0.0, |p| p.mean_return))
            })();
            train.flush()?;
            eval.sink.flush()?;
            let final_return = result?;
            save_network(trainer.actor(), &dir, "actor", &prov, trainer.env_steps())?;
            save_network(trainer.critic(), &dir, "critic", &prov, trainer.env_steps())?;
            (trainer.env_steps(), episodes, final_return)
        }
        Algorithm::Qmix => {
            let mut trainer =
                QmixTrainer::new(config.qmix, nets.actor, env.state_width(), derive_seed(seed, "qmix"))?;
            let mut train = CsvSink::create(
                dir.join("train.csv"),
                &prov,
                &[],
                &["step", "episode", "return", "loss", "epsilon"],
            )?;
            let result = (|| -> Result<f64> {
                let mut states = Vec::new();
                let mut greedy = |t: &mut QmixTrainer, o: &[Vec<f64>], first: bool| -> Result<Vec<usize>> {
                    if first {
                        states = vec![t.agents().initial_state(); o.len()];
                    }
                    let sel = t.select_actions(o, &states, 0.0)?;
                    states = sel.states;
                    Ok(sel.actions)
                };
                eval.evaluate(0, |o, f| greedy(&mut trainer, o, f), None)?;
                let mut next_eval = interval;
                while trainer.env_steps() < config.total_steps {
                    let t0 = Instant::now();
                    let st = trainer.train_episode(&mut env)?;
                    train_secs += t0.elapsed().as_secs_f64();
                    let loss = if st.losses.is_empty() {
                        String::new()
                    } else {
                        fmt_f64(st.losses.iter().sum::<f64>() / st.losses.len() as f64)
                    };
                    train.row(&[
                        trainer.env_steps().to_string(),
                        trainer.episodes().to_string(),
                        fmt_f64(st.team_return),
                        loss,
                        fmt_f64(st.epsilon),
                    ])?;
                    let done = trainer.env_steps() >= config.total_steps;
                    if trainer.env_steps() >= next_eval || done {
                        while next_eval <= trainer.env_steps() {
                            next_eval += interval;
                        }
                        let log = (done && want_replay).then_some(&mut replay);
                        let step = trainer.env_steps();
                        eval.evaluate(step, |o, f| greedy(&mut trainer, o, f), log)?;
                    }
                }
                Ok(eval.curve.last().map_or(0.0, |p| p.mean_return))
            })();
            train.flush()?;
            eval.sink.flush()?;
            let final_return = result?;
            save_network(trainer.agents(), &dir, "utility", &prov, trainer.env_steps())?;
            (trainer.env_steps(), trainer.episodes(), final_return)
        }
    };
    if want_replay {
        write_replay(&dir, &prov, &replay)?;
    }

    let (actor_schedule, critic_schedule) = config.schedules()?;
    let record = RunRecord {
        config_hash: hash,
        seed,
        algorithm: config.algorithm,
        sharing: config.sharing_mode()?.name().to_string(),
        actor_schedule: actor_schedule.to_string(),
        critic_schedule: critic_schedule.map(|s| s.to_string()),
        curve: eval.curve,
        final_return,
        env_steps,
        episodes,
        parameters: parameter_summary(config)?,
        ms_per_1000_steps: 1e6 * train_secs / env_steps.max(1) as f64,
    };
    let json = serde_json::to_string_pretty(&record).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join("summary.json"), json)?;
    Ok(record)
}
