use std::path::PathBuf;
use std::str::FromStr;

use super::config::{parse_schedule, Algorithm, ExperimentConfig};
use super::output::{fmt_f64, CsvSink, Provenance};
use super::run::run_experiment;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Actor,
    Critic,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Actor => "actor",
            SweepAxis::Critic => "critic",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "actor" => Ok(SweepAxis::Actor),
            "critic" => Ok(SweepAxis::Critic),
            other => Err(Error::config("axis", format!("unknown sweep axis `{other}` (actor or critic)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// The ratio exactly as requested.
    pub ratio: String,
    pub actor_schedule: String,
    pub critic_schedule: Option<String>,
    pub config_hash: String,
    pub final_returns: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (zero for one seed).
    pub std: f64,
    pub stderr: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Varies one network's schedule and keeps the other fixed. A plain number
/// replaces the last ratio of the base schedule; a dashed string replaces
/// the whole schedule. Each point runs every seed under
/// `<output_dir>/sweep-<axis>-<ratio>/`, and the table is also written to
/// `<output_dir>/sweep-<axis>.csv`.
pub fn sweep_pruning_ratio(base: &ExperimentConfig, axis: SweepAxis, ratios: &[String]) -> Result<Vec<SweepRow>> {
    base.validate()?;
    if ratios.is_empty() {
        return Err(Error::config("ratios", "at least one ratio is required"));
    }
    if axis == SweepAxis::Critic && base.algorithm == Algorithm::Qmix {
        return Err(Error::config("axis", "qmix has no critic to sweep"));
    }
    let (actor_base, critic_base) = base.schedules()?;
    let swept_base = match axis {
        SweepAxis::Actor => actor_base.clone(),
        SweepAxis::Critic => critic_base.clone().expect("a2c has a critic schedule"),
    };
    let fixed = match axis {
        SweepAxis::Actor => critic_base.map(|s| format!("critic_schedule={s}")),
        SweepAxis::Critic => Some(format!("actor_schedule={actor_base}")),
    };

    let mut rows = Vec::with_capacity(ratios.len());
    for token in ratios {
        let token = token.trim();
        let schedule = if token.contains('-') {
            parse_schedule(token)?
        } else {
            let r: f64 = token
                .parse()
                .map_err(|_| Error::config("ratios", format!("malformed ratio token `{token}`")))?;
            swept_base.with_last(r)?
        };
        let mut cfg = base.clone();
        match axis {
            SweepAxis::Actor => cfg.actor_schedule = Some(schedule.to_string()),
            SweepAxis::Critic => cfg.critic_schedule = Some(schedule.to_string()),
        }
        cfg.output_dir = base.output_dir.join(format!("sweep-{}-{token}", axis.name()));
        let records = run_experiment(&cfg, None)?;
        let finals: Vec<f64> = records.iter().map(|r| r.final_return).collect();
        let (mean, std) = mean_std(&finals);
        let (a, c) = cfg.schedules()?;
        rows.push(SweepRow {
            ratio: token.to_string(),
            actor_schedule: a.to_string(),
            critic_schedule: c.map(|s| s.to_string()),
            config_hash: cfg.config_hash(),
            stderr: std / (finals.len() as f64).sqrt(),
            final_returns: finals,
            mean,
            std,
        });
    }

    let path: PathBuf = base.output_dir.join(format!("sweep-{}.csv", axis.name()));
    let mut comments = vec![format!("axis={}", axis.name())];
    comments.extend(fixed.map(|f| format!("fixed {f}")));
    let seeds: Vec<String> = base.seeds.iter().map(u64::to_string).collect();
    comments.push(format!("seeds={}", seeds.join(" ")));
    let mut sink = CsvSink::create(
        path,
        &Provenance::new(base.config_hash(), None),
        &comments,
        &["ratio", "actor_schedule", "critic_schedule", "config_hash", "n_seeds", "mean_final_return", "std", "stderr"],
    )?;
    for r in &rows {
        sink.row(&[
            r.ratio.clone(),
            r.actor_schedule.clone(),
            r.critic_schedule.clone().unwrap_or_default(),
            r.config_hash.clone(),
            r.final_returns.len().to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.std),
            fmt_f64(r.stderr),
        ])?;
    }
    sink.flush()?;
    Ok(rows)
}
