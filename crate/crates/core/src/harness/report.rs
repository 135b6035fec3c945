use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::output::{fmt_f64, CsvSink, Provenance};
use super::run::RunRecord;
use crate::netcore::Checkpoint;
use crate::pruning::MaskFile;
use crate::sharednet::{dump_hidden_features_batch, SharedAgentNetwork};
use crate::{Error, Result};

/// One configuration in the resource table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceRow {
    pub config_hash: String,
    pub sharing: String,
    pub actor_schedule: String,
    pub critic_schedule: Option<String>,
    pub seeds: Vec<u64>,
    pub parameters: usize,
    pub ms_per_1000_steps: f64,
    /// Wall-clock divided by the slowest configuration in the table.
    pub relative_wall_clock: f64,
}

fn collect_summaries(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_summaries(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "summary.json") {
            out.push(p);
        }
    }
    Ok(())
}

/// Scans `dir` recursively for finished runs, groups them by config hash and
/// writes `dir/resources.csv`.
pub fn report_resources(dir: impl AsRef<Path>) -> Result<Vec<ResourceRow>> {
    let dir = dir.as_ref();
    let mut paths = Vec::new();
    collect_summaries(dir, &mut paths)?;
    if paths.is_empty() {
        return Err(Error::config(dir.display().to_string(), "no finished runs (summary.json) found"));
    }
    let mut groups: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        let rec: RunRecord = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", p.display())))?;
        groups.entry(rec.config_hash.clone()).or_default().push(rec);
    }
    let mut rows: Vec<ResourceRow> = groups
        .into_iter()
        .map(|(hash, recs)| {
            let first = &recs[0];
            let ms = recs.iter().map(|r| r.ms_per_1000_steps).sum::<f64>() / recs.len() as f64;
            ResourceRow {
                config_hash: hash,
                sharing: first.sharing.clone(),
                actor_schedule: first.actor_schedule.clone(),
                critic_schedule: first.critic_schedule.clone(),
                seeds: recs.iter().map(|r| r.seed).collect(),
                parameters: first.parameters.total,
                ms_per_1000_steps: ms,
                relative_wall_clock: 0.0,
            }
        })
        .collect();
    let max = rows.iter().map(|r| r.ms_per_1000_steps).fold(0.0, f64::max);
    for r in &mut rows {
        r.relative_wall_clock = if max > 0.0 { r.ms_per_1000_steps / max } else { 0.0 };
    }

    let hashes: Vec<&str> = rows.iter().map(|r| r.config_hash.as_str()).collect();
    let mut sink = CsvSink::create(
        dir.join("resources.csv"),
        &Provenance::new(hashes.join("+"), None),
        &[],
        &[
            "config_hash",
            "seeds",
            "sharing",
            "actor_schedule",
            "critic_schedule",
            "parameters",
            "ms_per_1000_steps",
            "relative_wall_clock",
        ],
    )?;
    for r in &rows {
        let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
        sink.row(&[
            r.config_hash.clone(),
            seeds.join(" "),
            r.sharing.clone(),
            r.actor_schedule.clone(),
            r.critic_schedule.clone().unwrap_or_default(),
            r.parameters.to_string(),
            fmt_f64(r.ms_per_1000_steps),
            fmt_f64(r.relative_wall_clock),
        ])?;
    }
    sink.flush()?;
    Ok(rows)
}

/// One observation per line, values separated by commas or whitespace.
/// Blank lines and `#` comments are skipped.
pub fn load_observations(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::Format(format!("{}:{}: bad value `{t}`", path.display(), lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

fn provenance_field<'a>(provenance: &'a str, key: &str) -> Option<&'a str> {
    provenance.split(';').find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
}

/// Writes post-activation hidden features of every agent on every
/// observation as CSV rows `run_id,observation,step,agent,layer,neuron,value`. The mask
/// file is expected next to the checkpoint with the extension `masks`.
pub fn dump_features(checkpoint: impl AsRef<Path>, observations: impl AsRef<Path>, out: &mut impl Write) -> Result<usize> {
    let checkpoint = checkpoint.as_ref();
    let ck = Checkpoint::load(checkpoint)?;
    let masks = MaskFile::load(checkpoint.with_extension("masks"))?;
    let net = SharedAgentNetwork::from_checkpoint(&ck, &masks)?;
    let obs = load_observations(observations)?;
    let agents: Vec<usize> = (0..net.n_agents()).collect();
    let dump = dump_hidden_features_batch(&net, &obs, &agents)?;

    let hash = provenance_field(&ck.provenance, "config_hash").unwrap_or("unknown");
    let seed = provenance_field(&ck.provenance, "seed");
    let step = provenance_field(&ck.provenance, "step").unwrap_or("0");
    let run_id = match seed {
        Some(s) => format!("{hash}-s{s}"),
        None => hash.to_string(),
    };
    writeln!(out, "# config_hash={hash} seed={}", seed.unwrap_or("none"))?;
    writeln!(out, "run_id,observation,step,agent,layer,neuron,value")?;
    let mut rows = 0;
    for rec in &dump.records {
        for (j, v) in rec.values.iter().enumerate() {
            writeln!(out, "{run_id},{},{step},{},{},{j},{v}", rec.observation_id, rec.agent, rec.layer)?;
            rows += 1;
        }
    }
    Ok(rows)
}
