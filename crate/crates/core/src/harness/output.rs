use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::Result;

/// Identifies the run an artifact belongs to. Every file the harness writes
/// carries one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: Option<u64>) -> Self {
        Self { config_hash: config_hash.into(), seed }
    }

    pub fn run_id(&self) -> String {
        match self.seed {
            Some(s) => format!("{}-s{s}", self.config_hash),
            None => self.config_hash.clone(),
        }
    }

    /// `config_hash=...;seed=...`, as embedded in checkpoints.
    pub fn tag(&self) -> String {
        match self.seed {
            Some(s) => format!("config_hash={};seed={s}", self.config_hash),
            None => format!("config_hash={}", self.config_hash),
        }
    }

    fn header(&self) -> String {
        match self.seed {
            Some(s) => format!("# config_hash={} seed={s}", self.config_hash),
            None => format!("# config_hash={}", self.config_hash),
        }
    }
}

/// CSV writer whose first line is a `#` comment naming the config hash and
/// seed; extra comment lines may follow before the column header.
pub struct CsvSink {
    out: BufWriter<File>,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>, provenance: &Provenance, comments: &[String], columns: &[&str]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", provenance.header())?;
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "{}", columns.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Formats a float with the shortest representation that round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Reads a provenance CSV: returns `(comments, header, rows)`.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut comments = Vec::new();
    let mut header = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else if header.is_none() {
            header = Some(line.split(',').map(str::to_string).collect());
        } else if !line.is_empty() {
            rows.push(line.split(',').map(str::to_string).collect());
        }
    }
    Ok((comments, header.unwrap_or_default(), rows))
}
