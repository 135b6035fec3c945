use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// How N agents map onto root parameter stores.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SharingMode {
    /// One network, no agent indication.
    Fups,
    /// One network, observation extended by a one-hot agent id.
    FupsId,
    /// One network, an independent structured neuron mask per agent.
    SnpPs,
    /// [`SharingMode::SnpPs`] plus the one-hot agent id input.
    SnpPsId,
    /// One network, an independent random per-weight mask per agent.
    UsnpPs,
    /// One network, one structured mask shared by every agent.
    SnpNps,
    /// One network per cluster; `assignment[agent]` is the agent's cluster.
    Grouped(Vec<usize>),
}

impl SharingMode {
    pub fn name(&self) -> &'static str {
        match self {
            SharingMode::Fups => "fups",
            SharingMode::FupsId => "fups_id",
            SharingMode::SnpPs => "snp_ps",
            SharingMode::SnpPsId => "snp_ps_id",
            SharingMode::UsnpPs => "usnp_ps",
            SharingMode::SnpNps => "snp_nps",
            SharingMode::Grouped(_) => "grouped",
        }
    }

    pub fn uses_one_hot(&self) -> bool {
        matches!(self, SharingMode::FupsId | SharingMode::SnpPsId)
    }

    pub fn uses_neuron_masks(&self) -> bool {
        matches!(self, SharingMode::SnpPs | SharingMode::SnpPsId | SharingMode::SnpNps)
    }

    /// Agent-to-root map for `n_agents` agents.
    pub fn assignment(&self, n_agents: usize) -> Result<Vec<usize>> {
        match self {
            SharingMode::Grouped(a) => {
                if a.len() != n_agents {
                    return Err(Error::config(
                        "groups",
                        format!("assignment lists {} agents, environment has {n_agents}", a.len()),
                    ));
                }
                let k = a.iter().max().map_or(0, |m| m + 1);
                if k > n_agents {
                    return Err(Error::config("groups", "more clusters than agents"));
                }
                if let Some(c) = (0..k).find(|c| !a.contains(c)) {
                    return Err(Error::config("groups", format!("cluster {c} has no members")));
                }
                Ok(a.clone())
            }
            _ => Ok(vec![0; n_agents]),
        }
    }
}

impl fmt::Display for SharingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SharingMode {
    type Err = Error;

    /// Parses the mode name; `grouped` takes its assignment as
    /// `grouped:0,0,1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, tail) = s.split_once(':').unwrap_or((s, ""));
        let mode = match head.to_ascii_lowercase().replace(['-', '+'], "_").as_str() {
            "fups" => SharingMode::Fups,
            "fups_id" => SharingMode::FupsId,
            "snp_ps" | "snpps" => SharingMode::SnpPs,
            "snp_ps_id" => SharingMode::SnpPsId,
            "usnp_ps" => SharingMode::UsnpPs,
            "snp_nps" => SharingMode::SnpNps,
            "grouped" | "seps" => {
                let a = tail
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| {
                        t.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::config("sharing", format!("bad cluster id `{t}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                SharingMode::Grouped(a)
            }
            other => return Err(Error::config("sharing", format!("unknown sharing mode `{other}`"))),
        };
        Ok(mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names() {
        assert_eq!("FuPS+id".parse::<SharingMode>().unwrap(), SharingMode::FupsId);
        assert_eq!("SNP-PS".parse::<SharingMode>().unwrap(), SharingMode::SnpPs);
        assert_eq!(
            "grouped:0,1,1".parse::<SharingMode>().unwrap(),
            SharingMode::Grouped(vec![0, 1, 1])
        );
        assert!("bogus".parse::<SharingMode>().is_err());
    }

    #[test]
    fn grouped_assignment_must_cover_agents() {
        assert!(SharingMode::Grouped(vec![0, 1]).assignment(3).is_err());
        assert!(SharingMode::Grouped(vec![0, 2, 2]).assignment(3).is_err());
        assert_eq!(SharingMode::Grouped(vec![1, 0, 1]).assignment(3).unwrap(), vec![1, 0, 1]);
        assert_eq!(SharingMode::Fups.assignment(2).unwrap(), vec![0, 0]);
    }
}
