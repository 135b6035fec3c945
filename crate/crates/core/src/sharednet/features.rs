use super::network::SharedAgentNetwork;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub agent: usize,
    pub layer: usize,
    pub observation_id: usize,
    pub values: Vec<f64>,
}

/// Post-activation hidden vectors of several agents on shared observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureDump {
    pub records: Vec<FeatureRecord>,
}

impl FeatureDump {
    pub fn layer(&self, agent: usize, layer: usize, observation_id: usize) -> Option<&[f64]> {
        self.records
            .iter()
            .find(|r| r.agent == agent && r.layer == layer && r.observation_id == observation_id)
            .map(|r| r.values.as_slice())
    }
}

/// Hidden features of `agents` for one observation, starting from the
/// initial recurrent state.
pub fn dump_hidden_features(
    net: &SharedAgentNetwork,
    observation: &[f64],
    observation_id: usize,
    agents: &[usize],
) -> Result<FeatureDump> {
    let mut dump = FeatureDump::default();
    extend_dump(&mut dump, net, observation, observation_id, agents)?;
    Ok(dump)
}

pub(crate) fn extend_dump(
    dump: &mut FeatureDump,
    net: &SharedAgentNetwork,
    observation: &[f64],
    observation_id: usize,
    agents: &[usize],
) -> Result<()> {
    let state = net.initial_state();
    for &agent in agents {
        let step = net.agent_forward(agent, observation, &state)?;
        for (layer, values) in step.hidden_features().into_iter().enumerate() {
            dump.records.push(FeatureRecord { agent, layer, observation_id, values });
        }
    }
    Ok(())
}

/// Features for a list of observations (ids are their positions).
pub fn dump_hidden_features_batch(
    net: &SharedAgentNetwork,
    observations: &[Vec<f64>],
    agents: &[usize],
) -> Result<FeatureDump> {
    let mut dump = FeatureDump::default();
    for (id, obs) in observations.iter().enumerate() {
        extend_dump(&mut dump, net, obs, id, agents)?;
    }
    Ok(dump)
}
