//! Trainable parameter counts of every sharing mode on the LBF1-desk actor.
//!
//! cargo run --example parameter_counts

use snpps::envs::{lbf_preset, Environment, Lbf};
use snpps::netcore::{Activation, NetworkTopology};
use snpps::pruning::PruningSchedule;
use snpps::rng::substream;
use snpps::sharednet::{SharedAgentNetwork, SharingMode};

fn main() -> snpps::Result<()> {
    let env = Lbf::new(lbf_preset("LBF1-desk")?, substream(0, "env"))?;
    let topo = NetworkTopology::mlp(env.observation_width(), &[128, 128, 128], env.n_actions(), Activation::Relu, Activation::Identity)?;
    let schedule: PruningSchedule = "0-0.1-0.1".parse()?;
    for name in ["fups", "fups_id", "snp_ps", "snp_ps_id", "usnp_ps", "snp_nps", "grouped:0,1,2", "grouped:0,0,1"] {
        let mode: SharingMode = name.parse()?;
        let net = SharedAgentNetwork::new(&topo, mode, &schedule, env.n_agents(), 0, 1)?;
        let c = net.parameter_count();
        println!("{name:<14} {:>8} trainable ({} network(s) of {})", c.trainable, c.networks, c.per_network);
    }
    Ok(())
}
