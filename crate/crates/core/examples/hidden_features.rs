//! Hidden activations of each agent under SNP-PS on one shared observation.
//! Pruned neurons read zero, so every feature is attributable to the agent
//! that kept it.
//!
//! cargo run --example hidden_features

use snpps::netcore::{Activation, NetworkTopology};
use snpps::pruning::PruningSchedule;
use snpps::sharednet::{dump_hidden_features_batch, SharedAgentNetwork, SharingMode};

fn main() -> snpps::Result<()> {
    let topo = NetworkTopology::mlp(8, &[12, 12], 4, Activation::Relu, Activation::Identity)?;
    let schedule: PruningSchedule = "0.5-0.25".parse()?;
    let net = SharedAgentNetwork::new(&topo, SharingMode::SnpPs, &schedule, 3, 11, 12)?;
    let obs = vec![vec![0.5, -0.2, 0.1, 0.9, 0.0, 0.3, -0.7, 0.4]];
    let dump = dump_hidden_features_batch(&net, &obs, &[0, 1, 2])?;
    for layer in 0..2 {
        println!("layer {layer}");
        for agent in 0..3 {
            let row: Vec<String> = dump
                .layer(agent, layer, 0)
                .expect("dumped")
                .iter()
                .map(|v| if *v == 0.0 { "    .".to_string() } else { format!("{v:5.2}") })
                .collect();
            println!("  agent {agent}: {}", row.join(" "));
        }
    }
    let outs: Vec<Vec<f64>> = (0..3).map(|i| net.agent_forward(i, &obs[0], &net.initial_state()).map(|f| f.output)).collect::<Result<_, _>>()?;
    println!("outputs differ between agents: {}", outs[0] != outs[1] && outs[1] != outs[2]);
    Ok(())
}
