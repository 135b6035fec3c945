//! Saves a pruned shared network with its masks, reloads it and checks that
//! every agent computes the same outputs.
//!
//! cargo run --example checkpoint_roundtrip

use snpps::netcore::{Activation, Checkpoint, NetworkTopology};
use snpps::pruning::{MaskFile, PruningSchedule};
use snpps::sharednet::{SharedAgentNetwork, SharingMode};

fn main() -> snpps::Result<()> {
    let topo = NetworkTopology::mlp(6, &[32, 32], 3, Activation::Tanh, Activation::Identity)?;
    let schedule: PruningSchedule = "0.25-0.5".parse()?;
    let net = SharedAgentNetwork::new(&topo, SharingMode::SnpPs, &schedule, 4, 5, 6)?;

    let dir = std::env::temp_dir().join("snpps-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    net.to_checkpoint("example").save(dir.join("actor.ckpt"))?;
    net.mask_file().save(dir.join("actor.masks"))?;

    let ck = Checkpoint::load(dir.join("actor.ckpt"))?;
    let masks = MaskFile::load(dir.join("actor.masks"))?;
    let back = SharedAgentNetwork::from_checkpoint(&ck, &masks)?;
    let x = [0.1, -0.4, 0.3, 0.8, -0.1, 0.0];
    for i in 0..4 {
        let a = net.agent_forward(i, &x, &net.initial_state())?.output;
        let b = back.agent_forward(i, &x, &back.initial_state())?.output;
        println!("agent {i}: {a:.4?} reloaded identical: {}", a == b);
    }
    println!("files in {}", dir.display());
    Ok(())
}
