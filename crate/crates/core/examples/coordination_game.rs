//! FuPS versus SNP-PS on the one-step coordination game under MA-A2C.
//!
//! cargo run --release --example coordination_game -- [steps] [seeds]

use snpps::envs::{CoordGame, CoordGameConfig, Environment};
use snpps::maa2c::{A2cConfig, A2cTrainer};
use snpps::netcore::{Activation, NetworkTopology};
use snpps::pruning::PruningSchedule;
use snpps::rng::{derive_seed, substream};
use snpps::sharednet::{SharedAgentNetwork, SharingMode};

fn run(mode: SharingMode, ratio: f64, seed: u64, steps: usize) -> snpps::Result<f64> {
    let cfg = CoordGameConfig::new(3, 3);
    let mut env = CoordGame::new(cfg.clone(), &mut substream(seed, "env"))?;
    let a2c = A2cConfig::default();
    let obs = env.observation_width();
    let actor_topo = NetworkTopology::mlp(obs, &a2c.hidden, env.n_actions(), Activation::Relu, Activation::Identity)?;
    let critic_topo = NetworkTopology::mlp(obs, &a2c.hidden, 1, Activation::Relu, Activation::Identity)?;
    let schedule = PruningSchedule::uniform(a2c.hidden.len(), ratio)?;
    let init = derive_seed(seed, "init");
    let masks = derive_seed(seed, "masks");
    let actor = SharedAgentNetwork::new(&actor_topo, mode.clone(), &schedule, 3, derive_seed(init, "actor"), derive_seed(masks, "actor"))?;
    let critic = SharedAgentNetwork::new(&critic_topo, mode, &schedule, 3, derive_seed(init, "critic"), derive_seed(masks, "critic"))?;
    let mut trainer = A2cTrainer::new(a2c, actor, critic, seed)?;
    while trainer.env_steps() < steps {
        trainer.train_segment(&mut env)?;
    }
    trainer.evaluate(&mut env, 20)
}

fn main() -> snpps::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let seeds = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3u64);
    for (mode, ratio) in [(SharingMode::Fups, 0.0), (SharingMode::SnpPs, 0.5)] {
        let t = std::time::Instant::now();
        let rewards: Vec<f64> = (0..seeds).map(|s| run(mode.clone(), ratio, s, steps)).collect::<Result<_, _>>()?;
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        println!("{:<8} mean final reward {mean:.3}  per seed {rewards:?}  ({:.1}s)", mode.name(), t.elapsed().as_secs_f64());
    }
    Ok(())
}
