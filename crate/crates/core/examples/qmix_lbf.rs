//! Short QMIX run on LBF with a pruned, shared GRU utility network.
//!
//! cargo run --release --example qmix_lbf -- [episodes] [sharing] [schedule]

use snpps::envs::{lbf_preset, Environment, Lbf};
use snpps::netcore::NetworkTopology;
use snpps::qmix::{QmixConfig, QmixTrainer};
use snpps::rng::substream;
use snpps::sharednet::{SharedAgentNetwork, SharingMode};

fn main() -> snpps::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let episodes = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let mode: SharingMode = args.get(2).map_or("snp_ps", String::as_str).parse()?;
    let schedule = args.get(3).map_or("0.3-0.3", String::as_str).parse()?;

    let cfg = QmixConfig { epsilon_anneal_steps: 5000, ..QmixConfig::default() };
    let mut env = Lbf::new(lbf_preset("LBF1-desk")?, substream(0, "env"))?;
    let mut eval_env = Lbf::new(lbf_preset("LBF1-desk")?, substream(0, "eval"))?;
    let topo = NetworkTopology::recurrent(env.observation_width(), cfg.hidden_width, env.n_actions())?;
    let agents = SharedAgentNetwork::new(&topo, mode, &schedule, env.n_agents(), 1, 2)?;
    let mut trainer = QmixTrainer::new(cfg, agents, env.state_width(), 3)?;
    for ep in 1..=episodes {
        let st = trainer.train_episode(&mut env)?;
        if ep % 50 == 0 {
            let greedy = trainer.evaluate(&mut eval_env, 10)?;
            println!(
                "episode {ep:>5}  steps {:>6}  eps {:.2}  train return {:.3}  greedy {greedy:.3}",
                trainer.env_steps(),
                st.epsilon,
                st.team_return
            );
        }
    }
    Ok(())
}
