//! Sweeps the critic's last-layer pruning ratio with the actor schedule held
//! fixed, then prints the resource table of all runs.
//!
//! cargo run --release --example ratio_sweep -- [total_steps] [ratios...]

use snpps::harness::{report_resources, sweep_pruning_ratio, ExperimentConfig, SweepAxis};

fn main() -> snpps::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let mut ratios: Vec<String> = args.iter().skip(2).cloned().collect();
    if ratios.is_empty() {
        ratios = vec!["0.1".into(), "0.5".into(), "0.9".into()];
    }
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/lbf1_desk_a2c_snpps.toml");
    let (mut cfg, _) = ExperimentConfig::load(path)?;
    cfg.total_steps = steps;
    cfg.eval_interval = steps;
    cfg.seeds = vec![0, 1];
    cfg.output_dir = std::env::temp_dir().join("snpps-sweep");
    for row in sweep_pruning_ratio(&cfg, SweepAxis::Critic, &ratios)? {
        println!(
            "critic {:<12} actor {:<12} mean {:.3} +/- {:.3}",
            row.critic_schedule.unwrap_or_default(),
            row.actor_schedule,
            row.mean,
            row.stderr
        );
    }
    for r in report_resources(&cfg.output_dir)? {
        println!("{} {:<8} {} params, {:.1} ms/1000 steps", r.config_hash, r.sharing, r.parameters, r.ms_per_1000_steps);
    }
    Ok(())
}
