//! Runs an experiment file through the harness and prints the learning
//! curve of each seed. Defaults to a shortened copy of the LBF1-desk config.
//!
//! cargo run --release --example run_config -- [config.toml] [total_steps]

use snpps::harness::{run_experiment, ExperimentConfig};

fn main() -> snpps::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let path = args.get(1).map_or(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/lbf1_desk_a2c_snpps.toml"), String::as_str);
    let (mut cfg, _) = ExperimentConfig::load(path)?;
    cfg.total_steps = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    cfg.eval_interval = cfg.eval_interval.min(cfg.total_steps / 4).max(1);
    cfg.output_dir = std::env::temp_dir().join(format!("snpps-run-{}", cfg.config_hash()));
    println!("config {} -> {}", cfg.config_hash(), cfg.output_dir.display());
    for r in run_experiment(&cfg, None)? {
        let curve: Vec<String> = r.curve.iter().map(|p| format!("{}:{:.2}", p.step, p.mean_return)).collect();
        println!("seed {}  {}  ({:.0} ms / 1000 steps)", r.seed, curve.join(" "), r.ms_per_1000_steps);
    }
    Ok(())
}
