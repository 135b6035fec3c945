//! Plays one random LBF episode and prints the grid after every step.
//!
//! cargo run --example lbf_episode -- [preset] [seed]

use rand::Rng;
use snpps::envs::{lbf_preset, Environment, Lbf};
use snpps::rng::substream;

fn draw(env: &Lbf) {
    let cfg = env.config();
    let s = env.snapshot();
    let mut grid = vec![vec![" .".to_string(); cfg.cols]; cfg.rows];
    for &(r, c, l) in &s.foods {
        grid[r][c] = format!("F{l}");
    }
    for (i, &(r, c, l)) in s.agents.iter().enumerate() {
        grid[r][c] = format!("{}{l}", (b'a' + i as u8) as char);
    }
    for row in grid {
        println!("  {}", row.join(" "));
    }
}

fn main() -> snpps::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let preset = args.get(1).map_or("LBF1-desk", String::as_str);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut env = Lbf::new(lbf_preset(preset)?, substream(seed, "env"))?;
    let mut rng = substream(seed, "actions");
    env.reset();
    draw(&env);
    let mut total = 0.0;
    loop {
        // Agents, then foods, with their levels. Actions: up down left right none load.
        let joint: Vec<usize> = (0..env.n_agents()).map(|_| if rng.gen_bool(0.4) { 5 } else { rng.gen_range(0..5) }).collect();
        let out = env.step(&joint)?;
        total += out.team_reward;
        println!("step {} actions {joint:?} rewards {:?}", env.snapshot().step, out.rewards);
        draw(&env);
        if out.done() {
            println!("episode over (terminated: {}), team return {total:.3}", out.terminated);
            return Ok(());
        }
    }
}
