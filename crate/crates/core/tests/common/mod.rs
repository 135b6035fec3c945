#![allow(dead_code)]

pub mod fd;

use rand::{Rng as _, SeedableRng};
use snpps::netcore::{Activation, LayerKind, NetworkTopology, ParameterStore};
use snpps::rng::Rng;

/// Gradient entries are compared relative to their magnitude, with a floor
/// so entries that are numerically zero compare on absolute error.
pub const REL_FLOOR: f64 = 1e-5;
pub const FD_STEP: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Central differences of `f` with respect to every coordinate of `theta`;
/// returns the largest relative error against `analytic`.
pub fn fd_max_rel_err(theta: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(theta.len(), analytic.len());
    let mut x = theta.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let up = f(&x);
        x[i] = orig - FD_STEP;
        let down = f(&x);
        x[i] = orig;
        let fd = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(fd, analytic[i]));
    }
    worst
}

fn act(a: Activation, v: &mut [f64]) {
    match a {
        Activation::Relu => v.iter_mut().for_each(|x| *x = if *x > 0.0 { *x } else { 0.0 }),
        Activation::Tanh => v.iter_mut().for_each(|x| *x = x.tanh()),
        Activation::Identity => {}
        Activation::Softmax => {
            let m = v.iter().cloned().fold(f64::MIN, f64::max);
            let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
            v.iter_mut().for_each(|x| *x = (*x - m).exp() / s);
        }
    }
}

fn matvec(p: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows];
    for r in 0..rows {
        for c in 0..cols {
            out[r] += p[r * cols + c] * x[c];
        }
    }
    out
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straightforward re-implementation of the forward pass used as an oracle.
/// Returns `(output, new hidden state, hidden feature vectors)`.
pub fn oracle_forward(
    topo: &NetworkTopology,
    params: &ParameterStore,
    input: &[f64],
    h: &[f64],
    gates: Option<&[Vec<f64>]>,
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let v = params.values();
    let mut x = input.to_vec();
    let mut new_h = Vec::new();
    let mut hidden = Vec::new();
    let n_layers = topo.layers().len();
    for (k, (spec, blocks)) in topo.layers().iter().zip(topo.blocks()).enumerate() {
        let t = blocks.tensors(spec);
        let o = spec.output_width;
        let mut y = match spec.kind {
            LayerKind::Dense => {
                let (rows, cols, w) = &t[0];
                let mut y = matvec(&v[w.clone()], *rows, *cols, &x);
                for (j, b) in v[t[1].2.clone()].iter().enumerate() {
                    y[j] += b;
                }
                act(spec.activation, &mut y);
                y
            }
            LayerKind::Gru => {
                let gi = matvec(&v[t[0].2.clone()], 3 * o, spec.input_width, &x);
                let gh = matvec(&v[t[1].2.clone()], 3 * o, o, h);
                let bi = &v[t[2].2.clone()];
                let bh = &v[t[3].2.clone()];
                (0..o)
                    .map(|j| {
                        let r = sig(gi[j] + bi[j] + gh[j] + bh[j]);
                        let z = sig(gi[o + j] + bi[o + j] + gh[o + j] + bh[o + j]);
                        let n = (gi[2 * o + j] + bi[2 * o + j] + r * (gh[2 * o + j] + bh[2 * o + j])).tanh();
                        (1.0 - z) * n + z * h[j]
                    })
                    .collect()
            }
        };
        if k + 1 < n_layers {
            if let Some(g) = gates {
                y.iter_mut().zip(&g[k]).for_each(|(a, m)| *a *= m);
            }
            hidden.push(y.clone());
        }
        if spec.kind == LayerKind::Gru {
            new_h = y.clone();
        }
        x = y;
    }
    (x, new_h, hidden)
}

/// Grid-array re-implementation of the foraging rules, used to replay action
/// logs independently of the library. Returns per-step, per-agent rewards
/// and whether the episode ended at each step.
pub fn oracle_lbf_replay(
    rows: usize,
    cols: usize,
    max_steps: usize,
    agents: &[(usize, usize, u32)],
    foods: &[(usize, usize, u32)],
    actions: &[Vec<usize>],
) -> Vec<(Vec<f64>, bool)> {
    // 0 = empty, otherwise level; separate layers for agents and foods.
    let mut food_grid = vec![vec![0u32; cols]; rows];
    for &(r, c, l) in foods {
        food_grid[r][c] = l;
    }
    let mut pos: Vec<(i64, i64)> = agents.iter().map(|&(r, c, _)| (r as i64, c as i64)).collect();
    let levels: Vec<u32> = agents.iter().map(|a| a.2).collect();
    let total: f64 = f64::from(foods.iter().map(|f| f.2).sum::<u32>().max(1));
    let food_order: Vec<(usize, usize)> = foods.iter().map(|&(r, c, _)| (r, c)).collect();
    let mut out = Vec::new();
    for (t, joint) in actions.iter().enumerate() {
        let mut agent_grid = vec![vec![false; cols]; rows];
        for &(r, c) in &pos {
            agent_grid[r as usize][c as usize] = true;
        }
        let want: Vec<Option<(i64, i64)>> = joint
            .iter()
            .zip(&pos)
            .map(|(&a, &(r, c))| {
                let (dr, dc) = match a {
                    0 => (-1, 0),
                    1 => (1, 0),
                    2 => (0, -1),
                    3 => (0, 1),
                    _ => return None,
                };
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                    return None;
                }
                let (ur, uc) = (nr as usize, nc as usize);
                (food_grid[ur][uc] == 0 && !agent_grid[ur][uc]).then_some((nr, nc))
            })
            .collect();
        let mut claims = vec![vec![0usize; cols]; rows];
        for w in want.iter().flatten() {
            claims[w.0 as usize][w.1 as usize] += 1;
        }
        for (p, w) in pos.iter_mut().zip(&want) {
            if let Some(w) = w {
                if claims[w.0 as usize][w.1 as usize] == 1 {
                    *p = *w;
                }
            }
        }
        let mut rewards = vec![0.0; pos.len()];
        for &(fr, fc) in &food_order {
            let level = food_grid[fr][fc];
            if level == 0 {
                continue;
            }
            let foragers: Vec<usize> = (0..pos.len())
                .filter(|&i| {
                    joint[i] == 5 && (pos[i].0 - fr as i64).abs() + (pos[i].1 - fc as i64).abs() == 1
                })
                .collect();
            let sum: u32 = foragers.iter().map(|&i| levels[i]).sum();
            if !foragers.is_empty() && sum >= level {
                for &i in &foragers {
                    rewards[i] += f64::from(level) * f64::from(levels[i]) / (f64::from(sum) * total);
                }
                food_grid[fr][fc] = 0;
            }
        }
        let cleared = food_grid.iter().flatten().all(|&l| l == 0);
        out.push((rewards, cleared || t + 1 >= max_steps));
    }
    out
}

/// Plays `episodes` LBF episodes with random actions (foraging favoured) and
/// checks each reward stream against [`oracle_lbf_replay`]. Returns the
/// number of episodes that foraged at least one food.
pub fn check_lbf_against_oracle(preset: &str, episodes: u64) -> usize {
    use snpps::envs::{lbf_preset, Environment, Lbf};
    let cfg = lbf_preset(preset).unwrap();
    let mut foraged = 0;
    for ep in 0..episodes {
        let mut env = Lbf::new(cfg.clone(), snpps::rng::substream(ep, "env")).unwrap();
        env.reset();
        let start = env.snapshot().clone();
        let mut r = rng(ep);
        let mut log = Vec::new();
        let mut got = Vec::new();
        loop {
            let joint: Vec<usize> =
                (0..cfg.n_agents()).map(|_| if r.gen_bool(0.3) { 5 } else { r.gen_range(0..5) }).collect();
            let out = env.step(&joint).unwrap();
            log.push(joint);
            got.push((out.rewards.clone(), out.done()));
            if out.done() {
                break;
            }
        }
        let want = oracle_lbf_replay(cfg.rows, cfg.cols, cfg.max_steps, &start.agents, &start.foods, &log);
        assert_eq!(got.len(), want.len(), "episode {ep}: length");
        for (t, ((gr, gd), (wr, wd))) in got.iter().zip(&want).enumerate() {
            assert_eq!(gd, wd, "episode {ep} step {t}: done flag");
            let same = gr.iter().zip(wr).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "episode {ep} step {t}: {gr:?} vs {wr:?}");
        }
        if got.iter().any(|(r, _)| r.iter().any(|&v| v > 0.0)) {
            foraged += 1;
        }
    }
    foraged
}
