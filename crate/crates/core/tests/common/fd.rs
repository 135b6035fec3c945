//! Random finite-difference instances shared by the module tests and the
//! acceptance run.

pub const FD_TOL: f64 = 1e-4;

pub mod netcore {
    use rand::Rng as _;
    use snpps::netcore::{
        backward_into, forward, init_parameters, Activation, GradientStore, LayerSpec, NetworkTopology,
        ParameterStore, RecurrentState,
    };

    use crate::common::{fd_max_rel_err, random_vec, rng};

    /// A random feed-forward or recurrent network with random parameters,
    /// gates and input, drawn from `seed`.
    pub struct Instance {
        pub topo: NetworkTopology,
        pub params: ParameterStore,
        pub gates: Option<Vec<Vec<f64>>>,
        pub inputs: Vec<Vec<f64>>,
        pub coeffs: Vec<Vec<f64>>,
    }

    pub fn instance(seed: u64, recurrent: bool) -> Instance {
        let mut r = rng(seed);
        let input = r.gen_range(1..6);
        let out = r.gen_range(1..5);
        let hidden_act = if r.gen_bool(0.5) { Activation::Tanh } else { Activation::Relu };
        let out_act = [Activation::Identity, Activation::Tanh, Activation::Softmax][r.gen_range(0..3)];
        let topo = if recurrent {
            let h = r.gen_range(1..6);
            NetworkTopology::new(vec![
                LayerSpec::dense(input, h, hidden_act),
                LayerSpec::gru(h, h),
                LayerSpec::dense(h, out, out_act),
            ])
            .unwrap()
        } else {
            let depth = r.gen_range(1..4);
            let hidden: Vec<usize> = (0..depth).map(|_| r.gen_range(1..7)).collect();
            NetworkTopology::mlp(input, &hidden, out, hidden_act, out_act).unwrap()
        };
        let mut params = init_parameters(&topo, r.gen());
        // Non-zero biases so every bias gradient is exercised.
        for v in params.values_mut() {
            *v += r.gen_range(-0.1..0.1);
        }
        let gates = r.gen_bool(0.5).then(|| {
            topo.hidden_widths().iter().map(|&w| (0..w).map(|_| if r.gen_bool(0.7) { 1.0 } else { 0.0 }).collect()).collect()
        });
        let steps = if recurrent { 3 } else { 1 };
        let inputs = (0..steps).map(|_| random_vec(&mut r, input, 1.0)).collect();
        let coeffs = (0..steps).map(|_| random_vec(&mut r, out, 1.0)).collect();
        Instance { topo, params, gates, inputs, coeffs }
    }

    /// Loss `sum_t c_t . y_t` over the sequence.
    pub fn loss(inst: &Instance, params: &ParameterStore, inputs: &[Vec<f64>]) -> f64 {
        let mut state = RecurrentState::initial(&inst.topo);
        let mut total = 0.0;
        for (x, c) in inputs.iter().zip(&inst.coeffs) {
            let pass = forward(params, &inst.topo, x, &state, inst.gates.as_deref()).unwrap();
            total += pass.output.iter().zip(c).map(|(y, c)| y * c).sum::<f64>();
            state = pass.state;
        }
        total
    }

    /// Analytic parameter gradient and gradient with respect to every input.
    pub fn analytic(inst: &Instance) -> (GradientStore, Vec<Vec<f64>>) {
        let mut state = RecurrentState::initial(&inst.topo);
        let mut caches = Vec::new();
        for x in &inst.inputs {
            let pass = forward(&inst.params, &inst.topo, x, &state, inst.gates.as_deref()).unwrap();
            caches.push(pass.cache);
            state = pass.state;
        }
        let mut grads = GradientStore::zeros(&inst.topo);
        let mut d_state: Option<Vec<f64>> = None;
        let mut d_inputs = vec![Vec::new(); caches.len()];
        for t in (0..caches.len()).rev() {
            let flow =
                backward_into(&inst.params, &inst.topo, &caches[t], &inst.coeffs[t], d_state.as_deref(), &mut grads).unwrap();
            d_inputs[t] = flow.input;
            d_state = Some(flow.state);
        }
        (grads, d_inputs)
    }

    pub fn check_instance(inst: &Instance) -> (f64, f64) {
        let (grads, d_inputs) = analytic(inst);
        let param_err = fd_max_rel_err(inst.params.values(), grads.values(), |theta| {
            loss(inst, &ParameterStore::from_values(theta.to_vec()), &inst.inputs)
        });
        let flat: Vec<f64> = inst.inputs.concat();
        let width = inst.topo.input_width();
        let input_err = fd_max_rel_err(&flat, &d_inputs.concat(), |x| {
            let xs: Vec<Vec<f64>> = x.chunks(width).map(<[f64]>::to_vec).collect();
            loss(inst, &inst.params, &xs)
        });
        (param_err, input_err)
    }
}

pub mod qmix {
    use rand::Rng as _;
    use snpps::netcore::{Activation, LayerSpec, NetworkTopology, ParameterStore};
    use snpps::pruning::PruningSchedule;
    use snpps::qmix::{Episode, MixerConfig, QmixConfig, QmixTrainer, Transition};
    use snpps::sharednet::SharedAgentNetwork;

    use crate::common::{fd_max_rel_err, random_vec, rng};

    pub fn utility(obs: usize, hidden: usize, actions: usize) -> NetworkTopology {
        NetworkTopology::new(vec![
            LayerSpec::dense(obs, hidden, Activation::Tanh),
            LayerSpec::gru(hidden, hidden),
            LayerSpec::dense(hidden, actions, Activation::Identity),
        ])
        .unwrap()
    }

    pub fn small_config() -> QmixConfig {
        QmixConfig {
            batch_size: 4,
            min_buffer_episodes: 4,
            mixer: MixerConfig { embed_width: 4, hypernet_width: 4 },
            ..QmixConfig::default()
        }
    }

    pub fn trainer(mode: &str, sched: &str, n: usize, obs: usize, state: usize, actions: usize, seed: u64, cfg: QmixConfig) -> QmixTrainer {
        let base = utility(obs, 4, actions);
        let sched: PruningSchedule = sched.parse().unwrap();
        let agents = SharedAgentNetwork::new(&base, mode.parse().unwrap(), &sched, n, seed, seed + 1).unwrap();
        QmixTrainer::new(cfg, agents, state, seed).unwrap()
    }

    pub fn random_episode(r: &mut snpps::rng::Rng, n: usize, obs: usize, state: usize, actions: usize, len: usize) -> Episode {
        let transitions = (0..len)
            .map(|t| Transition {
                state: random_vec(r, state, 1.0),
                observations: (0..n).map(|_| random_vec(r, obs, 1.0)).collect(),
                actions: (0..n).map(|_| r.gen_range(0..actions)).collect(),
                reward: r.gen_range(-1.0..1.0),
                next_state: random_vec(r, state, 1.0),
                next_observations: (0..n).map(|_| random_vec(r, obs, 1.0)).collect(),
                terminal: t + 1 == len && r.gen_bool(0.5),
            })
            .collect();
        Episode { transitions }
    }

    /// Concatenated online parameters: utility root then the four hypernetworks.
    pub fn flat_params(t: &QmixTrainer) -> Vec<f64> {
        let mut v = t.agents().roots()[0].values().to_vec();
        for p in t.mixer().params() {
            v.extend_from_slice(p.values());
        }
        v
    }

    pub fn set_flat(t: &mut QmixTrainer, theta: &[f64]) {
        let mut off = t.agents().roots()[0].len();
        t.agents_mut().roots_mut()[0] = ParameterStore::from_values(theta[..off].to_vec());
        for p in t.mixer_mut().params_mut() {
            let len = p.len();
            p.values_mut().copy_from_slice(&theta[off..off + len]);
            off += len;
        }
    }

    /// Max relative error of the TD-loss gradient over utility and mixer
    /// parameters on one random instance.
    pub fn td_loss_case(seed: u64) -> f64 {
        let mut r = rng(seed ^ 0x51);
        let n = r.gen_range(1..4);
        let mode = ["fups", "snp_ps", "fups_id"][seed as usize % 3];
        let gamma = [0.0, 0.9, 0.99][r.gen_range(0..3)];
        let mut t = trainer(mode, "0.25-0.25", n, 3, 4, 3, seed, QmixConfig { gamma, ..small_config() });
        // Move the online networks away from the target copies.
        let mut theta = flat_params(&t);
        theta.iter_mut().for_each(|v| *v += r.gen_range(-0.05..0.05));
        set_flat(&mut t, &theta);
        let lens = [r.gen_range(1..4), r.gen_range(1..4)];
        let episodes: Vec<Episode> = lens.iter().map(|&l| random_episode(&mut r, n, 3, 4, 3, l)).collect();
        let batch: Vec<&Episode> = episodes.iter().collect();
        let td = t.td_loss(&batch).unwrap();
        let mut analytic: Vec<f64> = vec![0.0; t.agents().roots()[0].len()];
        for g in &td.agent_grads {
            analytic.iter_mut().zip(g.values()).for_each(|(a, v)| *a += v);
        }
        for g in &td.mixer_grads {
            analytic.extend_from_slice(g.values());
        }
        let mut probe = trainer(mode, "0.25-0.25", n, 3, 4, 3, seed, QmixConfig { gamma, ..small_config() });
        fd_max_rel_err(&theta, &analytic, |x| {
            set_flat(&mut probe, x);
            probe.td_loss(&batch).unwrap().loss
        })
    }
}

pub mod a2c {
    use rand::Rng as _;
    use snpps::maa2c::{A2cConfig, A2cTrainer, RolloutSegment};
    use snpps::netcore::{Activation, NetworkTopology, ParameterStore};
    use snpps::pruning::PruningSchedule;
    use snpps::sharednet::{SharedAgentNetwork, SharingMode};

    use crate::common::{fd_max_rel_err, random_vec, rng};

    pub fn mlp(input: usize, hidden: &[usize], out: usize) -> NetworkTopology {
        NetworkTopology::mlp(input, hidden, out, Activation::Tanh, Activation::Identity).unwrap()
    }

    pub fn trainer(mode: &str, sched: &str, n: usize, obs: usize, actions: usize, seed: u64, cfg: A2cConfig) -> A2cTrainer {
        let s: PruningSchedule = sched.parse().unwrap();
        let m: SharingMode = mode.parse().unwrap();
        let hidden = [6, 5];
        let actor = SharedAgentNetwork::new(&mlp(obs, &hidden, actions), m.clone(), &s, n, seed, seed + 1).unwrap();
        let critic = SharedAgentNetwork::new(&mlp(obs, &hidden, 1), m, &s, n, seed + 2, seed + 3).unwrap();
        A2cTrainer::new(cfg, actor, critic, seed).unwrap()
    }

    pub fn random_segment(r: &mut snpps::rng::Rng, n: usize, obs: usize, actions: usize, len: usize) -> RolloutSegment {
        RolloutSegment::new(
            (0..len).map(|_| (0..n).map(|_| random_vec(r, obs, 1.0)).collect()).collect(),
            (0..len).map(|_| (0..n).map(|_| r.gen_range(0..actions)).collect()).collect(),
            (0..len).map(|_| random_vec(r, n, 1.0)).collect(),
            (0..len).map(|_| random_vec(r, n, 2.0)).collect(),
            random_vec(r, n, 2.0),
            r.gen_bool(0.3),
        )
        .unwrap()
    }

    pub fn flat(t: &A2cTrainer) -> Vec<f64> {
        let mut v = t.actor().roots()[0].values().to_vec();
        v.extend_from_slice(t.critic().roots()[0].values());
        v
    }

    pub fn set_flat(t: &mut A2cTrainer, theta: &[f64]) {
        let k = t.actor().roots()[0].len();
        t.actor_mut().roots_mut()[0] = ParameterStore::from_values(theta[..k].to_vec());
        t.critic_mut().roots_mut()[0] = ParameterStore::from_values(theta[k..].to_vec());
    }

    /// Max relative error of the combined actor-critic loss gradient on one
    /// random instance.
    pub fn a2c_loss_case(seed: u64) -> f64 {
        let mut r = rng(seed ^ 0xa2);
        let n = r.gen_range(1..4);
        let mode = ["fups", "snp_ps", "fups_id", "snp_nps"][seed as usize % 4];
        let cfg = A2cConfig { entropy_coef: r.gen_range(0.0..0.1), value_coef: r.gen_range(0.1..1.0), ..A2cConfig::default() };
        let t = trainer(mode, "0.5-0.2", n, 3, 4, seed, cfg.clone());
        let len = r.gen_range(1..6);
        let seg = random_segment(&mut r, n, 3, 4, len);
        let loss = t.a2c_loss(&seg).unwrap();
        let mut analytic = t.actor().accumulate_agent_gradients(&loss.actor_grads).unwrap()[0].values().to_vec();
        analytic.extend_from_slice(t.critic().accumulate_agent_gradients(&loss.critic_grads).unwrap()[0].values());
        let mut probe = trainer(mode, "0.5-0.2", n, 3, 4, seed, cfg);
        fd_max_rel_err(&flat(&t), &analytic, |x| {
            set_flat(&mut probe, x);
            probe.a2c_loss(&seg).unwrap().terms.total
        })
    }
}
