mod common;

use common::{random_vec, rng};
use rand::Rng as _;
use snpps::envs::lbf_preset;
use snpps::netcore::{
    backward, forward, Activation, GradientStore, LayerSpec, NetworkTopology, OptimizerConfig, RecurrentState,
};
use snpps::pruning::{expand_to_weight_mask, PruningSchedule};
use snpps::sharednet::{dump_hidden_features, dump_hidden_features_batch, SharedAgentNetwork, SharingMode};
use snpps::Error;

fn schedule(s: &str) -> PruningSchedule {
    s.parse().unwrap()
}

fn mode(s: &str) -> SharingMode {
    s.parse().unwrap()
}

fn mlp(input: usize, hidden: &[usize], out: usize) -> NetworkTopology {
    NetworkTopology::mlp(input, hidden, out, Activation::Relu, Activation::Identity).unwrap()
}

fn recurrent(input: usize, h: usize, out: usize) -> NetworkTopology {
    NetworkTopology::new(vec![
        LayerSpec::dense(input, h, Activation::Tanh),
        LayerSpec::gru(h, h),
        LayerSpec::dense(h, out, Activation::Identity),
    ])
    .unwrap()
}

fn outputs(net: &SharedAgentNetwork, obs: &[f64]) -> Vec<Vec<f64>> {
    (0..net.n_agents()).map(|i| net.agent_forward(i, obs, &net.initial_state()).unwrap().output).collect()
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn fups_agents_share_one_function() {
    let net = SharedAgentNetwork::new(&mlp(6, &[16, 16], 4), SharingMode::Fups, &schedule("0-0"), 4, 1, 2).unwrap();
    let outs = outputs(&net, &random_vec(&mut rng(0), 6, 1.0));
    assert!(outs.iter().all(|o| bits(o) == bits(&outs[0])));
}

#[test]
fn zero_schedule_collapses_to_fups() {
    let base = recurrent(6, 12, 4);
    let fups = SharedAgentNetwork::new(&base, SharingMode::Fups, &schedule("0-0"), 3, 5, 6).unwrap();
    let snp = SharedAgentNetwork::new(&base, SharingMode::SnpPs, &schedule("0-0"), 3, 5, 6).unwrap();
    let obs = random_vec(&mut rng(1), 6, 1.0);
    for (a, b) in outputs(&fups, &obs).iter().zip(outputs(&snp, &obs)) {
        assert_eq!(bits(a), bits(&b));
    }
}

/// Fraction of seeds on which agents 0 and 1 produce different outputs.
fn distinct_fraction(m: &str, sched: &str, seeds: u64) -> f64 {
    let base = mlp(8, &[32, 32], 5);
    let mut differ = 0;
    let mut counted = 0;
    for s in 0..seeds {
        let net = SharedAgentNetwork::new(&base, mode(m), &schedule(sched), 3, s, s + 1000).unwrap();
        if let Some(g) = net.neuron_masks() {
            if m == "snp_ps" && g.masks[0] == g.masks[1] {
                continue;
            }
        }
        counted += 1;
        let outs = outputs(&net, &random_vec(&mut rng(s), 8, 1.0));
        if bits(&outs[0]) != bits(&outs[1]) {
            differ += 1;
        }
    }
    f64::from(differ) / f64::from(counted)
}

#[test]
fn distinct_masks_make_agents_identifiable() {
    assert!(distinct_fraction("snp_ps", "0.5-0.5", 200) >= 0.99);
    assert_eq!(distinct_fraction("snp_nps", "0.5-0.5", 100), 0.0);
    assert_eq!(distinct_fraction("fups", "0-0", 100), 0.0);
}

/// Per-agent gradient of `c . y` for each agent, accumulated by the network.
fn network_root_gradient(net: &SharedAgentNetwork, obs: &[f64], coeffs: &[Vec<f64>]) -> Vec<GradientStore> {
    let mut per_agent = net.zero_gradients();
    for (i, g) in per_agent.iter_mut().enumerate() {
        let step = net.agent_forward(i, obs, &net.initial_state()).unwrap();
        net.agent_backward(i, &step.cache, &coeffs[i], None, g).unwrap();
        net.mask_agent_gradient(i, g);
    }
    net.accumulate_agent_gradients(&per_agent).unwrap()
}

#[test]
fn accumulation_matches_separate_masked_networks() {
    let mut r = rng(4);
    for seed in 0..30u64 {
        let base = if seed % 2 == 0 { mlp(5, &[8, 8], 3) } else { recurrent(5, 8, 3) };
        for m in ["snp_ps", "usnp_ps", "snp_nps"] {
            let net = SharedAgentNetwork::new(&base, mode(m), &schedule("0.5-0.25"), 3, seed, seed + 1).unwrap();
            let obs = random_vec(&mut r, 5, 1.0);
            let coeffs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut r, 3, 1.0)).collect();
            let got = network_root_gradient(&net, &obs, &coeffs);
            assert_eq!(got.len(), 1);

            // Oracle: agent i owns a physical copy theta * M_i.
            let topo = net.topology();
            let mut mean = vec![0.0; topo.parameter_count()];
            for (i, c) in coeffs.iter().enumerate() {
                let wm = match net.neuron_masks() {
                    Some(g) => expand_to_weight_mask(g.mask(i), topo).unwrap(),
                    None => net.weight_masks().unwrap()[i].clone(),
                };
                let mut p = net.roots()[0].clone();
                wm.apply(p.values_mut());
                let pass = forward(&p, topo, &obs, &RecurrentState::initial(topo), None).unwrap();
                let mut g = backward(&p, topo, &pass.cache, c).unwrap();
                wm.apply(g.values_mut());
                for (m, v) in mean.iter_mut().zip(g.values()) {
                    *m += v / 3.0;
                }
            }
            for (a, b) in got[0].values().iter().zip(&mean) {
                assert!((a - b).abs() < 1e-12, "{m}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn single_owner_and_common_gradients() {
    let net = SharedAgentNetwork::new(&mlp(3, &[4], 2), SharingMode::Fups, &schedule("0"), 2, 0, 0).unwrap();
    let mut a = GradientStore::zeros(net.topology());
    a.values_mut().iter_mut().enumerate().for_each(|(k, v)| *v = k as f64);
    let zero = GradientStore::zeros(net.topology());
    let root = net.accumulate_agent_gradients(&[a.clone(), zero]).unwrap();
    for (r, v) in root[0].values().iter().zip(a.values()) {
        assert_eq!(*r, v / 2.0);
    }
    let root = net.accumulate_agent_gradients(&[a.clone(), a.clone()]).unwrap();
    assert_eq!(root[0].values(), a.values());
    assert!(matches!(net.accumulate_agent_gradients(&[a]), Err(Error::Usage(_))));
}

#[test]
fn grouped_roots_average_within_clusters() {
    let base = mlp(3, &[4], 2);
    let net = SharedAgentNetwork::new(&base, mode("grouped:0,1,1"), &schedule("0"), 3, 0, 0).unwrap();
    let stores: Vec<GradientStore> = (0..3)
        .map(|i| {
            let mut g = GradientStore::zeros(net.topology());
            g.values_mut().fill(i as f64 + 1.0);
            g
        })
        .collect();
    let roots = net.accumulate_agent_gradients(&stores).unwrap();
    assert_eq!(roots.len(), 2);
    assert!(roots[0].values().iter().all(|&v| v == 1.0));
    assert!(roots[1].values().iter().all(|&v| v == 2.5));
    let obs = [0.1, 0.2, 0.3];
    let outs = outputs(&net, &obs);
    assert_ne!(bits(&outs[0]), bits(&outs[1]));
}

fn shape_product_count(t: &NetworkTopology) -> usize {
    t.layers()
        .iter()
        .map(|l| match l.kind {
            snpps::netcore::LayerKind::Dense => l.output_width * l.input_width + l.output_width,
            snpps::netcore::LayerKind::Gru => 3 * l.output_width * (l.input_width + l.output_width) + 6 * l.output_width,
        })
        .sum()
}

#[test]
fn parameter_counts_follow_the_sharing_layout() {
    let lbf = lbf_preset("LBF1").unwrap();
    let base = mlp(lbf.observation_width(), &[128, 128, 128], 6);
    let n = lbf.n_agents();
    let count = |m: &str| {
        SharedAgentNetwork::new(&base, mode(m), &schedule("0-0.1-0.9"), n, 0, 1).unwrap().parameter_count().trainable
    };
    let fups = count("fups");
    assert_eq!(fups, shape_product_count(&base));
    assert_eq!(count("snp_ps"), fups);
    assert_eq!(count("usnp_ps"), fups);
    assert_eq!(count("fups_id") - fups, 6 * 128);
    assert_eq!(count("snp_ps_id"), count("fups_id"));
    assert_eq!(count("grouped:0,0,1,1,2,2"), 3 * fups);
    assert!(count("snp_ps") < count("fups_id") && count("fups_id") < count("grouped:0,0,1,1,2,2"));
    let id_net = SharedAgentNetwork::new(&base, SharingMode::FupsId, &schedule("0-0-0"), n, 0, 1).unwrap();
    assert_eq!(id_net.parameter_count().one_hot_weights, 768);
    assert_eq!(id_net.topology().input_width(), lbf.observation_width() + n);
    let gru = recurrent(10, 64, 5);
    let net = SharedAgentNetwork::new(&gru, SharingMode::Fups, &schedule("0-0"), 2, 0, 1).unwrap();
    assert_eq!(net.parameter_count().trainable, shape_product_count(&gru));
}

#[test]
fn one_hot_only_reaches_the_first_layer() {
    let base = mlp(4, &[8, 8], 3);
    let mut net = SharedAgentNetwork::new(&base, SharingMode::FupsId, &schedule("0-0"), 3, 2, 3).unwrap();
    let obs = [0.5, -0.1, 0.3, 0.9];
    let before = outputs(&net, &obs);
    assert_ne!(bits(&before[0]), bits(&before[1]));
    // Zeroing the one-hot columns removes every difference between agents.
    let b = net.topology().blocks()[0].weight.clone();
    let width = net.topology().layers()[0].input_width;
    let root = &mut net.roots_mut()[0];
    for row in 0..8 {
        for col in 4..width {
            root.values_mut()[b.start + row * width + col] = 0.0;
        }
    }
    let after = outputs(&net, &obs);
    assert!(after.iter().all(|o| bits(o) == bits(&after[0])));
}

#[test]
fn feature_dumps_reflect_masks() {
    let base = mlp(6, &[16, 16], 4);
    let obs = random_vec(&mut rng(9), 6, 1.0);
    let fups = SharedAgentNetwork::new(&base, SharingMode::Fups, &schedule("0-0"), 3, 0, 1).unwrap();
    let dump = dump_hidden_features(&fups, &obs, 0, &[0, 1, 2]).unwrap();
    for layer in 0..2 {
        let a = dump.layer(0, layer, 0).unwrap();
        assert_eq!(a.len(), 16);
        assert!((1..3).all(|i| dump.layer(i, layer, 0).unwrap() == a));
    }
    let snp = SharedAgentNetwork::new(&base, SharingMode::SnpPs, &schedule("0.5-0.5"), 3, 0, 1).unwrap();
    let dump = dump_hidden_features_batch(&snp, &[obs.clone(), obs.iter().map(|v| -v).collect()], &[0, 1, 2]).unwrap();
    let group = snp.neuron_masks().unwrap();
    for o in 0..2 {
        for i in 0..3 {
            for layer in 0..2 {
                let f = dump.layer(i, layer, o).unwrap();
                for (j, &kept) in group.mask(i).layers()[layer].iter().enumerate() {
                    if !kept {
                        assert_eq!(f[j], 0.0);
                    }
                }
            }
        }
        // No pruning before the first hidden vector: jointly kept units agree.
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let (fi, fj) = (dump.layer(i, 0, o).unwrap(), dump.layer(j, 0, o).unwrap());
            for u in 0..16 {
                if group.mask(i).layers()[0][u] && group.mask(j).layers()[0][u] {
                    assert_eq!(fi[u], fj[u]);
                }
            }
        }
    }
}

/// Trains on random linear losses; returns roots after `steps` SGD updates.
fn train_random(net: &mut SharedAgentNetwork, steps: usize, seed: u64) {
    let mut r = rng(seed);
    let cfg = OptimizerConfig { max_grad_norm: None, ..OptimizerConfig::default() };
    let (obs_w, out_w) = (net.observation_width(), net.output_width());
    for _ in 0..steps {
        let obs = random_vec(&mut r, obs_w, 1.0);
        let coeffs: Vec<Vec<f64>> = (0..net.n_agents()).map(|_| random_vec(&mut r, out_w, 1.0)).collect();
        let g = network_root_gradient(net, &obs, &coeffs);
        net.apply_gradients(&g, &cfg).unwrap();
    }
}

#[test]
fn zero_schedule_training_is_bit_identical_to_fups() {
    let base = recurrent(5, 8, 3);
    let mut a = SharedAgentNetwork::new(&base, SharingMode::Fups, &schedule("0-0"), 3, 7, 8).unwrap();
    let mut b = SharedAgentNetwork::new(&base, SharingMode::SnpPs, &schedule("0-0"), 3, 7, 8).unwrap();
    train_random(&mut a, 50, 1);
    train_random(&mut b, 50, 1);
    assert_eq!(bits(a.roots()[0].values()), bits(b.roots()[0].values()));
}

#[test]
fn positions_masked_for_every_agent_stay_inert() {
    let base = mlp(5, &[8, 8], 3);
    let mut net = SharedAgentNetwork::new(&base, SharingMode::SnpPs, &schedule("0.75-0.75"), 2, 3, 4).unwrap();
    let group = net.neuron_masks().unwrap().clone();
    let topo = net.topology().clone();
    let everyone_masked: Vec<usize> = {
        let masks: Vec<_> = group.masks.iter().map(|m| expand_to_weight_mask(m, &topo).unwrap()).collect();
        (0..topo.parameter_count()).filter(|&k| masks.iter().all(|m| m.is_zero(k))).collect()
    };
    assert!(!everyone_masked.is_empty());
    let initial = net.roots()[0].clone();
    train_random(&mut net, 100, 2);
    for &k in &everyone_masked {
        assert_eq!(net.roots()[0].values()[k].to_bits(), initial.values()[k].to_bits());
    }
    // Perturbing them changes no agent's output.
    let obs = [0.2, -0.4, 0.6, 0.1, -0.9];
    let before = outputs(&net, &obs);
    let mut r = rng(0);
    for &k in &everyone_masked {
        net.roots_mut()[0].values_mut()[k] = r.gen_range(-5.0..5.0);
    }
    for (a, b) in before.iter().zip(outputs(&net, &obs)) {
        assert_eq!(bits(a), bits(&b));
    }
}

#[test]
fn checkpoint_and_mask_file_rebuild_every_mode() {
    let base = recurrent(4, 8, 3);
    let obs = [0.3, 0.1, -0.2, 0.7];
    for m in ["fups", "fups_id", "snp_ps", "snp_ps_id", "usnp_ps", "snp_nps", "grouped:0,1,0"] {
        let mut net = SharedAgentNetwork::new(&base, mode(m), &schedule("0.25-0.5"), 3, 1, 2).unwrap();
        train_random(&mut net, 3, 5);
        let ckpt = net.to_checkpoint("test");
        let mf = net.mask_file();
        let mut bytes = Vec::new();
        ckpt.write_to(&mut bytes).unwrap();
        let ckpt = snpps::netcore::Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
        let mf = snpps::pruning::MaskFile::parse(&mf.to_text()).unwrap();
        let back = SharedAgentNetwork::from_checkpoint(&ckpt, &mf).unwrap();
        assert_eq!(back.mode(), net.mode());
        for (a, b) in outputs(&net, &obs).iter().zip(outputs(&back, &obs)) {
            assert_eq!(bits(a), bits(&b), "{m}");
        }
    }
}

#[test]
fn unknown_agents_and_bad_observations_are_usage_errors() {
    let net = SharedAgentNetwork::new(&mlp(3, &[4], 2), SharingMode::Fups, &schedule("0"), 2, 0, 0).unwrap();
    let s = net.initial_state();
    assert!(matches!(net.agent_forward(2, &[0.0; 3], &s), Err(Error::Usage(_))));
    assert!(matches!(net.agent_forward(0, &[0.0; 4], &s), Err(Error::Usage(_))));
    assert!(matches!(
        SharedAgentNetwork::new(&mlp(3, &[4], 2), mode("grouped:0,2"), &schedule("0"), 2, 0, 0),
        Err(Error::Config { .. })
    ));
}
