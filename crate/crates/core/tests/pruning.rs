mod common;

use proptest::prelude::*;
use rand::Rng as _;
use snpps::netcore::{forward, init_parameters, Activation, LayerSpec, NetworkTopology, ParameterStore, RecurrentState};
use snpps::pruning::{
    expand_to_weight_mask, generate_group_tickets, generate_single_ticket, generate_unstructured_masks,
    mask_overlap_stats, MaskFile, NeuronMask, PruningSchedule,
};
use snpps::Error;

fn schedule(s: &str) -> PruningSchedule {
    s.parse().unwrap()
}

fn mlp(input: usize, hidden: &[usize], out: usize) -> NetworkTopology {
    NetworkTopology::mlp(input, hidden, out, Activation::Relu, Activation::Identity).unwrap()
}

/// Ratios as whole percentages so the expected count is exact integer arithmetic.
fn arb_case() -> impl Strategy<Value = (Vec<usize>, Vec<u32>, usize, u64)> {
    prop::collection::vec((1usize..65, 0u32..100), 1..4)
        .prop_map(|layers| {
            // Keep at least one survivor per layer.
            layers.into_iter().map(|(w, pct)| (w, if (pct as usize * w) / 100 >= w { 0 } else { pct })).unzip()
        })
        .prop_flat_map(|(w, p): (Vec<usize>, Vec<u32>)| (Just(w), Just(p), 1usize..9, any::<u64>()))
}

fn pct_schedule(pcts: &[u32]) -> PruningSchedule {
    let text: Vec<String> = pcts.iter().map(|p| format!("{}", f64::from(*p) / 100.0)).collect();
    schedule(&text.join("-"))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pruned_counts_are_exact_and_seeded((widths, pcts, n, seed) in arb_case()) {
        let topo = mlp(3, &widths, 2);
        let sched = pct_schedule(&pcts);
        let group = generate_group_tickets(&topo, &sched, n, seed).unwrap();
        prop_assert_eq!(group.n_agents(), n);
        for m in &group.masks {
            for (k, &w) in widths.iter().enumerate() {
                prop_assert_eq!(m.pruned(k), pcts[k] as usize * w / 100);
            }
        }
        prop_assert_eq!(&group, &generate_group_tickets(&topo, &sched, n, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn mask_file_round_trips((widths, pcts, n, seed) in arb_case()) {
        let topo = mlp(3, &widths, 2);
        let group = generate_group_tickets(&topo, &pct_schedule(&pcts), n, seed).unwrap();
        let mut file = MaskFile::from_group(topo.fingerprint(), &group);
        file.attributes.push(("mode".into(), "snp_ps".into()));
        let back = MaskFile::parse(&file.to_text()).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.group().unwrap(), group);
    }

    #[test]
    fn unstructured_counts_are_exact((widths, pcts, n, seed) in arb_case()) {
        let topo = mlp(3, &widths, 2);
        let sched = pct_schedule(&pcts);
        let masks = generate_unstructured_masks(&topo, &sched, n, seed).unwrap();
        for m in &masks {
            for (k, b) in topo.blocks().iter().take(widths.len()).enumerate() {
                let zeros = b.weight.clone().filter(|&i| m.is_zero(i)).count();
                prop_assert_eq!(zeros, pcts[k] as usize * b.weight.len() / 100);
                prop_assert!(b.bias.clone().all(|i| !m.is_zero(i)));
            }
        }
    }
}

#[test]
fn forced_counts_for_small_layers() {
    let topo = mlp(2, &[4, 4], 1);
    let group = generate_group_tickets(&topo, &schedule("0.25-0.5"), 5, 9).unwrap();
    for m in &group.masks {
        assert_eq!((m.kept(0), m.kept(1)), (3, 2));
    }
    let dense = generate_group_tickets(&topo, &schedule("0-0"), 5, 9).unwrap();
    assert!(dense.masks.iter().all(NeuronMask::is_all_kept));
}

#[test]
fn zero_survivor_schedules_are_config_errors() {
    let topo = mlp(2, &[4, 1], 1);
    let err = generate_group_tickets(&topo, &schedule("0-0.99999999999"), 2, 0).unwrap_err();
    assert!(matches!(err, Error::Config { .. }), "{err}");
    assert!(generate_group_tickets(&topo, &schedule("0-0.99"), 2, 0).is_ok());
    assert!(matches!(generate_group_tickets(&topo, &schedule("0"), 2, 0), Err(Error::Config { .. })));
    assert!(matches!(generate_group_tickets(&topo, &schedule("0-0"), 0, 0), Err(Error::Config { .. })));
    assert!("0-1.0".parse::<PruningSchedule>().is_err());
}

#[test]
fn expected_kept_overlap_of_two_half_masks() {
    // Two uniformly random 32-subsets of 64 share 32 * 32 / 64 = 16 units on average.
    let topo = mlp(2, &[64], 1);
    let sched = schedule("0.5");
    let pairs = 10_000;
    let total: usize = (0..pairs)
        .map(|s| {
            let g = generate_group_tickets(&topo, &sched, 2, s).unwrap();
            let (a, b) = (&g.masks[0].layers()[0], &g.masks[1].layers()[0]);
            a.iter().zip(b).filter(|(x, y)| **x && **y).count()
        })
        .sum();
    let mean = total as f64 / pairs as f64;
    assert!((mean - 16.0).abs() < 0.5, "mean overlap {mean}");
}

#[test]
fn unstructured_small_layer_and_identity() {
    let topo = mlp(4, &[4], 1);
    for m in generate_unstructured_masks(&topo, &schedule("0.25"), 3, 1).unwrap() {
        assert_eq!(m.zero_count(), 4);
    }
    for m in generate_unstructured_masks(&topo, &schedule("0"), 3, 1).unwrap() {
        assert!(m.values().iter().all(|&v| v == 1.0));
    }
}

#[test]
fn unstructured_shared_zeros_match_independence() {
    // Each of 4096 weights is zeroed for both agents with probability 1/4.
    let topo = mlp(64, &[64], 1);
    let sched = schedule("0.5");
    let trials = 200;
    let w = topo.blocks()[0].weight.clone();
    let total: usize = (0..trials)
        .map(|s| {
            let m = generate_unstructured_masks(&topo, &sched, 2, s).unwrap();
            w.clone().filter(|&i| m[0].is_zero(i) && m[1].is_zero(i)).count()
        })
        .sum();
    let mean = total as f64 / trials as f64;
    assert!((mean - 1024.0).abs() / 1024.0 < 0.02, "mean shared zeros {mean}");
}

#[test]
fn single_ticket_is_replicated() {
    let topo = mlp(3, &[16, 64], 2);
    let g = generate_single_ticket(&topo, &schedule("0-0.5"), 4, 5).unwrap();
    assert_eq!(g.masks[0].pruned(1), 32);
    assert!(g.masks.iter().all(|m| m == &g.masks[0]));
    let stats = mask_overlap_stats(&g);
    for (k, s) in stats.iter().enumerate() {
        let kept = g.masks[0].kept(k);
        assert_eq!((s.min_shared, s.max_shared), (Some(kept), Some(kept)));
    }
}

#[test]
fn overlap_stats_match_brute_force() {
    let topo = mlp(3, &[8, 8], 2);
    for seed in 0..50 {
        let g = generate_group_tickets(&topo, &schedule("0-0.5"), 3, seed).unwrap();
        let stats = mask_overlap_stats(&g);
        assert!(stats[0].owners.iter().all(|&o| o == 3));
        let sets: Vec<Vec<usize>> = g
            .masks
            .iter()
            .map(|m| m.layers()[1].iter().enumerate().filter(|(_, &k)| k).map(|(j, _)| j).collect())
            .collect();
        let mut shared = Vec::new();
        for a in 0..3 {
            for b in a + 1..3 {
                shared.push(sets[a].iter().filter(|j| sets[b].contains(j)).count());
            }
        }
        let s = &stats[1];
        assert_eq!(s.min_shared, shared.iter().copied().min());
        assert_eq!(s.max_shared, shared.iter().copied().max());
        assert_eq!(s.mean_shared, Some(shared.iter().sum::<usize>() as f64 / 3.0));
        for j in 0..8 {
            assert_eq!(s.owners[j], sets.iter().filter(|set| set.contains(&j)).count());
        }
    }
}

#[test]
fn prune_positions_are_uniform_per_agent() {
    let topo = mlp(2, &[16], 1);
    let sched = schedule("0.25");
    let seeds = 4000u64;
    let n = 3;
    let mut counts = vec![vec![0usize; 16]; n];
    for s in 0..seeds {
        let g = generate_group_tickets(&topo, &sched, n, s).unwrap();
        for (a, m) in g.masks.iter().enumerate() {
            for (j, &kept) in m.layers()[0].iter().enumerate() {
                counts[a][j] += usize::from(!kept);
            }
        }
    }
    let p = 0.25;
    let sigma = (p * (1.0 - p) / seeds as f64).sqrt();
    for row in &counts {
        for &c in row {
            let f = c as f64 / seeds as f64;
            assert!((f - p).abs() <= 3.0 * sigma, "frequency {f}");
        }
    }
}

#[test]
fn expansion_rule_counts() {
    let topo = mlp(5, &[4, 6], 3);
    let all = expand_to_weight_mask(&NeuronMask::all_kept(&topo), &topo).unwrap();
    assert_eq!(all.zero_count(), 0);
    // Neuron 2 of the second hidden vector: 4 incoming, 1 bias, 3 outgoing.
    let mut layers = NeuronMask::all_kept(&topo).layers().to_vec();
    layers[1][2] = false;
    let wm = expand_to_weight_mask(&NeuronMask::new(layers), &topo).unwrap();
    assert_eq!(wm.zero_count(), 4 + 1 + 3);
    let mut twice = topo_params_ones(&topo);
    wm.apply(&mut twice);
    let once = twice.clone();
    wm.apply(&mut twice);
    assert_eq!(once, twice);
}

fn topo_params_ones(topo: &NetworkTopology) -> Vec<f64> {
    vec![1.0; topo.parameter_count()]
}

/// Copies the surviving rows and columns into a narrower network.
fn shrink(topo: &NetworkTopology, params: &ParameterStore, mask: &NeuronMask) -> (NetworkTopology, ParameterStore) {
    let widths: Vec<usize> = (0..mask.layers().len()).map(|k| mask.kept(k)).collect();
    let last = topo.layers().len() - 1;
    let small = NetworkTopology::mlp(
        topo.input_width(),
        &widths,
        topo.output_width(),
        topo.layers()[0].activation,
        topo.layers()[last].activation,
    )
    .unwrap();
    let mut out = ParameterStore::zeros(&small);
    let keep_in = |k: usize| -> Vec<usize> {
        if k == 0 {
            (0..topo.input_width()).collect()
        } else {
            mask.layers()[k - 1].iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect()
        }
    };
    for k in 0..topo.layers().len() {
        let rows: Vec<usize> = if k < mask.layers().len() {
            mask.layers()[k].iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect()
        } else {
            (0..topo.output_width()).collect()
        };
        let cols = keep_in(k);
        let (big_b, small_b) = (&topo.blocks()[k], &small.blocks()[k]);
        let big_in = topo.layers()[k].input_width;
        for (ri, &r) in rows.iter().enumerate() {
            for (ci, &c) in cols.iter().enumerate() {
                out.values_mut()[small_b.weight.start + ri * cols.len() + ci] =
                    params.values()[big_b.weight.start + r * big_in + c];
            }
            out.values_mut()[small_b.bias.start + ri] = params.values()[big_b.bias.start + r];
        }
    }
    (small, out)
}

#[test]
fn weight_masked_forward_equals_network_surgery() {
    let mut r = common::rng(3);
    for seed in 0..200u64 {
        let widths = [r.gen_range(2..9), r.gen_range(2..9)];
        let topo = NetworkTopology::mlp(4, &widths, 3, Activation::Tanh, Activation::Identity).unwrap();
        let mut params = init_parameters(&topo, seed);
        for v in params.values_mut() {
            *v += r.gen_range(-0.2..0.2);
        }
        let mask = generate_group_tickets(&topo, &schedule("0.5-0.5"), 1, seed).unwrap().masks[0].clone();
        let wm = expand_to_weight_mask(&mask, &topo).unwrap();
        let mut masked = params.clone();
        wm.apply(masked.values_mut());
        let (small, small_params) = shrink(&topo, &params, &mask);
        let x = common::random_vec(&mut r, 4, 1.0);
        let s = RecurrentState::initial(&topo);
        let a = forward(&masked, &topo, &x, &s, None).unwrap().output;
        let g = forward(&params, &topo, &x, &s, Some(&mask.gates())).unwrap().output;
        let b = forward(&small_params, &small, &x, &RecurrentState::initial(&small), None).unwrap().output;
        for ((a, b), g) in a.iter().zip(&b).zip(&g) {
            assert!((a - b).abs() < 1e-12 && (g - b).abs() < 1e-12);
        }
    }
}

#[test]
fn gru_unit_expansion_matches_gating_over_time() {
    let topo = NetworkTopology::new(vec![
        LayerSpec::dense(3, 6, Activation::Relu),
        LayerSpec::gru(6, 6),
        LayerSpec::dense(6, 4, Activation::Identity),
    ])
    .unwrap();
    let mut r = common::rng(8);
    for seed in 0..50u64 {
        let params = init_parameters(&topo, seed);
        let mask = generate_group_tickets(&topo, &schedule("0.5-0.5"), 1, seed).unwrap().masks[0].clone();
        let wm = expand_to_weight_mask(&mask, &topo).unwrap();
        let mut masked = params.clone();
        wm.apply(masked.values_mut());
        let gates = mask.gates();
        let (mut sa, mut sb) = (RecurrentState::initial(&topo), RecurrentState::initial(&topo));
        for _ in 0..4 {
            let x = common::random_vec(&mut r, 3, 1.0);
            let a = forward(&masked, &topo, &x, &sa, None).unwrap();
            let b = forward(&params, &topo, &x, &sb, Some(&gates)).unwrap();
            for (u, v) in a.output.iter().zip(&b.output) {
                assert!((u - v).abs() < 1e-12);
            }
            sa = a.state;
            sb = b.state;
        }
    }
}

#[test]
fn structured_zeros_are_attributable_but_unstructured_are_not() {
    let topo = mlp(8, &[8, 8], 2);
    let sched = schedule("0.25-0.25");
    let mut unstructured_violations = 0;
    for seed in 0..20 {
        let mask = generate_group_tickets(&topo, &sched, 1, seed).unwrap().masks[0].clone();
        let wm = expand_to_weight_mask(&mask, &topo).unwrap();
        // Every zero lies in a fully zeroed incoming row or outgoing column.
        for (k, b) in topo.blocks().iter().enumerate() {
            let i = topo.layers()[k].input_width;
            for idx in b.weight.clone().filter(|&x| wm.is_zero(x)) {
                let (row, col) = ((idx - b.weight.start) / i, (idx - b.weight.start) % i);
                let row_pruned = k < 2 && !mask.layers()[k][row];
                let col_pruned = k > 0 && !mask.layers()[k - 1][col];
                assert!(row_pruned || col_pruned);
            }
        }
        let um = &generate_unstructured_masks(&topo, &sched, 1, seed).unwrap()[0];
        let b = &topo.blocks()[0];
        let zero_rows = (0..8).filter(|r| (0..8).all(|c| um.is_zero(b.weight.start + r * 8 + c))).count();
        let zeros_in_layer = b.weight.clone().filter(|&x| um.is_zero(x)).count();
        if zeros_in_layer > zero_rows * 8 {
            unstructured_violations += 1;
        }
    }
    assert_eq!(unstructured_violations, 20);
}

#[test]
fn mask_file_rejects_garbage() {
    assert!(matches!(MaskFile::parse("not a mask file"), Err(Error::Format(_))));
}
