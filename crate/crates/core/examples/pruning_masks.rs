//! Per-agent neuron masks: counts, overlap between agents, and the text file
//! format they are saved in.
//!
//! cargo run --example pruning_masks -- [schedule] [agents] [seed]

use snpps::netcore::{Activation, NetworkTopology};
use snpps::pruning::{expand_to_weight_mask, generate_group_tickets, mask_overlap_stats, MaskFile, PruningSchedule};

fn main() -> snpps::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let schedule: PruningSchedule = args.get(1).map_or("0-0.1-0.5", String::as_str).parse()?;
    let agents = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(7);

    let topo = NetworkTopology::mlp(75, &[128, 128, 128], 6, Activation::Relu, Activation::Identity)?;
    let group = generate_group_tickets(&topo, &schedule, agents, seed)?;
    for (i, m) in group.masks.iter().enumerate() {
        let kept: Vec<usize> = (0..m.layers().len()).map(|k| m.kept(k)).collect();
        println!("agent {i}: kept neurons per layer {kept:?}");
    }
    for (k, o) in mask_overlap_stats(&group).iter().enumerate() {
        if let (Some(mean), Some(min), Some(max)) = (o.mean_shared, o.min_shared, o.max_shared) {
            println!("layer {k}: pairwise shared neurons mean {mean:.1} (min {min}, max {max})");
        }
    }

    let weights = expand_to_weight_mask(&group.masks[0], &topo)?;
    println!("agent 0 weight mask zeroes {} of {} parameters", weights.zero_count(), topo.parameter_count());

    let file = MaskFile::from_group(topo.fingerprint(), &group);
    let text = file.to_text();
    println!("\n{}", text.lines().take(6).collect::<Vec<_>>().join("\n"));
    assert_eq!(MaskFile::parse(&text)?.group(), Some(group));
    Ok(())
}
