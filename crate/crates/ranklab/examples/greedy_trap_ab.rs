//! The greedy trap, twice: a two-item hand construction where point-wise
//! order provably loses sequence value, then a full paired A/B simulation
//! where beam-search re-ranking lifts purchases over point-wise ranking.
//!
//! Run: `cargo run --release --example greedy_trap_ab`

use std::path::Path;

use ranklab::harness::{ExperimentConfig, Pipeline};
use ranklab::metrics::t_critical_95_one_sided;
use ranklab::predictor::ObjectiveScores;
use ranklab::ranker::{rank_pointwise, EnsembleWeights};
use ranklab::reranker::{brute_force_best, sequence_value};
use ranklab::worldsim::ItemId;

fn toy_witness() {
    // Both items are worth 1; item 0 always ends the session, item 1 always
    // keeps it going. Point-wise ranking ties on value and leads with item 0,
    // wasting the second exposure.
    let candidates = vec![
        (ItemId(0), ObjectiveScores::feed(0.0, 1.0, 0.0)),
        (ItemId(1), ObjectiveScores::feed(0.0, 1.0, 1.0)),
    ];
    let weights = EnsembleWeights { w1: 0.0, w2: 1.0, w3: 0.0 };

    let pointwise: Vec<ItemId> = rank_pointwise(&candidates, &weights, 2)
        .unwrap()
        .into_iter()
        .map(|c| c.item_id)
        .collect();
    let pointwise_value = sequence_value(&pointwise, &candidates, &weights)
        .unwrap()
        .sequence_value;
    let best = brute_force_best(&candidates, 2, &weights, None).unwrap();

    println!("hand-built witness:");
    println!("  point-wise order {pointwise:?} -> V = {pointwise_value}");
    println!(
        "  best permutation {:?} -> V = {}",
        best.permutation, best.sequence_value
    );
    assert!(best.sequence_value > pointwise_value);
}

fn main() {
    toy_witness();

    let config_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/greedy_trap.toml");
    let config = ExperimentConfig::load(&config_path).expect("shipped config");
    let out = std::env::temp_dir().join("ranklab_greedy_trap");
    let pipeline = Pipeline::new(config, out, 0);

    println!("\npaired A/B over {} replicate seeds:", pipeline.replicate_seeds().len());
    let lift = pipeline.run_experiment("msc_on", "msc_off").expect("experiment");
    print!("{}", lift.render());

    let purchases = lift.metrics["purchases"].as_ref().expect("defined lift");
    let t_crit = t_critical_95_one_sided(purchases.replicates);
    println!(
        "purchase lift t = {:.2} (one-sided 95% critical value {:.3}), wins {}/{}",
        purchases.t_stat, t_crit, purchases.wins, purchases.replicates
    );
}
