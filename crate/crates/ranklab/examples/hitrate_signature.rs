//! Set-vs-order decomposition of re-ranking decisions.
//!
//! For a batch of feed requests, compares the point-wise top-m against the
//! beam-search slate over the same candidates and reports hitrate@K. High
//! hit@all with much lower hit@1 means re-ranking mostly keeps the item set
//! and earns its value by permuting it.
//!
//! Run: `cargo run --release --example hitrate_signature`

use ranklab::harness::{hitrate_table, ExperimentConfig, Pipeline};

fn main() {
    let config = ExperimentConfig::builtin_calibration();
    let out = std::env::temp_dir().join("ranklab_hitrate");
    let pipeline = Pipeline::new(config, out, 0);

    let world = pipeline.gen_world().expect("world");
    let decisions = pipeline.rerank_batch("beam", &world).expect("decisions");
    let table = hitrate_table(&decisions, &[1, 3, 5]).expect("non-empty batch");

    println!("{} re-ranking decisions (beam vs point-wise):", decisions.len());
    for (name, value) in &table {
        println!("  {name:<8} {:.1}%", value * 100.0);
    }

    let reordered = decisions
        .iter()
        .filter(|d| d.hit_at_all == 1.0 && d.hit_at_1 == 0.0)
        .count();
    println!(
        "\nsame set, different lead item: {:.1}% of decisions",
        100.0 * reordered as f64 / decisions.len() as f64
    );
}
