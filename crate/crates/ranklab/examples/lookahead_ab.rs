//! Cross-stage look-ahead A/B: homepage ranking by immediate conversion
//! alone versus immediate-plus-funnel value (click x entry x feed
//! conversion). With high-involvement categories present, look-ahead routes
//! clicks toward triggers whose feed sessions convert through comparison
//! browsing; in a homogeneous world the two rankings collapse together.
//!
//! Run: `cargo run --release --example lookahead_ab`

use std::path::Path;

use ranklab::harness::{ExperimentConfig, Pipeline};
use ranklab::metrics::t_critical_95_one_sided;

fn run(config_file: &str, label: &str) {
    let config_path = Path::new(env!("CARGO_MANIFEST_DIR")).join(config_file);
    let config = ExperimentConfig::load(&config_path).expect("shipped config");
    let out = std::env::temp_dir().join(format!("ranklab_{label}"));
    let pipeline = Pipeline::new(config, out, 0);

    println!("== {label} ==");
    let lift = pipeline
        .run_experiment("lookahead", "immediate")
        .expect("experiment");
    print!("{}", lift.render());
    let purchases = lift.metrics["purchases"].as_ref().expect("defined");
    println!(
        "purchases: t = {:.2} (95% one-sided critical {:.3}), wins {}/{}\n",
        purchases.t_stat,
        t_critical_95_one_sided(purchases.replicates),
        purchases.wins,
        purchases.replicates
    );
}

fn main() {
    run("configs/cross_stage.toml", "cross_stage");
    run("configs/cross_stage_null.toml", "cross_stage_null");
}
