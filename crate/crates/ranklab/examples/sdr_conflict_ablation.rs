//! Swipe-down objective ladder: none -> naive -> conflict-filtered.
//!
//! The naive swipe-down head learns that converters exit, so adding it to
//! the ensemble suppresses purchases. Zero-weighting the exit-after-purchase
//! samples (plus first-position selection) recovers purchases while keeping
//! the engagement gain.
//!
//! Run: `cargo run --release --example sdr_conflict_ablation`

use std::path::Path;

use ranklab::harness::{ExperimentConfig, Pipeline};
use ranklab::metrics::compare;

fn main() {
    let config_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/sdr_ladder.toml");
    let config = ExperimentConfig::load(&config_path).expect("shipped config");
    let out = std::env::temp_dir().join("ranklab_sdr_ladder");
    let pipeline = Pipeline::new(config, out, 0);

    let world = pipeline.gen_world().expect("world");
    for arm in ["no_sdr", "sdr_raw", "sdr_filtered"] {
        pipeline.ensure_arm_ready(arm, &world).expect("train arm");
    }

    let baseline = pipeline.reports_for_arm("no_sdr", &world).expect("simulate");
    let raw = pipeline.reports_for_arm("sdr_raw", &world).expect("simulate");
    let filtered = pipeline.reports_for_arm("sdr_filtered", &world).expect("simulate");

    for (name, reports) in [("sdr_raw", &raw), ("sdr_filtered", &filtered)] {
        let lift = compare(name, reports, "no_sdr", &baseline).expect("paired");
        print!("\n{}", lift.render());
    }
}
