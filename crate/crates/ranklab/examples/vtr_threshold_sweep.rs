//! View-through threshold sweep: trains one view head per binarization
//! threshold (2s / 5s / 25s), ranks with each, and reports lifts against the
//! 25-second arm. Lower thresholds chase cheap attention: valid views climb
//! while purchases sag.
//!
//! Run: `cargo run --release --example vtr_threshold_sweep`

use std::path::Path;

use ranklab::harness::{ExperimentConfig, Pipeline};
use ranklab::metrics::compare;

fn main() {
    let config_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/vtr_sweep.toml");
    let config = ExperimentConfig::load(&config_path).expect("shipped config");
    let out = std::env::temp_dir().join("ranklab_vtr_sweep");
    let pipeline = Pipeline::new(config, out, 0);

    let world = pipeline.gen_world().expect("world");
    for arm in ["vtr2", "vtr5", "vtr25"] {
        pipeline.ensure_arm_ready(arm, &world).expect("train arm");
    }

    let reports2 = pipeline.reports_for_arm("vtr2", &world).expect("simulate vtr2");
    let reports5 = pipeline.reports_for_arm("vtr5", &world).expect("simulate vtr5");
    let reports25 = pipeline.reports_for_arm("vtr25", &world).expect("simulate vtr25");

    for (name, reports) in [("vtr2", &reports2), ("vtr5", &reports5)] {
        let lift = compare(name, reports, "vtr25", &reports25).expect("paired reports");
        print!("\n{}", lift.render());
    }

    let mean = |rs: &[ranklab::metrics::MetricReport], f: fn(&ranklab::metrics::MetricReport) -> f64| {
        rs.iter().map(f).sum::<f64>() / rs.len() as f64
    };
    println!("\narm      mean ipv_f   mean purchases");
    for (name, rs) in [("vtr2", &reports2), ("vtr5", &reports5), ("vtr25", &reports25)] {
        println!(
            "{name:<8} {:>10.1} {:>16.1}",
            mean(rs, |r| r.ipv_f as f64),
            mean(rs, |r| r.purchases as f64)
        );
    }
}
