//! Behavioral-structure tables from the calibrated simulator.
//!
//! Simulates the full calibration population and prints:
//! * per-bucket Spearman correlation between slot conversion and view time
//!   (expected to strengthen bucket over bucket);
//! * session exit probability conditioned on conversion, per look-ahead
//!   window (exits should be far likelier right after a purchase).
//!
//! Run: `cargo run --release --example calibration_tables`

use std::time::Instant;

use ranklab::harness::{calibration_tables, ExperimentConfig, Pipeline};

fn main() {
    let config = ExperimentConfig::builtin_calibration();
    let pipeline = Pipeline::new(config, std::env::temp_dir().join("ranklab_calibration"), 0);
    let started = Instant::now();

    let world = pipeline.gen_world().expect("world generation");
    let policy = pipeline.resolve_policy("pointwise").expect("declared arm");
    let run = ranklab::worldsim::simulate_days(
        &world,
        &policy,
        world.day_count,
        pipeline.replicate_seeds()[0],
        &pipeline.day_params(),
    )
    .expect("simulation");

    let slots: usize = run
        .sessions
        .iter()
        .map(|s| s.exposed_slots().count())
        .sum();
    println!(
        "simulated {} sessions, {} exposed slots in {:.1?}",
        run.sessions.len(),
        slots,
        started.elapsed()
    );

    let (rho_table, exit_table) = calibration_tables(&run.sessions).expect("tables");

    println!("\nview-time bucket              slots  conversions  spearman rho");
    for row in &rho_table {
        let hi = row
            .hi
            .map(|h| format!("{h:>5.0}s"))
            .unwrap_or_else(|| "  inf".into());
        let rho = row
            .rho
            .map(|r| format!("{r:+.4}"))
            .unwrap_or_else(|| "undefined".into());
        println!(
            "  [{:>3.0}s, {hi})         {:>9}  {:>11}  {rho}",
            row.lo, row.slots, row.conversions
        );
    }

    println!("\nexit probability            not converted   converted");
    for row in &exit_table.rows {
        println!(
            "  within {} view(s)          {:>10.1}%  {:>10.1}%",
            row.within_pvs,
            row.p_exit_not_converted * 100.0,
            row.p_exit_converted * 100.0
        );
    }
}

