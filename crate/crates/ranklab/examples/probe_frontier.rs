//! Scratch probe: (hit@1, hit@all, beam-25 min ratio) over config knobs.

use ranklab::harness::{hitrate_table, ExperimentConfig, Pipeline};
use ranklab::predictor::{ObjectiveScores, OracleScorer, Scorer};
use ranklab::ranker::EnsembleWeights;
use ranklab::reranker::{beam_search, brute_force_best, BeamConfig};
use ranklab::rng::{self, tag};
use ranklab::worldsim::{build_fstage_pool, generate_world, ItemId, SessionParams};

fn main() {
    let base = ExperimentConfig::builtin_calibration();
    for (w1, w3) in [(0.1, 0.05), (0.1, 0.15), (0.2, 0.1)] {
        for (q1, q0) in [(0.80, 0.35), (0.85, 0.40), (0.85, 0.45)] {
            let mut config = base.clone();
            config.weights = EnsembleWeights { w1, w2: 1.0, w3 };
            for (i, cat) in config.world.categories.iter_mut().enumerate() {
                if i < 2 {
                    cat.exit_after_conversion = q1 - 0.02 * i as f64;
                    cat.exit_without_conversion = q0 - 0.02 * i as f64;
                }
            }
            let world = generate_world(&config.world, config.world.seed).unwrap();
            let scorer = OracleScorer { vtr_threshold_seconds: 5.0 };
            let params = SessionParams {
                slate_len: 4,
                fpool_size: 8,
                fpool_same_category: config.sim.fpool_same_category,
            };
            let mut min_ratio: f64 = 1.0;
            for draw in 0..500u64 {
                let seed = rng::mix(505, &[tag::ORACLE, 6, draw]);
                let user = world.users
                    [(rng::mix(seed, &[1]) % world.users.len() as u64) as usize]
                    .user_id;
                let trigger =
                    ItemId((rng::mix(seed, &[2]) % world.items.len() as u64) as u32);
                let mut pool_rng = rng::stream(seed, &[tag::ORACLE, 3]);
                let pool = build_fstage_pool(&world, trigger, &params, &mut pool_rng).unwrap();
                let cands: Vec<(ItemId, ObjectiveScores)> = pool
                    .iter()
                    .map(|&item| (item, scorer.fstage(&world, user, item, trigger).unwrap()))
                    .collect();
                let brute = brute_force_best(&cands, 4, &config.weights, None).unwrap();
                let beam = beam_search(
                    &cands,
                    &BeamConfig { beam_width: 25, m: 4 },
                    &config.weights,
                )
                .unwrap();
                if brute.sequence_value > 0.0 {
                    min_ratio = min_ratio.min(beam.sequence_value / brute.sequence_value);
                }
            }

            let out = std::env::temp_dir().join("ranklab_probe_frontier");
            let _ = std::fs::remove_dir_all(&out);
            let pipeline = Pipeline::new(config, out, 0);
            let w = pipeline.gen_world().unwrap();
            let decisions = pipeline.rerank_batch("beam", &w).unwrap();
            let table = hitrate_table(&decisions, &[1]).unwrap();
            let hit1 = table[0].1;
            let hitall = table[1].1;
            println!(
                "w1={w1} w3={w3} q1={q1} q0={q0}: beam_min={min_ratio:.4} hit@1={hit1:.3} hit@all={hitall:.3}"
            );
        }
    }
}
