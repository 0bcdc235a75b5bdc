//! Scratch probe: per-category mean head scores of the vtr-sweep models.

use std::path::Path;

use ranklab::harness::{ExperimentConfig, Pipeline};
use ranklab::labels::Objective;
use ranklab::predictor::{load_model, Scorer, ModelScorer};
use ranklab::worldsim::{ItemId, UserId};

fn main() {
    let config_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/vtr_sweep.toml");
    let config = ExperimentConfig::load(&config_path).expect("config");
    let out = std::env::temp_dir().join("ranklab_vtr_sweep");
    let pipeline = Pipeline::new(config, out, 0);
    let world = pipeline.load_world().expect("world from previous run");

    for arm in ["vtr2", "vtr5", "vtr25"] {
        let model = load_model(&pipeline.model_path(arm)).expect("model");
        let scorer = ModelScorer {
            model: model.clone(),
            features: pipeline.config.features.clone(),
        };
        println!("== {arm} ==");
        for head in [Objective::Vtr, Objective::Cvr, Objective::Sdr] {
            print!("  {head:>4}: ");
            for cat in &world.categories {
                let mut sum = 0.0;
                let mut count = 0;
                for item in world.items.iter().filter(|i| i.category_id == cat.category_id) {
                    for uid in (0..world.users.len()).step_by(17) {
                        let fv = pipeline
                            .config
                            .features
                            .slot_features(
                                &world,
                                UserId(uid as u32),
                                item.item_id,
                                ranklab::features::FeatureContext::FStage {
                                    trigger: ItemId(0),
                                    position: 1,
                                },
                            )
                            .unwrap();
                        sum += model.predict_one(head, &fv).unwrap();
                        count += 1;
                    }
                }
                print!("{}={:.3} ", cat.name, sum / count as f64);
            }
            println!();
        }
        let _ = &scorer;
    }
}
