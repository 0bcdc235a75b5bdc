//! Brute-force oracle suites.
//!
//! Each check pits a production code path against an independently coded
//! reference: pairwise AUC, rank-then-Pearson correlation, finite-difference
//! gradients, exhaustive permutation search, selection-sort top-K. The CLI's
//! `oracle-check` subcommand runs all of them and fails loudly on any
//! mismatch; the acceptance suite reuses the same functions.

use rand::Rng;

use crate::features::FeatureVector;
use crate::labels::{lookahead_cvr_label, Objective, SampleSource, TrainingSample};
use crate::predictor::{auc, head_gradient, head_loss, Head, ObjectiveScores};
use crate::ranker::{rank_estage, rank_pointwise, EnsembleWeights, RankingConfig};
use crate::reranker::{beam_search, brute_force_best, exposure_probs, sequence_value, BeamConfig};
use crate::rng::{self, tag};
use crate::worldsim::ItemId;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: true,
            detail,
        }
    }
    fn fail(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            detail,
        }
    }
}

fn random_scores(rng: &mut impl Rng) -> ObjectiveScores {
    ObjectiveScores::feed(rng.gen(), rng.gen(), rng.gen())
}

fn random_weights(rng: &mut impl Rng) -> EnsembleWeights {
    EnsembleWeights {
        w1: rng.gen::<f64>() * 1.5,
        w2: rng.gen::<f64>() * 1.5 + 0.01,
        w3: rng.gen::<f64>() * 1.5,
    }
}

/// AUC against the quadratic pairwise definition, 100 random instances.
pub fn check_auc_pairwise() -> CheckOutcome {
    const NAME: &str = "auc-vs-pairwise-oracle";
    let mut rng = rng::stream(101, &[tag::ORACLE, 1]);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = 200;
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            // Coarse grid forces score ties.
            scores.push((rng.gen::<f64>() * 20.0).round() / 20.0);
            labels.push(u8::from(rng.gen::<f64>() < 0.4));
            weights.push(if rng.gen::<f64>() < 0.1 { 0.0 } else { rng.gen::<f64>() });
        }
        if !labels.contains(&1) || !labels.contains(&0) {
            continue;
        }
        let fast = match auc(&scores, &labels, &weights) {
            Ok(v) => v,
            Err(e) => return CheckOutcome::fail(NAME, format!("case {case}: {e}")),
        };
        // Independent O(n^2) definition.
        let (mut num, mut wp, mut wn) = (0.0, 0.0, 0.0);
        for i in 0..n {
            if labels[i] == 1 {
                wp += weights[i];
            } else {
                wn += weights[i];
            }
        }
        for i in 0..n {
            if labels[i] != 1 {
                continue;
            }
            for j in 0..n {
                if labels[j] != 0 {
                    continue;
                }
                let credit = if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
                num += weights[i] * weights[j] * credit;
            }
        }
        let brute = num / (wp * wn);
        worst = worst.max((fast - brute).abs());
    }
    if worst < 1e-12 {
        CheckOutcome::pass(NAME, format!("max |fast - brute| = {worst:.2e}"))
    } else {
        CheckOutcome::fail(NAME, format!("max deviation {worst:.2e} exceeds 1e-12"))
    }
}

/// Analytic BCE gradient against central finite differences, 100 draws.
pub fn check_gradient_finite_difference() -> CheckOutcome {
    const NAME: &str = "bce-gradient-vs-finite-differences";
    let mut rng = rng::stream(33, &[tag::ORACLE, 2]);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let feature_ids: Vec<u32> = (0..6).map(|_| rng.gen_range(0..64u32)).collect();
        let mut head = Head::default();
        for &id in &feature_ids {
            head.weights.insert(id, rng.gen::<f64>() * 4.0 - 2.0);
        }
        head.bias = rng.gen::<f64>() * 2.0 - 1.0;
        let mut samples: Vec<TrainingSample> = Vec::with_capacity(5);
        for k in 0..5 {
            let mut pairs = Vec::new();
            for &id in &feature_ids {
                if rng.gen::<f64>() < 0.7 {
                    pairs.push((id, rng.gen::<f64>() + 0.1));
                }
            }
            samples.push(TrainingSample {
                objective: Objective::Cvr,
                features: FeatureVector::from_pairs(pairs),
                label: u8::from(rng.gen::<f64>() < 0.5),
                weight: 1.0,
                source: SampleSource {
                    user_id: k,
                    day: 1,
                    session_index: 0,
                    position: 1,
                },
            });
        }
        let refs: Vec<&TrainingSample> = samples.iter().collect();
        let l2 = if rng.gen::<f64>() < 0.5 { 0.0 } else { 0.05 };
        let (grad, grad_b) = head_gradient(&head, &refs, l2);
        let h = 1e-5;
        for (&id, &g) in &grad {
            let mut plus = head.clone();
            *plus.weights.entry(id).or_insert(0.0) += h;
            let mut minus = head.clone();
            *minus.weights.entry(id).or_insert(0.0) -= h;
            let fd = (head_loss(&plus, &refs, l2) - head_loss(&minus, &refs, l2)) / (2.0 * h);
            let rel = (fd - g).abs() / g.abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        let mut plus = head.clone();
        plus.bias += h;
        let mut minus = head.clone();
        minus.bias -= h;
        let fd_b = (head_loss(&plus, &refs, l2) - head_loss(&minus, &refs, l2)) / (2.0 * h);
        worst = worst.max((fd_b - grad_b).abs() / grad_b.abs().max(fd_b.abs()).max(1e-8));
    }
    if worst < 1e-5 {
        CheckOutcome::pass(NAME, format!("max relative error = {worst:.2e}"))
    } else {
        CheckOutcome::fail(NAME, format!("relative error {worst:.2e} exceeds 1e-5"))
    }
}

/// Spearman against an independently coded rank-then-Pearson oracle.
pub fn check_spearman_oracle() -> CheckOutcome {
    const NAME: &str = "spearman-vs-rank-pearson-oracle";
    let mut rng = rng::stream(55, &[tag::ORACLE, 3]);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = 50;
        // Half the cases use a coarse grid to force ties.
        let coarse = case % 2 == 0;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let x: f64 = rng.gen();
            if coarse {
                (x * 8.0).round()
            } else {
                x
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let fast = match crate::metrics::spearman_rho(&x, &y) {
            Ok(v) => v,
            Err(_) => continue, // constant vector draw; skip
        };
        let brute = oracle_spearman(&x, &y);
        worst = worst.max((fast - brute).abs());
    }
    if worst < 1e-12 {
        CheckOutcome::pass(NAME, format!("max |fast - oracle| = {worst:.2e}"))
    } else {
        CheckOutcome::fail(NAME, format!("max deviation {worst:.2e} exceeds 1e-12"))
    }
}

/// Independent two-step reference: counting-based average ranks, then a
/// covariance-formula Pearson.
fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let less = v.iter().filter(|&&b| b < a).count() as f64;
                let equal = v.iter().filter(|&&b| b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let rx = rank(x);
    let ry = rank(y);
    let n = rx.len() as f64;
    let sum_x: f64 = rx.iter().sum();
    let sum_y: f64 = ry.iter().sum();
    let sum_xy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let sum_x2: f64 = rx.iter().map(|a| a * a).sum();
    let sum_y2: f64 = ry.iter().map(|a| a * a).sum();
    let cov = sum_xy - sum_x * sum_y / n;
    let vx = sum_x2 - sum_x * sum_x / n;
    let vy = sum_y2 - sum_y * sum_y / n;
    cov / (vx * vy).sqrt()
}

/// Exposure-probability invariants on 10^4 random inputs.
pub fn check_exposure_invariants() -> CheckOutcome {
    const NAME: &str = "exposure-probs-invariants";
    let mut rng = rng::stream(77, &[tag::ORACLE, 4]);
    for case in 0..10_000 {
        let m = rng.gen_range(1..=10);
        let sdr: Vec<f64> = (0..m).map(|_| rng.gen()).collect();
        let p = match exposure_probs(&sdr) {
            Ok(p) => p,
            Err(e) => return CheckOutcome::fail(NAME, format!("case {case}: {e}")),
        };
        if p[0] != 1.0 {
            return CheckOutcome::fail(NAME, format!("case {case}: p[1] = {} != 1", p[0]));
        }
        if p.windows(2).any(|w| w[1] > w[0]) {
            return CheckOutcome::fail(NAME, format!("case {case}: p not non-increasing"));
        }
        // Cross-check against naive per-position products.
        for i in 0..p.len() {
            let direct: f64 = sdr[..i].iter().product();
            if (p[i] - direct).abs() > 1e-12 {
                return CheckOutcome::fail(NAME, format!("case {case}: cumprod mismatch"));
            }
        }
    }
    CheckOutcome::pass(NAME, "10000 random inputs".into())
}

fn random_candidates(rng: &mut impl Rng, n: usize) -> Vec<(ItemId, ObjectiveScores)> {
    (0..n as u32).map(|i| (ItemId(i), random_scores(rng))).collect()
}

/// Unpruned beam equals exhaustive search exactly, including tie-breaks.
pub fn check_beam_exhaustive_equivalence() -> CheckOutcome {
    const NAME: &str = "beam-unpruned-vs-brute-force";
    let mut rng = rng::stream(404, &[tag::ORACLE, 5]);
    let mut cases = 0;
    for n in 5..=8 {
        for m in 2..=4 {
            // Beam width >= the largest partial-sequence count = A_n^m.
            let width: usize = ((n - m + 1)..=n).product();
            for draw in 0..500 {
                let cands = random_candidates(&mut rng, n);
                let weights = random_weights(&mut rng);
                let brute = brute_force_best(&cands, m, &weights, None).expect("small space");
                let beam = beam_search(
                    &cands,
                    &BeamConfig {
                        beam_width: width,
                        m,
                    },
                    &weights,
                )
                .expect("valid beam");
                if (brute.sequence_value - beam.sequence_value).abs() > 1e-12 {
                    return CheckOutcome::fail(
                        NAME,
                        format!(
                            "n={n} m={m} draw={draw}: value {} vs {}",
                            beam.sequence_value, brute.sequence_value
                        ),
                    );
                }
                if brute.permutation != beam.permutation {
                    return CheckOutcome::fail(
                        NAME,
                        format!("n={n} m={m} draw={draw}: permutations differ"),
                    );
                }
                cases += 1;
            }
        }
    }
    CheckOutcome::pass(NAME, format!("{cases} draws exact"))
}

/// Beam quality at production width 25 on n=8, m=4 feed requests drawn from
/// the calibration world: real users, real triggers, candidate pools built
/// the same way the simulator builds them. The 0.98 floor is a harness
/// assertion confirmed empirically on this serving regime; fully adversarial
/// iid-uniform scores can dip to ~0.90 (see the beam_vs_exhaustive example).
pub fn check_beam_width25_quality() -> CheckOutcome {
    const NAME: &str = "beam-width-25-quality";
    use crate::predictor::{OracleScorer, Scorer};
    use crate::worldsim::{build_fstage_pool, SessionParams};
    let config = crate::harness::ExperimentConfig::builtin_calibration();
    let world = match crate::worldsim::generate_world(&config.world, config.world.seed) {
        Ok(w) => w,
        Err(e) => return CheckOutcome::fail(NAME, format!("calibration world: {e}")),
    };
    let scorer = OracleScorer {
        vtr_threshold_seconds: config.labels.vtr_threshold_seconds,
    };
    let params = SessionParams {
        slate_len: 4,
        fpool_size: 8,
        fpool_same_category: config.sim.fpool_same_category,
    };
    let weights = config.weights;
    let mut min_ratio: f64 = 1.0;
    for draw in 0..500u64 {
        let seed = rng::mix(505, &[tag::ORACLE, 6, draw]);
        let user =
            world.users[(rng::mix(seed, &[1]) % world.users.len() as u64) as usize].user_id;
        let trigger = ItemId((rng::mix(seed, &[2]) % world.items.len() as u64) as u32);
        let mut pool_rng = rng::stream(seed, &[tag::ORACLE, 3]);
        let pool = build_fstage_pool(&world, trigger, &params, &mut pool_rng)
            .expect("world ids valid");
        let cands: Vec<(ItemId, ObjectiveScores)> = pool
            .iter()
            .map(|&item| {
                let scores = scorer
                    .fstage(&world, user, item, trigger)
                    .expect("world ids valid");
                (item, scores)
            })
            .collect();
        let brute = brute_force_best(&cands, 4, &weights, None).expect("small space");
        let beam = beam_search(&cands, &BeamConfig { beam_width: 25, m: 4 }, &weights)
            .expect("valid beam");
        if brute.sequence_value > 0.0 {
            min_ratio = min_ratio.min(beam.sequence_value / brute.sequence_value);
        }
    }
    if min_ratio >= 0.98 {
        CheckOutcome::pass(NAME, format!("min beam/brute ratio = {min_ratio:.6}"))
    } else {
        CheckOutcome::fail(NAME, format!("min ratio {min_ratio:.6} below 0.98 floor"))
    }
}

/// Point-wise ranking against K rounds of exhaustive max-finding.
pub fn check_rank_pointwise_selection_oracle() -> CheckOutcome {
    const NAME: &str = "rank-pointwise-vs-selection-oracle";
    let mut rng = rng::stream(606, &[tag::ORACLE, 7]);
    for case in 0..100 {
        let cands = random_candidates(&mut rng, 20);
        let weights = random_weights(&mut rng);
        let k = rng.gen_range(1..=20);
        let fast: Vec<ItemId> = rank_pointwise(&cands, &weights, k)
            .expect("valid input")
            .into_iter()
            .map(|c| c.item_id)
            .collect();
        // Selection-sort oracle: repeatedly scan for the max remaining.
        let mut remaining: Vec<(ItemId, f64)> = cands
            .iter()
            .map(|(id, s)| (*id, crate::ranker::item_value(s, &weights)))
            .collect();
        let mut oracle = Vec::with_capacity(k);
        for _ in 0..k {
            let best = remaining
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0))
                })
                .map(|(i, _)| i)
                .expect("non-empty");
            oracle.push(remaining.remove(best).0);
        }
        if fast != oracle {
            return CheckOutcome::fail(NAME, format!("case {case}: order mismatch"));
        }
    }
    CheckOutcome::pass(NAME, "100 random instances".into())
}

/// Homepage composite ranking against exhaustive top-K comparison.
pub fn check_rank_estage_oracle() -> CheckOutcome {
    const NAME: &str = "rank-estage-vs-arg-topk-oracle";
    let mut rng = rng::stream(707, &[tag::ORACLE, 8]);
    for case in 0..100 {
        let n = 30;
        let cands: Vec<(ItemId, crate::predictor::EStageScores)> = (0..n as u32)
            .map(|i| {
                (
                    ItemId(i),
                    crate::predictor::EStageScores {
                        cvr: rng.gen::<f64>() * 0.3,
                        ctr: rng.gen(),
                        sdr_star: rng.gen(),
                        cvr_star: Some(rng.gen()),
                    },
                )
            })
            .collect();
        let config = RankingConfig {
            n,
            m: 5,
            k: 10,
            lookahead_enabled: true,
            lookahead_coefficient: rng.gen::<f64>() * 2.0,
        };
        let fast: Vec<ItemId> = rank_estage(&cands, &config)
            .expect("valid input")
            .into_iter()
            .map(|c| c.item_id)
            .collect();
        let mut scored: Vec<(f64, ItemId)> = cands
            .iter()
            .map(|(id, s)| {
                (
                    s.cvr + config.lookahead_coefficient * s.ctr * s.sdr_star * s.cvr_star.unwrap(),
                    *id,
                )
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        let oracle: Vec<ItemId> = scored.into_iter().take(config.k).map(|(_, id)| id).collect();
        if fast != oracle {
            return CheckOutcome::fail(NAME, format!("case {case}: top-K mismatch"));
        }
    }
    CheckOutcome::pass(NAME, "100 random instances".into())
}

/// Slate evaluation against a from-first-principles recomputation.
pub fn check_sequence_value_independent() -> CheckOutcome {
    const NAME: &str = "sequence-value-vs-independent-eval";
    let mut rng = rng::stream(808, &[tag::ORACLE, 9]);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let cands = random_candidates(&mut rng, 5);
        let weights = random_weights(&mut rng);
        let perm: Vec<ItemId> = {
            let mut ids: Vec<ItemId> = cands.iter().map(|(id, _)| *id).collect();
            for i in (1..ids.len()).rev() {
                let j = rng.gen_range(0..=i);
                ids.swap(i, j);
            }
            ids
        };
        let eval = sequence_value(&perm, &cands, &weights).expect("valid slate");
        // Independent evaluator: direct lookups, explicit products.
        let mut expected = 0.0;
        for (pos, id) in perm.iter().enumerate() {
            let mut exposure = 1.0;
            for prior in &perm[..pos] {
                let s = cands.iter().find(|(i, _)| i == prior).unwrap().1;
                exposure *= s.sdr;
            }
            let s = cands.iter().find(|(i, _)| i == id).unwrap().1;
            let v = weights.w1 * s.vtr + weights.w2 * s.cvr + weights.w3 * s.sdr;
            expected += exposure * v;
        }
        worst = worst.max((eval.sequence_value - expected).abs());
    }
    if worst < 1e-12 {
        CheckOutcome::pass(NAME, format!("max |fast - independent| = {worst:.2e}"))
    } else {
        CheckOutcome::fail(NAME, format!("max deviation {worst:.2e} exceeds 1e-12"))
    }
}

/// AUC-sum tuning objective against a hand pairwise computation on a small
/// validation set.
pub fn check_tune_objective_oracle() -> CheckOutcome {
    const NAME: &str = "tune-objective-vs-hand-auc-sum";
    let mut rng = rng::stream(909, &[tag::ORACLE, 10]);
    let mut validation = crate::tuner::ValidationSet::default();
    let mut rows: Vec<(Objective, ObjectiveScores, u8)> = Vec::new();
    for objective in [Objective::Vtr, Objective::Cvr, Objective::Sdr] {
        for k in 0..20 {
            let s = random_scores(&mut rng);
            let label = u8::from(k % 3 == 0);
            validation.insert(objective, s, label, 1.0);
            rows.push((objective, s, label));
        }
    }
    let weights = EnsembleWeights { w1: 0.5, w2: 1.0, w3: 0.25 };
    let fast = crate::tuner::tune_objective(&weights, &validation).expect("valid set");
    let mut brute = 0.0;
    for objective in [Objective::Vtr, Objective::Cvr, Objective::Sdr] {
        let subset: Vec<(f64, u8)> = rows
            .iter()
            .filter(|(o, _, _)| *o == objective)
            .map(|(_, s, y)| (weights.w1 * s.vtr + weights.w2 * s.cvr + weights.w3 * s.sdr, *y))
            .collect();
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (si, yi) in &subset {
            if *yi != 1 {
                continue;
            }
            for (sj, yj) in &subset {
                if *yj != 0 {
                    continue;
                }
                pairs += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
        brute += num / pairs;
    }
    if (fast - brute).abs() < 1e-12 {
        CheckOutcome::pass(NAME, format!("|fast - hand| = {:.2e}", (fast - brute).abs()))
    } else {
        CheckOutcome::fail(NAME, format!("{fast} vs hand-computed {brute}"))
    }
}

/// Mean look-ahead label equals the direct session-level conversion count.
pub fn check_lookahead_label_aggregation() -> CheckOutcome {
    const NAME: &str = "lookahead-label-vs-direct-count";
    use crate::worldsim::{
        generate_world, BehaviorParams, CategorySpec, Involvement, WorldConfig,
    };
    let config = WorldConfig {
        seed: 21,
        users: 40,
        day_count: 3,
        affinity_range: [0.1, 0.9],
        patience_range: [0.3, 0.8],
        return_propensity_range: [0.5, 0.9],
        behavior: BehaviorParams {
            estage_ctr_base: 0.3,
            estage_entry_base: 0.5,
            ..BehaviorParams::default()
        },
        categories: vec![CategorySpec {
            name: "c".into(),
            items: 12,
            involvement: Involvement::Standard,
            quality_range: [0.1, 0.9],
            base_cvr: 0.2,
            view_time_median_seconds: 4.0,
            view_time_sigma: 0.9,
            view_time_affinity_gain: 0.9,
            conversion_view_shift: 1.3,
            exit_after_conversion: 0.7,
            exit_without_conversion: 0.2,
            fstage_comparison_bonus: 0.0,
        }],
    };
    let world = generate_world(&config, 21).expect("valid config");
    let policy = crate::harness::PolicyBundle {
        name: "oracle".into(),
        scorer: crate::harness::PolicyScorer::Oracle(crate::predictor::OracleScorer {
            vtr_threshold_seconds: 5.0,
        }),
        weights: EnsembleWeights::DEFAULT,
        ranking: RankingConfig {
            n: 10,
            m: 4,
            k: 6,
            lookahead_enabled: false,
            lookahead_coefficient: 1.0,
        },
        beam: None,
        label_spec: crate::labels::LabelSpec::default(),
    };
    let params = crate::worldsim::DayParams {
        sessions_per_user: 2,
        estage_pool: 10,
        estage_list: 6,
        session: crate::worldsim::SessionParams {
            slate_len: 4,
            fpool_size: 10,
            fpool_same_category: 1.0,
        },
    };
    let run = simulate(&world, &policy, &params);
    let entered: Vec<&crate::worldsim::SessionLog> = run
        .iter()
        .filter(|s| s.estage_outcome.entered_fstage)
        .collect();
    if entered.is_empty() {
        return CheckOutcome::fail(NAME, "no feed sessions simulated".into());
    }
    let mean_label: f64 = entered
        .iter()
        .map(|s| lookahead_cvr_label(s) as f64)
        .sum::<f64>()
        / entered.len() as f64;
    let direct_rate = entered
        .iter()
        .filter(|s| s.exposed_slots().any(|x| x.converted))
        .count() as f64
        / entered.len() as f64;
    if (mean_label - direct_rate).abs() < 1e-15 {
        CheckOutcome::pass(
            NAME,
            format!("{} feed sessions, rate {mean_label:.4}", entered.len()),
        )
    } else {
        CheckOutcome::fail(NAME, format!("{mean_label} vs direct {direct_rate}"))
    }
}

fn simulate(
    world: &crate::worldsim::World,
    policy: &crate::harness::PolicyBundle,
    params: &crate::worldsim::DayParams,
) -> Vec<crate::worldsim::SessionLog> {
    crate::worldsim::simulate_days(world, policy, world.day_count, 5, params)
        .expect("simulation succeeds")
        .sessions
}

/// Label positive rates against ground-truth probability aggregates
/// (binomial 3-sigma bands).
pub fn check_label_rates_vs_truth() -> CheckOutcome {
    const NAME: &str = "label-rates-vs-true-score-aggregates";
    use crate::worldsim::{
        generate_world, true_scores, BehaviorParams, CategorySpec, Involvement, ScoreContext,
        WorldConfig,
    };
    let config = WorldConfig {
        seed: 31,
        users: 400,
        day_count: 6,
        affinity_range: [0.1, 0.9],
        patience_range: [0.3, 0.8],
        return_propensity_range: [0.6, 0.9],
        behavior: BehaviorParams {
            estage_ctr_base: 0.2,
            estage_entry_base: 0.4,
            ..BehaviorParams::default()
        },
        categories: vec![CategorySpec {
            name: "c".into(),
            items: 20,
            involvement: Involvement::Standard,
            quality_range: [0.1, 0.9],
            base_cvr: 0.1,
            view_time_median_seconds: 4.0,
            view_time_sigma: 0.9,
            view_time_affinity_gain: 0.9,
            conversion_view_shift: 1.3,
            exit_after_conversion: 0.7,
            exit_without_conversion: 0.2,
            fstage_comparison_bonus: 0.0,
        }],
    };
    let world = generate_world(&config, 31).expect("valid config");
    let policy = crate::harness::PolicyBundle {
        name: "oracle".into(),
        scorer: crate::harness::PolicyScorer::Oracle(crate::predictor::OracleScorer {
            vtr_threshold_seconds: 5.0,
        }),
        weights: EnsembleWeights::DEFAULT,
        ranking: RankingConfig {
            n: 12,
            m: 5,
            k: 8,
            lookahead_enabled: false,
            lookahead_coefficient: 1.0,
        },
        beam: None,
        label_spec: crate::labels::LabelSpec::default(),
    };
    let params = crate::worldsim::DayParams {
        sessions_per_user: 3,
        estage_pool: 12,
        estage_list: 8,
        session: crate::worldsim::SessionParams {
            slate_len: 5,
            fpool_size: 12,
            fpool_same_category: 1.0,
        },
    };
    let sessions = simulate(&world, &policy, &params);

    // Walk sessions replaying the bonus context; accumulate per-check
    // (sum label, sum p, sum p(1-p)).
    let mut agg: std::collections::BTreeMap<&str, (f64, f64, f64)> = Default::default();
    let mut add = |key: &'static str, label: f64, p: f64| {
        let e = agg.entry(key).or_insert((0.0, 0.0, 0.0));
        e.0 += label;
        e.1 += p;
        e.2 += p * (1.0 - p);
    };
    for s in &sessions {
        let user = world.user(s.user_id).unwrap();
        for &item in &s.estage_outcome.impressions {
            let t = true_scores(&world, user, item, ScoreContext::default()).unwrap();
            let clicked = Some(item) == s.trigger_item_id;
            add("ctr", clicked as u8 as f64, t.ctr);
        }
        let Some(trigger) = s.trigger_item_id else { continue };
        let t = true_scores(&world, user, trigger, ScoreContext::default()).unwrap();
        add(
            "sdr_star",
            s.estage_outcome.entered_fstage as u8 as f64,
            t.sdr_star,
        );
        let mut views: std::collections::BTreeMap<u16, u32> = Default::default();
        views.insert(world.item(trigger).unwrap().category_id.0, 1);
        for slot in s.exposed_slots() {
            let item = world.item(slot.item_id).unwrap();
            let count = *views.get(&item.category_id.0).unwrap_or(&0);
            let t = true_scores(
                &world,
                user,
                slot.item_id,
                ScoreContext {
                    comparison_count: count,
                },
            )
            .unwrap();
            add("cvr", slot.converted as u8 as f64, t.cvr);
            add("vtr", (slot.view_time_seconds > 5.0) as u8 as f64, t.vtr(5.0));
            add("sdr", slot.swiped_down as u8 as f64, t.sdr);
            *views.entry(item.category_id.0).or_insert(0) += 1;
        }
    }
    for (key, (observed, expected, variance)) in agg {
        let sigma = variance.sqrt().max(1e-9);
        let z = (observed - expected).abs() / sigma;
        if z > 3.0 {
            return CheckOutcome::fail(
                NAME,
                format!("{key}: observed {observed:.1} vs expected {expected:.1} (z = {z:.2})"),
            );
        }
    }
    CheckOutcome::pass(NAME, format!("{} sessions, all objectives within 3 sigma", sessions.len()))
}

/// Distinct seeds produce distinct worlds (100 adjacent pairs).
pub fn check_world_seed_distinctness() -> CheckOutcome {
    const NAME: &str = "world-seed-distinctness";
    use crate::worldsim::{generate_world, BehaviorParams, CategorySpec, Involvement, WorldConfig};
    let config = WorldConfig {
        seed: 0,
        users: 3,
        day_count: 1,
        affinity_range: [0.0, 1.0],
        patience_range: [0.0, 1.0],
        return_propensity_range: [0.0, 1.0],
        behavior: BehaviorParams::default(),
        categories: vec![CategorySpec {
            name: "c".into(),
            items: 4,
            involvement: Involvement::Standard,
            quality_range: [0.0, 1.0],
            base_cvr: 0.1,
            view_time_median_seconds: 4.0,
            view_time_sigma: 0.9,
            view_time_affinity_gain: 0.9,
            conversion_view_shift: 1.3,
            exit_after_conversion: 0.7,
            exit_without_conversion: 0.2,
            fstage_comparison_bonus: 0.0,
        }],
    };
    for s in 0..100u64 {
        let a = serde_json::to_string(&generate_world(&config, s).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_world(&config, s + 1).unwrap()).unwrap();
        if a == b {
            return CheckOutcome::fail(NAME, format!("seeds {s} and {} collide", s + 1));
        }
    }
    CheckOutcome::pass(NAME, "100 adjacent seed pairs distinct".into())
}

/// Run every oracle suite.
pub fn all_checks() -> Vec<CheckOutcome> {
    vec![
        check_auc_pairwise(),
        check_gradient_finite_difference(),
        check_spearman_oracle(),
        check_exposure_invariants(),
        check_beam_exhaustive_equivalence(),
        check_beam_width25_quality(),
        check_rank_pointwise_selection_oracle(),
        check_rank_estage_oracle(),
        check_sequence_value_independent(),
        check_tune_objective_oracle(),
        check_lookahead_label_aggregation(),
        check_label_rates_vs_truth(),
        check_world_seed_distinctness(),
    ]
}
