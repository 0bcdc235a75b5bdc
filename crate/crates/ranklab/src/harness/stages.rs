//! File-based pipeline stages.
//!
//! Every stage reads the config plus prior artifacts from the output
//! directory and (re)writes its own artifact deterministically, so reruns
//! with unchanged inputs are byte-identical and any stage can be inspected
//! or repeated in isolation. Arms never read each other's outputs.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{build_training_set, LabelSpec, TrainingSample};
use crate::metrics::{
    self, compare, hitrate_at_k, session_metrics, LiftTable, MetricReport,
};
use crate::predictor::{
    load_model, save_model, train_traced, ModelFormat, ModelScorer, OracleScorer, PredictorModel,
    Scorer,
};
use crate::reranker::BeamConfig;
use crate::rng::{self, tag};
use crate::tuner::{tune, TuneResult, ValidationSet};
use crate::worldsim::{
    build_fstage_pool, generate_world, simulate_days, DayParams, ItemId, SessionLog,
    SessionParams, World,
};

use super::{
    ArmConfig, ExperimentConfig, PersistSessions, PolicyBundle, PolicyScorer, RerankMode,
    ScorerKind,
};

/// Reserved arm name for the exploration traffic that feeds training/tuning.
pub const BOOTSTRAP_ARM: &str = "bootstrap";

pub struct Pipeline {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub seed_offset: u64,
    /// Set once the bootstrap traffic has been (re)generated by this
    /// process; prevents silently reusing a stale file from another config.
    bootstrap_fresh: std::cell::OnceCell<()>,
}

// --- jsonl helpers ---------------------------------------------------------

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line)?);
    }
    Ok(rows)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

// --- decision logs ----------------------------------------------------------

/// One re-ranking decision: the pointwise order and the beam slate over the
/// same request, plus their prefix agreements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RerankDecision {
    pub v: u32,
    pub request: usize,
    pub user_id: u32,
    pub trigger_item_id: u32,
    pub pointwise: Vec<ItemId>,
    pub reranked: Vec<ItemId>,
    pub hit_at_1: f64,
    pub hit_at_all: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneArtifact {
    pub arm: String,
    pub result: TuneResult,
}

impl Pipeline {
    pub fn new(config: ExperimentConfig, out: impl Into<PathBuf>, seed_offset: u64) -> Self {
        Self {
            config,
            out: out.into(),
            seed_offset,
            bootstrap_fresh: std::cell::OnceCell::new(),
        }
    }

    // --- paths ---------------------------------------------------------

    pub fn world_path(&self) -> PathBuf {
        self.out.join("world.json")
    }
    pub fn bootstrap_sessions_path(&self) -> PathBuf {
        self.out.join("bootstrap").join("sessions.jsonl")
    }
    pub fn labels_path(&self, arm: &str) -> PathBuf {
        self.out.join("labels").join(format!("{arm}.labels.jsonl"))
    }
    pub fn model_path(&self, arm: &str) -> PathBuf {
        self.out.join("models").join(format!("{arm}.model.json"))
    }
    pub fn train_metrics_path(&self, arm: &str) -> PathBuf {
        self.out.join("models").join(format!("{arm}.train.jsonl"))
    }
    pub fn sessions_path(&self, arm: &str, replicate_seed: u64) -> PathBuf {
        self.out
            .join("arms")
            .join(arm)
            .join(format!("sessions-r{replicate_seed}.jsonl"))
    }
    pub fn report_path(&self, arm: &str) -> PathBuf {
        self.out.join("reports").join(format!("{arm}.report.json"))
    }
    pub fn lift_path(&self, arm_a: &str, arm_b: &str) -> PathBuf {
        self.out
            .join("reports")
            .join(format!("lift-{arm_a}-vs-{arm_b}.json"))
    }
    pub fn tune_trace_path(&self, arm: &str) -> PathBuf {
        self.out.join("tune").join(format!("{arm}.trace.jsonl"))
    }
    pub fn tune_result_path(&self, arm: &str) -> PathBuf {
        self.out.join("tune").join(format!("{arm}.result.json"))
    }
    pub fn ranks_path(&self, arm: &str) -> PathBuf {
        self.out.join("decisions").join(format!("{arm}.ranks.jsonl"))
    }
    pub fn slates_path(&self, arm: &str) -> PathBuf {
        self.out.join("decisions").join(format!("{arm}.slates.jsonl"))
    }

    pub fn replicate_seeds(&self) -> Vec<u64> {
        self.config
            .experiment
            .replicate_seeds
            .iter()
            .map(|s| s + self.seed_offset)
            .collect()
    }

    /// Simulation geometry assembled from the config's ranking and sim
    /// sections.
    pub fn day_params(&self) -> DayParams {
        DayParams {
            sessions_per_user: self.config.sim.sessions_per_user,
            estage_pool: self.config.ranking.n,
            estage_list: self.config.ranking.k,
            session: SessionParams {
                slate_len: self.config.ranking.m,
                fpool_size: self.config.ranking.n,
                fpool_same_category: self.config.sim.fpool_same_category,
            },
        }
    }

    fn eval_days(&self) -> u32 {
        self.config
            .experiment
            .eval_days
            .unwrap_or(self.config.world.day_count)
    }

    // --- stage: gen-world ------------------------------------------------

    pub fn gen_world(&self) -> Result<World> {
        let world = generate_world(&self.config.world, self.config.world.seed)?;
        write_json(&self.world_path(), &world)?;
        Ok(world)
    }

    pub fn load_world(&self) -> Result<World> {
        let path = self.world_path();
        if !path.exists() {
            return Err(Error::Dependency("gen-world".into()));
        }
        let world: World = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        world.validate()?;
        Ok(world)
    }

    // --- policies ---------------------------------------------------------

    /// Assemble a policy bundle for a declared arm, loading its model when
    /// the arm is trained.
    pub fn resolve_policy(&self, name: &str) -> Result<PolicyBundle> {
        let arm = self.config.arm(name)?.clone();
        self.policy_from_parts(name, &arm)
    }

    fn policy_from_parts(&self, name: &str, arm: &ArmConfig) -> Result<PolicyBundle> {
        let label_spec = self.config.arm_label_spec(arm);
        let ranking = self.config.arm_ranking(arm);
        let weights = self.config.arm_weights(arm);
        let scorer = match arm.scorer {
            ScorerKind::Oracle => PolicyScorer::Oracle(OracleScorer {
                vtr_threshold_seconds: label_spec.vtr_threshold_seconds,
            }),
            ScorerKind::Random => PolicyScorer::Random {
                salt: rng::mix(self.config.experiment.bootstrap_seed, &[tag::SESSION]),
            },
            ScorerKind::Trained => {
                let path = self.model_path(name);
                if !path.exists() {
                    return Err(Error::Dependency("train".into()));
                }
                PolicyScorer::Model(Box::new(ModelScorer {
                    model: load_model(&path)?,
                    features: self.config.features.clone(),
                }))
            }
        };
        Ok(PolicyBundle {
            name: name.to_string(),
            scorer,
            weights,
            ranking,
            beam: match arm.rerank {
                RerankMode::Beam => Some(BeamConfig {
                    beam_width: self.config.beam.beam_width,
                    m: ranking.m,
                }),
                RerankMode::Pointwise => None,
            },
            label_spec,
        })
    }

    fn bootstrap_policy(&self) -> PolicyBundle {
        let arm = ArmConfig {
            scorer: self.config.experiment.bootstrap_policy,
            rerank: RerankMode::Pointwise,
            lookahead: Some(false),
            lookahead_coefficient: None,
            weights: None,
            vtr_threshold_seconds: None,
            sdr_mode: None,
            sdr_conflict_filter: None,
        };
        self.policy_from_parts(BOOTSTRAP_ARM, &arm)
            .expect("bootstrap policy needs no artifacts")
    }

    // --- stage: simulate ---------------------------------------------------

    /// Simulate exploration traffic used for training and tuning.
    pub fn simulate_bootstrap(&self, world: &World) -> Result<Vec<SessionLog>> {
        let policy = self.bootstrap_policy();
        let run = simulate_days(
            world,
            &policy,
            self.config.experiment.bootstrap_days.min(world.day_count),
            self.config.experiment.bootstrap_seed,
            &self.day_params(),
        )?;
        write_jsonl(&self.bootstrap_sessions_path(), &run.sessions)?;
        Ok(run.sessions)
    }

    pub fn load_bootstrap(&self) -> Result<Vec<SessionLog>> {
        let path = self.bootstrap_sessions_path();
        if !path.exists() {
            return Err(Error::Dependency(format!("simulate --arm {BOOTSTRAP_ARM}")));
        }
        read_jsonl(&path)
    }

    /// Simulate one arm over every replicate seed; persists sessions per the
    /// persistence policy and returns the per-replicate logs.
    pub fn simulate_arm(&self, name: &str, world: &World) -> Result<Vec<Vec<SessionLog>>> {
        if name == BOOTSTRAP_ARM {
            return self.simulate_bootstrap(world).map(|s| vec![s]);
        }
        let policy = self.resolve_policy(name)?;
        let days = self.eval_days();
        let params = self.day_params();
        let mut replicates = Vec::new();
        for (i, seed) in self.replicate_seeds().iter().enumerate() {
            let run = simulate_days(world, &policy, days, *seed, &params)?;
            let persist = match self.config.experiment.persist_sessions {
                PersistSessions::All => true,
                PersistSessions::First => i == 0,
                PersistSessions::None => false,
            };
            if persist {
                write_jsonl(&self.sessions_path(name, *seed), &run.sessions)?;
            }
            replicates.push(run.sessions);
        }
        Ok(replicates)
    }

    // --- stage: build-labels ------------------------------------------------

    pub fn build_labels(&self, name: &str, world: &World) -> Result<Vec<TrainingSample>> {
        let arm = self.config.arm(name)?;
        let spec = self.config.arm_label_spec(arm);
        let sessions = self.load_bootstrap()?;
        let samples = build_training_set(world, &sessions, &spec, &self.config.features)?;
        write_jsonl(&self.labels_path(name), &samples)?;
        Ok(samples)
    }

    pub fn load_labels(&self, name: &str) -> Result<Vec<TrainingSample>> {
        let path = self.labels_path(name);
        if !path.exists() {
            return Err(Error::Dependency("build-labels".into()));
        }
        read_jsonl(&path)
    }

    // --- stage: train ---------------------------------------------------------

    pub fn train_arm(&self, name: &str) -> Result<PredictorModel> {
        let samples = self.load_labels(name)?;
        let (model, epochs) =
            train_traced(&samples, &self.config.train, self.config.train.seed)?;
        save_model(&model, &self.model_path(name), ModelFormat::Json)?;
        write_jsonl(&self.train_metrics_path(name), &epochs)?;
        Ok(model)
    }

    /// Make sure a trained arm has its model on disk, regenerating upstream
    /// artifacts as needed. No-op for oracle/random arms. Bootstrap traffic
    /// is re-simulated the first time any arm needs it in this process, so
    /// a config change can never train against a stale session file.
    pub fn ensure_arm_ready(&self, name: &str, world: &World) -> Result<()> {
        let arm = self.config.arm(name)?;
        if arm.scorer != ScorerKind::Trained {
            return Ok(());
        }
        if self.bootstrap_fresh.get().is_none() {
            self.simulate_bootstrap(world)?;
            let _ = self.bootstrap_fresh.set(());
        }
        self.build_labels(name, world)?;
        self.train_arm(name)?;
        Ok(())
    }

    // --- stage: tune -----------------------------------------------------------

    /// Build a validation set from fresh exploration traffic scored by the
    /// arm's scorer, then search the ensemble weights.
    pub fn tune_arm(&self, name: &str, world: &World) -> Result<TuneArtifact> {
        let spec = self
            .config
            .tune
            .clone()
            .ok_or_else(|| Error::Config("config has no [tune] section".into()))?;
        let policy = self.resolve_policy(name)?;
        let scorer: &dyn Scorer = match &policy.scorer {
            PolicyScorer::Oracle(s) => s,
            PolicyScorer::Model(s) => s.as_ref(),
            PolicyScorer::Random { .. } => {
                return Err(Error::Config(format!(
                    "arm `{name}` has no scores to tune (random scorer)"
                )))
            }
        };

        let bootstrap = self.bootstrap_policy();
        let run = simulate_days(
            world,
            &bootstrap,
            self.config.experiment.bootstrap_days.min(world.day_count),
            self.config.experiment.bootstrap_seed.wrapping_add(1),
            &self.day_params(),
        )?;
        let validation =
            validation_from_sessions(world, &run.sessions, scorer, &policy.label_spec)?;
        let result = tune(&spec, &validation)?;
        write_jsonl(&self.tune_trace_path(name), &result.trace)?;
        let artifact = TuneArtifact {
            arm: name.to_string(),
            result,
        };
        write_json(&self.tune_result_path(name), &artifact)?;
        Ok(artifact)
    }

    // --- stage: rank / rerank -----------------------------------------------

    /// Deterministically sampled feed requests for decision analyses.
    fn sample_requests(&self, world: &World, count: usize) -> Vec<(u32, ItemId)> {
        let mut out = Vec::with_capacity(count);
        let mut i = 0u64;
        while out.len() < count {
            let user = (rng::mix(world.seed, &[11, i]) % world.users.len() as u64) as u32;
            let item = (rng::mix(world.seed, &[13, i]) % world.items.len() as u64) as u32;
            // Skip triggers whose category cannot fill a slate.
            let cat = world.items[item as usize].category_id;
            let in_cat = world.items.iter().filter(|x| x.category_id == cat).count();
            if in_cat > self.config.ranking.m {
                out.push((user, ItemId(item)));
            }
            i += 1;
        }
        out
    }

    /// Homepage ranking decisions for one arm.
    pub fn rank_batch(&self, name: &str, world: &World) -> Result<usize> {
        let policy = self.resolve_policy(name)?;
        let mut rows = Vec::new();
        for (req, (user, _)) in self
            .sample_requests(world, self.config.experiment.requests)
            .into_iter()
            .enumerate()
        {
            let profile = &world.users[user as usize];
            let mut r = rng::stream(world.seed, &[tag::ORACLE, 17, req as u64]);
            let mut corpus: Vec<ItemId> = world.items.iter().map(|i| i.item_id).collect();
            let (picked, _) = rand::seq::SliceRandom::partial_shuffle(
                corpus.as_mut_slice(),
                &mut r,
                self.config.ranking.n,
            );
            let pool = picked.to_vec();
            let ranked = crate::worldsim::SessionPolicy::rank_estage(&policy, world, profile, &pool)?;
            rows.push(serde_json::json!({
                "v": 1,
                "request": req,
                "user_id": user,
                "pool": pool,
                "ranked": ranked,
            }));
        }
        write_jsonl(&self.ranks_path(name), &rows)?;
        Ok(rows.len())
    }

    /// Feed re-ranking decisions (pointwise vs beam) for one arm.
    pub fn rerank_batch(&self, name: &str, world: &World) -> Result<Vec<RerankDecision>> {
        let policy = self.resolve_policy(name)?;
        let beam = BeamConfig {
            beam_width: self.config.beam.beam_width,
            m: self.config.ranking.m,
        };
        let pointwise_policy = PolicyBundle {
            beam: None,
            ..self.rebundle(&policy)?
        };
        let beam_policy = PolicyBundle {
            beam: Some(beam),
            ..self.rebundle(&policy)?
        };

        let mut rows = Vec::new();
        for (req, (user, trigger)) in self
            .sample_requests(world, self.config.experiment.requests)
            .into_iter()
            .enumerate()
        {
            let mut r = rng::stream(world.seed, &[tag::ORACLE, 19, req as u64]);
            let pool = build_fstage_pool(
                world,
                trigger,
                &self.day_params().session,
                &mut r,
            )?;
            let uid = crate::worldsim::UserId(user);
            let pointwise = pointwise_policy.fstage_slate(world, uid, trigger, &pool)?;
            let reranked = beam_policy.fstage_slate(world, uid, trigger, &pool)?;
            let m = pointwise.len();
            rows.push(RerankDecision {
                v: 1,
                request: req,
                user_id: user,
                trigger_item_id: trigger.0,
                hit_at_1: hitrate_at_k(&reranked, &pointwise, 1)?,
                hit_at_all: hitrate_at_k(&reranked, &pointwise, m)?,
                pointwise,
                reranked,
            });
        }
        write_jsonl(&self.slates_path(name), &rows)?;
        Ok(rows)
    }

    /// Clone a resolved policy (model scorers reload from disk).
    fn rebundle(&self, policy: &PolicyBundle) -> Result<PolicyBundle> {
        self.resolve_policy(&policy.name)
    }

    // --- stage: report ---------------------------------------------------------

    /// Per-replicate reports for one arm, simulated fresh (in-memory) so the
    /// report never depends on which replicates were persisted.
    pub fn reports_for_arm(&self, name: &str, world: &World) -> Result<Vec<MetricReport>> {
        let replicates = self.simulate_arm(name, world)?;
        let reports: Result<Vec<MetricReport>> = replicates
            .iter()
            .map(|sessions| session_metrics(sessions, world))
            .collect();
        let reports = reports?;
        write_json(&self.report_path(name), &reports)?;
        Ok(reports)
    }

    /// Recount persisted session files for an arm (the independent path used
    /// by `report` when sessions exist on disk).
    pub fn reports_from_disk(&self, name: &str, world: &World) -> Result<Vec<MetricReport>> {
        let mut reports = Vec::new();
        for seed in self.replicate_seeds() {
            let path = self.sessions_path(name, seed);
            if !path.exists() {
                continue;
            }
            let sessions: Vec<SessionLog> = read_jsonl(&path)?;
            reports.push(session_metrics(&sessions, world)?);
        }
        if reports.is_empty() {
            return Err(Error::Dependency("simulate".into()));
        }
        Ok(reports)
    }

    /// Full paired A/B run: common replicate seeds, per-arm reports, lift
    /// table with paired confidence intervals.
    pub fn run_experiment(&self, arm_a: &str, arm_b: &str) -> Result<LiftTable> {
        self.config.arm(arm_a)?;
        self.config.arm(arm_b)?;
        let world = self.gen_world()?;
        self.ensure_arm_ready(arm_a, &world)?;
        self.ensure_arm_ready(arm_b, &world)?;
        let reports_a = self.reports_for_arm(arm_a, &world)?;
        let reports_b = self.reports_for_arm(arm_b, &world)?;
        let lift = compare(arm_a, &reports_a, arm_b, &reports_b)?;
        write_json(&self.lift_path(arm_a, arm_b), &lift)?;
        let text = lift.render();
        fs::write(
            self.lift_path(arm_a, arm_b).with_extension("txt"),
            &text,
        )?;
        Ok(lift)
    }

    /// Report stage over everything configured: per-arm reports from disk
    /// when present, plus lift tables for each declared comparison.
    pub fn report_all(&self) -> Result<Vec<LiftTable>> {
        let world = self.load_world()?;
        let mut tables = Vec::new();
        for [a, b] in &self.config.experiment.comparisons {
            let ra = self.reports_from_disk(a, &world).or_else(|_| self.reports_for_arm(a, &world))?;
            let rb = self.reports_from_disk(b, &world).or_else(|_| self.reports_for_arm(b, &world))?;
            let lift = compare(a, &ra, b, &rb)?;
            write_json(&self.lift_path(a, b), &lift)?;
            tables.push(lift);
        }
        if tables.is_empty() {
            return Err(Error::Config(
                "no [experiment] comparisons declared; nothing to report".into(),
            ));
        }
        Ok(tables)
    }
}

/// Build a tuning validation set from sessions: each exposed slot yields one
/// row per feed objective, scored by `scorer` and labeled/weighted per the
/// label spec.
pub fn validation_from_sessions(
    world: &World,
    sessions: &[SessionLog],
    scorer: &dyn Scorer,
    spec: &LabelSpec,
) -> Result<ValidationSet> {
    use crate::labels::{binarize_vtr, Objective, VtrThreshold};
    let threshold = VtrThreshold(spec.vtr_threshold_seconds);
    let mut set = ValidationSet::default();
    for s in sessions {
        let Some(trigger) = s.trigger_item_id else { continue };
        if !s.estage_outcome.entered_fstage {
            continue;
        }
        for slot in s.exposed_slots() {
            let scores = scorer.fstage(world, s.user_id, slot.item_id, trigger)?;
            set.insert(Objective::Cvr, scores, slot.converted as u8, 1.0);
            set.insert(
                Objective::Vtr,
                scores,
                binarize_vtr(slot.view_time_seconds, threshold)?,
                1.0,
            );
            let sdr_weight = if spec.sdr_conflict_filter && !slot.swiped_down && slot.converted {
                0.0
            } else {
                1.0
            };
            if spec.sdr_mode == crate::labels::SdrSampleMode::FirstPositionOnly
                && slot.position != 1
            {
                continue;
            }
            set.insert(Objective::Sdr, scores, slot.swiped_down as u8, sdr_weight);
        }
    }
    Ok(set)
}

/// Aggregate hitrate table over re-ranking decisions at the given cuts.
pub fn hitrate_table(decisions: &[RerankDecision], cuts: &[usize]) -> Result<Vec<(String, f64)>> {
    if decisions.is_empty() {
        return Err(Error::Input("no re-ranking decisions".into()));
    }
    let mut out = Vec::new();
    for &k in cuts {
        let mut sum = 0.0;
        for d in decisions {
            sum += hitrate_at_k(&d.reranked, &d.pointwise, k.min(d.pointwise.len()))?;
        }
        out.push((format!("hit@{k}"), sum / decisions.len() as f64));
    }
    let mut all = 0.0;
    for d in decisions {
        all += d.hit_at_all;
    }
    out.push(("hit@all".into(), all / decisions.len() as f64));
    Ok(out)
}

/// Convenience used by tests and examples: bucketed view-time/conversion
/// correlation plus the exit table straight from simulated sessions.
pub fn calibration_tables(
    sessions: &[SessionLog],
) -> Result<(Vec<metrics::BucketRho>, metrics::ExitTable)> {
    let slots: Vec<(f64, bool)> = sessions
        .iter()
        .flat_map(|s| s.exposed_slots().map(|x| (x.view_time_seconds, x.converted)))
        .collect();
    let rho = metrics::bucketed_spearman(slots.into_iter(), &metrics::DEFAULT_BUCKET_EDGES)?;
    let exits = metrics::exit_probability_table(sessions, &[1, 3, 5], false)?;
    Ok((rho, exits))
}
