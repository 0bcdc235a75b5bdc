//! Multi-head logistic predictor over shared hashed features.
//!
//! One independent logistic head per objective, trained with weighted binary
//! cross entropy by plain SGD. Heads are deliberately simple: every gradient
//! is hand-checkable against finite differences, and an oracle scorer backed
//! by the simulator's ground truth slots in behind the same interface.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureContext, FeatureVector, TABLE_BITS};
use crate::labels::{Objective, TrainingSample};
use crate::rng::{self, tag};
use crate::worldsim::{true_scores, ItemId, ScoreContext, UserId, World};

pub const MODEL_VERSION: u32 = 1;
const BINARY_MAGIC: &[u8; 8] = b"RLMODEL1";

/// Per-candidate predicted probabilities. Feed objectives are always
/// present; homepage-side heads only when the model (or oracle) carries them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScores {
    pub vtr: f64,
    pub cvr: f64,
    pub sdr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ctr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdr_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvr_star: Option<f64>,
}

impl ObjectiveScores {
    pub fn feed(vtr: f64, cvr: f64, sdr: f64) -> Self {
        Self {
            vtr,
            cvr,
            sdr,
            ctr: None,
            sdr_star: None,
            cvr_star: None,
        }
    }
}

/// Homepage-ranking scores (immediate conversion plus look-ahead factors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EStageScores {
    pub cvr: f64,
    pub ctr: f64,
    pub sdr_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvr_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: u32,
    #[serde(default)]
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.2,
            epochs: 6,
            l2: 1e-6,
            seed: 17,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || self.epochs == 0 || self.l2 < 0.0 {
            return Err(Error::Config(
                "train config needs learning_rate > 0, epochs >= 1, l2 >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// One logistic head: sparse weights over the hashed table plus a bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Head {
    pub bias: f64,
    pub weights: BTreeMap<u32, f64>,
}

impl Head {
    pub fn raw_score(&self, features: &FeatureVector) -> f64 {
        let mut s = self.bias;
        for (id, v) in features.iter() {
            if let Some(w) = self.weights.get(&id) {
                s += w * v;
            }
        }
        s
    }

    pub fn probability(&self, features: &FeatureVector) -> f64 {
        sigmoid(self.raw_score(features))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    pub version: u32,
    pub table_bits: u32,
    pub hyper: TrainConfig,
    pub heads: BTreeMap<Objective, Head>,
}

impl PredictorModel {
    pub fn head(&self, objective: Objective) -> Result<&Head> {
        self.heads
            .get(&objective)
            .ok_or_else(|| Error::MissingHead(objective.name().into()))
    }

    /// Probability from one named head.
    pub fn predict_one(&self, objective: Objective, features: &FeatureVector) -> Result<f64> {
        Ok(self.head(objective)?.probability(features))
    }
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable weighted BCE of one sample given the raw score.
fn bce_from_raw(raw: f64, label: f64, weight: f64) -> f64 {
    // max(s,0) - s*y + ln(1 + e^{-|s|})
    weight * (raw.max(0.0) - raw * label + (-raw.abs()).exp().ln_1p())
}

/// Loss of a head on a sample batch: weighted BCE plus an L2 penalty over
/// the features each sample touches.
pub fn head_loss(head: &Head, samples: &[&TrainingSample], l2: f64) -> f64 {
    let mut loss = 0.0;
    for s in samples {
        let raw = head.raw_score(&s.features);
        loss += bce_from_raw(raw, s.label as f64, s.weight);
        if l2 > 0.0 {
            for (id, _) in s.features.iter() {
                let w = head.weights.get(&id).copied().unwrap_or(0.0);
                loss += 0.5 * l2 * w * w;
            }
        }
    }
    loss
}

/// Analytic gradient of `head_loss` with respect to the touched weights and
/// the bias.
pub fn head_gradient(
    head: &Head,
    samples: &[&TrainingSample],
    l2: f64,
) -> (BTreeMap<u32, f64>, f64) {
    let mut grad_w: BTreeMap<u32, f64> = BTreeMap::new();
    let mut grad_b = 0.0;
    for s in samples {
        let raw = head.raw_score(&s.features);
        let err = s.weight * (sigmoid(raw) - s.label as f64);
        grad_b += err;
        for (id, v) in s.features.iter() {
            let w = head.weights.get(&id).copied().unwrap_or(0.0);
            *grad_w.entry(id).or_insert(0.0) += err * v + l2 * w;
        }
    }
    (grad_w, grad_b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetric {
    pub objective: Objective,
    pub epoch: u32,
    pub mean_weighted_bce: f64,
    pub samples: usize,
}

/// Train one head per objective present in `samples`.
///
/// Zero-weight samples are dropped before anything else happens (including
/// the shuffle), so they contribute exactly nothing — not even rng draws.
pub fn train_traced(
    samples: &[TrainingSample],
    hyper: &TrainConfig,
    seed: u64,
) -> Result<(PredictorModel, Vec<EpochMetric>)> {
    hyper.validate()?;
    let mut by_objective: BTreeMap<Objective, Vec<&TrainingSample>> = BTreeMap::new();
    for s in samples {
        if s.weight > 0.0 {
            by_objective.entry(s.objective).or_default().push(s);
        }
    }

    let mut heads = BTreeMap::new();
    let mut metrics = Vec::new();
    for (objective, subset) in &by_objective {
        let positives = subset.iter().filter(|s| s.label == 1).count();
        if positives == 0 || positives == subset.len() {
            return Err(Error::Degenerate(format!(
                "objective {objective}: needs at least one positive and one negative \
                 sample with weight 1 (got {positives}/{} positives)",
                subset.len()
            )));
        }

        // Start the bias at the base-rate logit so epochs go into feature
        // weights instead of bias travel.
        let rate = (positives as f64 / subset.len() as f64).clamp(1e-3, 1.0 - 1e-3);
        let mut head = Head {
            bias: (rate / (1.0 - rate)).ln(),
            weights: BTreeMap::new(),
        };
        let mut order: Vec<usize> = (0..subset.len()).collect();
        let mut shuffle_rng = rng::stream(seed, &[tag::TRAIN, *objective as u64]);
        for epoch in 0..hyper.epochs {
            order.shuffle(&mut shuffle_rng);
            let mut epoch_loss = 0.0;
            for &i in &order {
                let s = subset[i];
                let raw = head.raw_score(&s.features);
                epoch_loss += bce_from_raw(raw, s.label as f64, s.weight);
                let err = s.weight * (sigmoid(raw) - s.label as f64);
                for (id, v) in s.features.iter() {
                    let w = head.weights.entry(id).or_insert(0.0);
                    *w -= hyper.learning_rate * (err * v + hyper.l2 * *w);
                }
                head.bias -= hyper.learning_rate * err;
            }
            metrics.push(EpochMetric {
                objective: *objective,
                epoch,
                mean_weighted_bce: epoch_loss / subset.len() as f64,
                samples: subset.len(),
            });
        }
        heads.insert(*objective, head);
    }

    Ok((
        PredictorModel {
            version: MODEL_VERSION,
            table_bits: TABLE_BITS,
            hyper: *hyper,
            heads,
        },
        metrics,
    ))
}

pub fn train(samples: &[TrainingSample], hyper: &TrainConfig, seed: u64) -> Result<PredictorModel> {
    train_traced(samples, hyper, seed).map(|(m, _)| m)
}

/// Feed-side scores (vtr, cvr, sdr mandatory; homepage heads if present).
pub fn predict(model: &PredictorModel, features: &FeatureVector) -> Result<ObjectiveScores> {
    Ok(ObjectiveScores {
        vtr: model.predict_one(Objective::Vtr, features)?,
        cvr: model.predict_one(Objective::Cvr, features)?,
        sdr: model.predict_one(Objective::Sdr, features)?,
        ctr: maybe_head(model, Objective::Ctr, features),
        sdr_star: maybe_head(model, Objective::SdrStar, features),
        cvr_star: maybe_head(model, Objective::CvrStar, features),
    })
}

fn maybe_head(model: &PredictorModel, objective: Objective, features: &FeatureVector) -> Option<f64> {
    model.heads.get(&objective).map(|h| h.probability(features))
}

/// Weighted AUC: probability that a random positive outscores a random
/// negative, ties counted half. Weights scale each sample's mass in the
/// pairwise comparison.
pub fn auc(scores: &[f64], labels: &[u8], weights: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() || scores.len() != weights.len() {
        return Err(Error::Input(format!(
            "auc inputs must align: {} scores, {} labels, {} weights",
            scores.len(),
            labels.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::Input("auc weights must be finite and >= 0".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("auc scores must be finite".into()));
    }

    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut cum_neg = 0.0;
    let mut num = 0.0;
    let (mut w_pos, mut w_neg) = (0.0, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut group_pos, mut group_neg) = (0.0, 0.0);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            let k = idx[j];
            if labels[k] == 1 {
                group_pos += weights[k];
            } else {
                group_neg += weights[k];
            }
            j += 1;
        }
        num += group_pos * (cum_neg + 0.5 * group_neg);
        cum_neg += group_neg;
        w_pos += group_pos;
        w_neg += group_neg;
        i = j;
    }
    if w_pos == 0.0 || w_neg == 0.0 {
        return Err(Error::Degenerate(
            "auc needs at least one positive and one negative with positive weight".into(),
        ));
    }
    Ok(num / (w_pos * w_neg))
}

/// Convenience: AUC of one head on labeled samples (sample weights applied).
pub fn head_auc(model: &PredictorModel, objective: Objective, samples: &[&TrainingSample]) -> Result<f64> {
    let head = model.head(objective)?;
    let scores: Vec<f64> = samples.iter().map(|s| head.probability(&s.features)).collect();
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let weights: Vec<f64> = samples.iter().map(|s| s.weight).collect();
    auc(&scores, &labels, &weights)
}

// --- persistence ---------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelFormat {
    #[default]
    Json,
    Binary,
}

pub fn save_model(model: &PredictorModel, path: &Path, format: ModelFormat) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        ModelFormat::Json => serde_json::to_writer(&mut out, model)?,
        ModelFormat::Binary => {
            out.write_all(BINARY_MAGIC)?;
            out.write_u32::<LittleEndian>(model.version)?;
            out.write_u32::<LittleEndian>(model.table_bits)?;
            out.write_f64::<LittleEndian>(model.hyper.learning_rate)?;
            out.write_u32::<LittleEndian>(model.hyper.epochs)?;
            out.write_f64::<LittleEndian>(model.hyper.l2)?;
            out.write_u64::<LittleEndian>(model.hyper.seed)?;
            out.write_u32::<LittleEndian>(model.heads.len() as u32)?;
            for (objective, head) in &model.heads {
                out.write_u8(*objective as u8)?;
                out.write_f64::<LittleEndian>(head.bias)?;
                out.write_u32::<LittleEndian>(head.weights.len() as u32)?;
                for (id, w) in &head.weights {
                    out.write_u32::<LittleEndian>(*id)?;
                    out.write_f64::<LittleEndian>(*w)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<PredictorModel> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    let n = input.read(&mut magic)?;
    if n == 8 && &magic == BINARY_MAGIC {
        let version = input.read_u32::<LittleEndian>()?;
        let table_bits = input.read_u32::<LittleEndian>()?;
        let hyper = TrainConfig {
            learning_rate: input.read_f64::<LittleEndian>()?,
            epochs: input.read_u32::<LittleEndian>()?,
            l2: input.read_f64::<LittleEndian>()?,
            seed: input.read_u64::<LittleEndian>()?,
        };
        let head_count = input.read_u32::<LittleEndian>()?;
        let mut heads = BTreeMap::new();
        for _ in 0..head_count {
            let objective = match input.read_u8()? {
                0 => Objective::Vtr,
                1 => Objective::Cvr,
                2 => Objective::Sdr,
                3 => Objective::Ctr,
                4 => Objective::SdrStar,
                5 => Objective::CvrStar,
                other => {
                    return Err(Error::Input(format!("unknown objective tag {other}")));
                }
            };
            let bias = input.read_f64::<LittleEndian>()?;
            let count = input.read_u32::<LittleEndian>()?;
            let mut weights = BTreeMap::new();
            for _ in 0..count {
                let id = input.read_u32::<LittleEndian>()?;
                let w = input.read_f64::<LittleEndian>()?;
                weights.insert(id, w);
            }
            heads.insert(objective, Head { bias, weights });
        }
        return Ok(PredictorModel {
            version,
            table_bits,
            hyper,
            heads,
        });
    }
    // Not the binary magic: parse the whole file as JSON.
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    let mut bytes = magic[..n].to_vec();
    bytes.extend_from_slice(&rest);
    Ok(serde_json::from_slice(&bytes)?)
}

// --- scorer interface ----------------------------------------------------

/// Uniform scoring interface used by ranking policies: either a trained
/// model or the simulator's ground truth.
pub trait Scorer: Sync {
    /// Scores for a feed candidate under a given trigger.
    fn fstage(&self, world: &World, user: UserId, item: ItemId, trigger: ItemId)
        -> Result<ObjectiveScores>;

    /// Scores for a homepage candidate (the item would become the trigger).
    fn estage(&self, world: &World, user: UserId, item: ItemId) -> Result<EStageScores>;
}

/// Ground-truth scorer. The view-through probability is evaluated at the
/// same threshold the competing trained arm would binarize at.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    pub vtr_threshold_seconds: f64,
}

impl Scorer for OracleScorer {
    fn fstage(
        &self,
        world: &World,
        user: UserId,
        item: ItemId,
        _trigger: ItemId,
    ) -> Result<ObjectiveScores> {
        let profile = world.user(user)?;
        let t = true_scores(world, profile, item, ScoreContext::default())?;
        Ok(ObjectiveScores {
            vtr: t.vtr(self.vtr_threshold_seconds),
            cvr: t.cvr,
            sdr: t.sdr,
            ctr: Some(t.ctr),
            sdr_star: Some(t.sdr_star),
            cvr_star: None,
        })
    }

    fn estage(&self, world: &World, user: UserId, item: ItemId) -> Result<EStageScores> {
        let profile = world.user(user)?;
        let t = true_scores(world, profile, item, ScoreContext::default())?;
        Ok(EStageScores {
            cvr: t.cvr,
            ctr: t.ctr,
            sdr_star: t.sdr_star,
            cvr_star: None,
        })
    }
}

/// Trained-model scorer. Feed candidates are scored position-independently
/// (position feature pinned to slot 1).
#[derive(Debug, Clone)]
pub struct ModelScorer {
    pub model: PredictorModel,
    pub features: FeatureConfig,
}

impl Scorer for ModelScorer {
    fn fstage(
        &self,
        world: &World,
        user: UserId,
        item: ItemId,
        trigger: ItemId,
    ) -> Result<ObjectiveScores> {
        let fv = self.features.slot_features(
            world,
            user,
            item,
            FeatureContext::FStage { trigger, position: 1 },
        )?;
        predict(&self.model, &fv)
    }

    fn estage(&self, world: &World, user: UserId, item: ItemId) -> Result<EStageScores> {
        let fv = self
            .features
            .slot_features(world, user, item, FeatureContext::EStage)?;
        Ok(EStageScores {
            cvr: self.model.predict_one(Objective::Cvr, &fv)?,
            ctr: self.model.predict_one(Objective::Ctr, &fv)?,
            sdr_star: self.model.predict_one(Objective::SdrStar, &fv)?,
            cvr_star: self
                .model
                .heads
                .get(&Objective::CvrStar)
                .map(|h| h.probability(&fv)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::SampleSource;

    fn sample(objective: Objective, ids: &[(u32, f64)], label: u8, weight: f64) -> TrainingSample {
        TrainingSample {
            objective,
            features: FeatureVector::from_pairs(ids.to_vec()),
            label,
            weight,
            source: SampleSource {
                user_id: 0,
                day: 1,
                session_index: 0,
                position: 1,
            },
        }
    }

    #[test]
    fn single_positive_sample_is_memorized() {
        let s = sample(Objective::Cvr, &[(3, 1.0)], 1, 1.0);
        let neg = sample(Objective::Cvr, &[(9, 1.0)], 0, 1.0);
        let hyper = TrainConfig {
            learning_rate: 0.5,
            epochs: 400,
            l2: 0.0,
            seed: 1,
        };
        let model = train(&[s.clone(), neg], &hyper, 1).unwrap();
        let p = model.predict_one(Objective::Cvr, &s.features).unwrap();
        assert!(p > 0.99, "memorized probability was {p}");
    }

    #[test]
    fn zero_weight_samples_change_nothing() {
        let base = vec![
            sample(Objective::Cvr, &[(1, 1.0), (2, 1.0)], 1, 1.0),
            sample(Objective::Cvr, &[(2, 1.0)], 0, 1.0),
            sample(Objective::Cvr, &[(1, 1.0)], 1, 1.0),
            sample(Objective::Cvr, &[(3, 1.0)], 0, 1.0),
        ];
        let mut padded = base.clone();
        for s in &base {
            let mut dup = s.clone();
            dup.weight = 0.0;
            padded.push(dup);
        }
        let hyper = TrainConfig::default();
        let a = train(&base, &hyper, 9).unwrap();
        let b = train(&padded, &hyper, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_head_names_objective() {
        let all_pos = vec![
            sample(Objective::Sdr, &[(1, 1.0)], 1, 1.0),
            sample(Objective::Sdr, &[(2, 1.0)], 1, 1.0),
        ];
        let err = train(&all_pos, &TrainConfig::default(), 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sdr"), "error should name the objective: {msg}");
    }

    #[test]
    fn fresh_model_predicts_half() {
        let mut heads = BTreeMap::new();
        for o in [Objective::Vtr, Objective::Cvr, Objective::Sdr] {
            heads.insert(o, Head::default());
        }
        let model = PredictorModel {
            version: MODEL_VERSION,
            table_bits: TABLE_BITS,
            hyper: TrainConfig::default(),
            heads,
        };
        let fv = FeatureVector::from_pairs(vec![(5, 1.0)]);
        let scores = predict(&model, &fv).unwrap();
        assert_eq!(scores.vtr, 0.5);
        assert_eq!(scores.cvr, 0.5);
        assert_eq!(scores.sdr, 0.5);
        assert!(scores.ctr.is_none());
    }

    #[test]
    fn missing_head_is_named() {
        let model = PredictorModel {
            version: MODEL_VERSION,
            table_bits: TABLE_BITS,
            hyper: TrainConfig::default(),
            heads: BTreeMap::new(),
        };
        let fv = FeatureVector::from_pairs(vec![(5, 1.0)]);
        let err = predict(&model, &fv).unwrap_err();
        assert!(err.to_string().contains("vtr"));
    }

    #[test]
    fn predictions_stay_in_open_unit_interval() {
        let mut head = Head::default();
        head.weights.insert(1, 40.0);
        head.bias = -60.0;
        let fv = FeatureVector::from_pairs(vec![(1, 1.0)]);
        let p = head.probability(&fv);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn model_roundtrips_bit_exactly_in_both_formats() {
        let samples = vec![
            sample(Objective::Cvr, &[(1, 1.0), (2, 1.0)], 1, 1.0),
            sample(Objective::Cvr, &[(2, 1.0)], 0, 1.0),
            sample(Objective::Vtr, &[(1, 1.0)], 1, 1.0),
            sample(Objective::Vtr, &[(3, 1.0)], 0, 1.0),
            sample(Objective::Sdr, &[(4, 1.0)], 1, 1.0),
            sample(Objective::Sdr, &[(1, 1.0), (4, 1.0)], 0, 1.0),
        ];
        let model = train(&samples, &TrainConfig::default(), 5).unwrap();
        let dir = std::env::temp_dir().join("ranklab_model_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        for (format, name) in [(ModelFormat::Json, "m.json"), (ModelFormat::Binary, "m.bin")] {
            let path = dir.join(name);
            save_model(&model, &path, format).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(model, back);
            let fv = FeatureVector::from_pairs(vec![(1, 1.0), (2, 1.0)]);
            let a = predict(&model, &fv).unwrap();
            let b = predict(&back, &fv).unwrap();
            assert_eq!(a.cvr.to_bits(), b.cvr.to_bits(), "0 ULP contract");
        }
    }

    #[test]
    fn auc_matches_hand_cases() {
        assert_eq!(auc(&[0.9, 0.1], &[1, 0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5, 0.5], &[1, 0, 1], &[1.0, 1.0, 1.0]).unwrap(), 0.5);
        assert!(auc(&[0.5, 0.6], &[1, 1], &[1.0, 1.0]).is_err());
        assert!(auc(&[0.5, 0.6], &[1, 0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // Spot check here; the oracle suite sweeps 100 random draws.
        let samples = vec![
            sample(Objective::Cvr, &[(1, 1.0), (2, 0.5)], 1, 1.0),
            sample(Objective::Cvr, &[(2, 1.0)], 0, 1.0),
        ];
        let refs: Vec<&TrainingSample> = samples.iter().collect();
        let mut head = Head::default();
        head.weights.insert(1, 0.3);
        head.weights.insert(2, -0.7);
        head.bias = 0.1;
        let l2 = 0.01;
        let (grad, grad_b) = head_gradient(&head, &refs, l2);
        let h = 1e-6;
        for (&id, &g) in &grad {
            let mut plus = head.clone();
            *plus.weights.entry(id).or_insert(0.0) += h;
            let mut minus = head.clone();
            *minus.weights.entry(id).or_insert(0.0) -= h;
            let fd = (head_loss(&plus, &refs, l2) - head_loss(&minus, &refs, l2)) / (2.0 * h);
            assert!((fd - g).abs() / g.abs().max(1e-9) < 1e-5, "id {id}: {fd} vs {g}");
        }
        let mut plus = head.clone();
        plus.bias += h;
        let mut minus = head.clone();
        minus.bias -= h;
        let fd_b = (head_loss(&plus, &refs, l2) - head_loss(&minus, &refs, l2)) / (2.0 * h);
        assert!((fd_b - grad_b).abs() / grad_b.abs().max(1e-9) < 1e-5);
    }
}
