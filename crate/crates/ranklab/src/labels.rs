//! Label engineering for the six ranking objectives.
//!
//! Feed-side objectives (vtr, cvr, sdr) are labeled per exposed slot;
//! homepage-side objectives (ctr, sdr*) per impression/click; and the
//! look-ahead conversion objective (cvr*) per feed entry, aggregating all
//! feed conversions of the triggered session into one binary label.
//!
//! Two knobs matter for the swipe-down objective: `first_position_only`
//! keeps only the position-1 view per session (positives are much sparser
//! there), and the conflict filter zero-weights exit-after-purchase samples
//! so the head stops treating conversions as disengagement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureContext, FeatureVector};
use crate::worldsim::{SessionLog, World};

/// Objectives a predictor head can be trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Vtr,
    Cvr,
    Sdr,
    Ctr,
    SdrStar,
    CvrStar,
}

impl Objective {
    pub const ALL: [Objective; 6] = [
        Objective::Vtr,
        Objective::Cvr,
        Objective::Sdr,
        Objective::Ctr,
        Objective::SdrStar,
        Objective::CvrStar,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Vtr => "vtr",
            Objective::Cvr => "cvr",
            Objective::Sdr => "sdr",
            Objective::Ctr => "ctr",
            Objective::SdrStar => "sdr_star",
            Objective::CvrStar => "cvr_star",
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// View-through binarization threshold in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VtrThreshold(pub f64);

impl VtrThreshold {
    pub fn validate(&self) -> Result<()> {
        if self.0 <= 0.0 {
            return Err(Error::Config(format!(
                "vtr threshold must be positive, got {}",
                self.0
            )));
        }
        Ok(())
    }
}

/// Swipe-down sample selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SdrSampleMode {
    #[default]
    AllPositions,
    FirstPositionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub vtr_threshold_seconds: f64,
    #[serde(default)]
    pub sdr_mode: SdrSampleMode,
    #[serde(default)]
    pub sdr_conflict_filter: bool,
}

impl Default for LabelSpec {
    fn default() -> Self {
        Self {
            vtr_threshold_seconds: 5.0,
            sdr_mode: SdrSampleMode::AllPositions,
            sdr_conflict_filter: false,
        }
    }
}

impl LabelSpec {
    pub fn validate(&self) -> Result<()> {
        VtrThreshold(self.vtr_threshold_seconds).validate()
    }
}

/// Reference back to the originating slot of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSource {
    pub user_id: u32,
    pub day: u32,
    pub session_index: u32,
    /// 1-based feed position; 0 for homepage-stage samples.
    pub position: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub objective: Objective,
    pub features: FeatureVector,
    pub label: u8,
    /// Inclusion weight, 0 or 1.
    pub weight: f64,
    pub source: SampleSource,
}

/// Binarize a view time against a threshold; strictly greater wins.
pub fn binarize_vtr(view_time_seconds: f64, threshold: VtrThreshold) -> Result<u8> {
    threshold.validate()?;
    if view_time_seconds < 0.0 {
        return Err(Error::Input(format!(
            "view time must be non-negative, got {view_time_seconds}"
        )));
    }
    Ok(u8::from(view_time_seconds > threshold.0))
}

/// Look-ahead conversion label: 1 iff any feed slot of the session converted.
pub fn lookahead_cvr_label(session: &SessionLog) -> u8 {
    u8::from(session.exposed_slots().any(|s| s.converted))
}

fn source_for(session: &SessionLog, position: u32) -> SampleSource {
    SampleSource {
        user_id: session.user_id.0,
        day: session.day,
        session_index: session.session_index,
        position,
    }
}

/// Swipe-down samples for one session.
///
/// Labels come straight from the exposed slots. The conflict filter only
/// rewrites weights: an exit right after a purchase (`sdr=0`, `cvr=1`) gets
/// weight 0, everything else weight 1.
pub fn sdr_samples(
    world: &World,
    session: &SessionLog,
    mode: SdrSampleMode,
    conflict_filter: bool,
    features: &FeatureConfig,
) -> Result<Vec<TrainingSample>> {
    if !session.estage_outcome.entered_fstage {
        return Err(Error::Input(
            "sdr samples require a session that entered the feed".into(),
        ));
    }
    let trigger = session
        .trigger_item_id
        .ok_or_else(|| Error::Input("entered session missing trigger".into()))?;

    let mut out = Vec::new();
    for slot in session.exposed_slots() {
        if mode == SdrSampleMode::FirstPositionOnly && slot.position != 1 {
            continue;
        }
        let label = u8::from(slot.swiped_down);
        let weight = if conflict_filter && !slot.swiped_down && slot.converted {
            0.0
        } else {
            1.0
        };
        let fv = features.slot_features(
            world,
            session.user_id,
            slot.item_id,
            FeatureContext::FStage {
                trigger,
                position: slot.position,
            },
        )?;
        out.push(TrainingSample {
            objective: Objective::Sdr,
            features: fv,
            label,
            weight,
            source: source_for(session, slot.position),
        });
    }
    Ok(out)
}

/// Build the full six-objective training set from session logs.
pub fn build_training_set(
    world: &World,
    logs: &[SessionLog],
    spec: &LabelSpec,
    features: &FeatureConfig,
) -> Result<Vec<TrainingSample>> {
    if logs.is_empty() {
        return Err(Error::Input("cannot build a training set from zero logs".into()));
    }
    spec.validate()?;
    let threshold = VtrThreshold(spec.vtr_threshold_seconds);

    let mut out = Vec::new();
    for session in logs {
        // Homepage impressions -> ctr samples; the clicked one is positive.
        let clicked = session.trigger_item_id;
        for &item in &session.estage_outcome.impressions {
            let fv = features.slot_features(world, session.user_id, item, FeatureContext::EStage)?;
            out.push(TrainingSample {
                objective: Objective::Ctr,
                features: fv,
                label: u8::from(Some(item) == clicked),
                weight: 1.0,
                source: source_for(session, 0),
            });
        }

        let Some(trigger) = clicked else { continue };
        let trigger_fv =
            features.slot_features(world, session.user_id, trigger, FeatureContext::EStage)?;

        // One entry sample per click.
        out.push(TrainingSample {
            objective: Objective::SdrStar,
            features: trigger_fv.clone(),
            label: u8::from(session.estage_outcome.entered_fstage),
            weight: 1.0,
            source: source_for(session, 0),
        });

        if !session.estage_outcome.entered_fstage {
            continue;
        }

        // One look-ahead conversion sample per feed entry.
        out.push(TrainingSample {
            objective: Objective::CvrStar,
            features: trigger_fv,
            label: lookahead_cvr_label(session),
            weight: 1.0,
            source: source_for(session, 0),
        });

        for slot in session.exposed_slots() {
            let fv = features.slot_features(
                world,
                session.user_id,
                slot.item_id,
                FeatureContext::FStage {
                    trigger,
                    position: slot.position,
                },
            )?;
            out.push(TrainingSample {
                objective: Objective::Cvr,
                features: fv.clone(),
                label: u8::from(slot.converted),
                weight: 1.0,
                source: source_for(session, slot.position),
            });
            out.push(TrainingSample {
                objective: Objective::Vtr,
                features: fv,
                label: binarize_vtr(slot.view_time_seconds, threshold)?,
                weight: 1.0,
                source: source_for(session, slot.position),
            });
        }

        out.extend(sdr_samples(
            world,
            session,
            spec.sdr_mode,
            spec.sdr_conflict_filter,
            features,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::{
        generate_world, BehaviorParams, CategorySpec, EStageOutcome, ExitPoint, Involvement,
        ItemId, SlotOutcome, UserId, WorldConfig,
    };

    fn world() -> World {
        let cfg = WorldConfig {
            seed: 3,
            users: 2,
            day_count: 2,
            affinity_range: [0.2, 0.8],
            patience_range: [0.3, 0.7],
            return_propensity_range: [0.4, 0.6],
            behavior: BehaviorParams::default(),
            categories: vec![CategorySpec {
                name: "c".into(),
                items: 8,
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
        generate_world(&cfg, 3).unwrap()
    }

    fn slot(position: u32, item: u32, swiped: bool, converted: bool) -> SlotOutcome {
        SlotOutcome {
            position,
            item_id: ItemId(item),
            view_time_seconds: 3.0,
            converted,
            swiped_down: swiped,
            exposed: true,
        }
    }

    fn session_four_slots(last_converted: bool) -> SessionLog {
        SessionLog {
            v: 1,
            user_id: UserId(0),
            day: 1,
            session_index: 0,
            trigger_item_id: Some(ItemId(0)),
            estage_outcome: EStageOutcome {
                impressions: vec![ItemId(3), ItemId(0)],
                clicked: true,
                converted: false,
                entered_fstage: true,
            },
            fstage_slots: vec![
                slot(1, 1, true, false),
                slot(2, 2, true, false),
                slot(3, 4, true, false),
                slot(4, 5, false, last_converted),
            ],
            exited_at: Some(ExitPoint::Position(4)),
        }
    }

    #[test]
    fn vtr_binarization_is_strict() {
        assert_eq!(binarize_vtr(30.0, VtrThreshold(25.0)).unwrap(), 1);
        assert_eq!(binarize_vtr(5.0, VtrThreshold(5.0)).unwrap(), 0);
        assert_eq!(binarize_vtr(6.0, VtrThreshold(5.0)).unwrap(), 1);
        assert!(binarize_vtr(-1.0, VtrThreshold(5.0)).is_err());
        assert!(binarize_vtr(1.0, VtrThreshold(0.0)).is_err());
    }

    #[test]
    fn sdr_labels_transcribe_swipes() {
        let w = world();
        let fc = FeatureConfig::default();
        let s = session_four_slots(false);
        let samples = sdr_samples(&w, &s, SdrSampleMode::AllPositions, false, &fc).unwrap();
        assert_eq!(samples.len(), 4);
        assert_eq!(
            samples.iter().map(|s| s.label).collect::<Vec<_>>(),
            vec![1, 1, 1, 0]
        );
        assert!(samples.iter().all(|s| s.weight == 1.0));
    }

    #[test]
    fn conflict_filter_zeroes_exit_after_purchase() {
        let w = world();
        let fc = FeatureConfig::default();
        let s = session_four_slots(true);
        let samples = sdr_samples(&w, &s, SdrSampleMode::AllPositions, true, &fc).unwrap();
        assert_eq!(
            samples.iter().map(|s| s.weight).collect::<Vec<_>>(),
            vec![1.0, 1.0, 1.0, 0.0]
        );
        // Labels must be untouched by the filter.
        let unfiltered = sdr_samples(&w, &s, SdrSampleMode::AllPositions, false, &fc).unwrap();
        let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
        let labels_unf: Vec<u8> = unfiltered.iter().map(|s| s.label).collect();
        assert_eq!(labels, labels_unf);
    }

    #[test]
    fn first_position_mode_is_a_subset() {
        let w = world();
        let fc = FeatureConfig::default();
        let s = session_four_slots(true);
        let first = sdr_samples(&w, &s, SdrSampleMode::FirstPositionOnly, false, &fc).unwrap();
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].source.position, 1);
        let all = sdr_samples(&w, &s, SdrSampleMode::AllPositions, false, &fc).unwrap();
        assert!(all.contains(&first[0]));
    }

    #[test]
    fn lookahead_label_is_any_feed_conversion() {
        let mut s = session_four_slots(false);
        assert_eq!(lookahead_cvr_label(&s), 0);
        s.fstage_slots[1].converted = true;
        assert_eq!(lookahead_cvr_label(&s), 1);
        let no_entry = SessionLog {
            estage_outcome: EStageOutcome {
                impressions: vec![ItemId(1)],
                clicked: false,
                converted: false,
                entered_fstage: false,
            },
            fstage_slots: vec![],
            trigger_item_id: None,
            exited_at: None,
            ..s
        };
        assert_eq!(lookahead_cvr_label(&no_entry), 0);
    }

    #[test]
    fn training_set_counting_contract() {
        // 1 session: 2 impressions, click, entry, 4 exposed slots.
        let w = world();
        let fc = FeatureConfig::default();
        let spec = LabelSpec::default();
        let samples = build_training_set(&w, &[session_four_slots(false)], &spec, &fc).unwrap();
        let count = |o: Objective| samples.iter().filter(|s| s.objective == o).count();
        assert_eq!(count(Objective::Ctr), 2);
        assert_eq!(count(Objective::SdrStar), 1);
        assert_eq!(count(Objective::CvrStar), 1);
        assert_eq!(count(Objective::Cvr), 4);
        assert_eq!(count(Objective::Vtr), 4);
        assert_eq!(count(Objective::Sdr), 4);
    }

    #[test]
    fn no_entries_no_feed_samples() {
        let w = world();
        let fc = FeatureConfig::default();
        let s = SessionLog {
            v: 1,
            user_id: UserId(0),
            day: 1,
            session_index: 0,
            trigger_item_id: None,
            estage_outcome: EStageOutcome {
                impressions: vec![ItemId(1), ItemId(2)],
                clicked: false,
                converted: false,
                entered_fstage: false,
            },
            fstage_slots: vec![],
            exited_at: None,
        };
        let samples = build_training_set(&w, &[s], &LabelSpec::default(), &fc).unwrap();
        assert!(samples
            .iter()
            .all(|s| s.objective == Objective::Ctr));
    }

    #[test]
    fn empty_logs_is_an_error() {
        let w = world();
        let fc = FeatureConfig::default();
        assert!(build_training_set(&w, &[], &LabelSpec::default(), &fc).is_err());
    }
}
