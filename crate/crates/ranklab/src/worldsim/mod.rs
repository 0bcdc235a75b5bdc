//! Synthetic population and ground-truth behavior model.
//!
//! A `World` holds users with latent per-category affinities and items with
//! scalar quality. All behavior probabilities (click, conversion, view time,
//! swipe-down, next-day return) derive from these latents through closed-form
//! laws, so the simulator doubles as an exact oracle for everything the
//! predictor tries to learn.
//!
//! The behavioral structure this model is calibrated to reproduce:
//! * view time follows a log-normal law whose location shifts upward on
//!   conversion, which yields rank correlations between conversion and view
//!   time that strengthen across view-time buckets;
//! * users exit sessions far more often right after converting than
//!   otherwise (`exit_after_conversion > exit_without_conversion`);
//! * high-involvement categories gain conversion probability from repeated
//!   same-category viewing within a session (comparison shopping).

mod session;

pub use session::{
    build_fstage_pool, return_probability, satisfaction_by_user, simulate_day, simulate_days,
    simulate_session, DayParams, DayResult, EStageOutcome, ExitPoint, SessionLog, SessionParams,
    SessionPolicy, SimulationRun, SlotOutcome, FSTAGE_RANKER_CONTRACT, SESSION_SCHEMA_VERSION,
};

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct UserId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ItemId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct CategoryId(pub u16);

/// Decision cost of an item. High-involvement goods convert after comparison
/// browsing rather than on first sight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Involvement {
    Standard,
    HighInvolvement,
}

/// Log-normal view-time law: `ln T ~ Normal(ln median + gain * theta, sigma)`
/// where `theta` is the user-item match score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewTimeLaw {
    pub median_seconds: f64,
    pub sigma: f64,
    pub affinity_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryParams {
    pub category_id: CategoryId,
    pub name: String,
    pub base_cvr: f64,
    pub view_time: ViewTimeLaw,
    /// Added to the log-location of the view-time law when the slot converts.
    pub conversion_view_shift: f64,
    pub exit_after_conversion: f64,
    pub exit_without_conversion: f64,
    /// Extra conversion probability per prior same-category view in the
    /// session; nonzero only for high-involvement categories.
    pub fstage_comparison_bonus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: UserId,
    /// Affinity per category, indexed by `CategoryId`, values in [0,1].
    pub latent_affinity: Vec<f64>,
    /// Propensity to keep swiping when nothing converted, in [0,1].
    pub patience: f64,
    /// Base rate of returning the next day, in [0,1].
    pub return_propensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: ItemId,
    pub category_id: CategoryId,
    pub quality: f64,
    pub involvement: Involvement,
}

/// Population-wide behavior constants that are not per-category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    /// Fraction of `base_cvr` retained at zero match (`theta = 0`).
    pub cvr_floor: f64,
    /// Hard cap on the accumulated comparison bonus.
    pub comparison_bonus_cap: f64,
    /// Homepage click probability: `ctr = ctr_base + ctr_gain * theta`.
    pub estage_ctr_base: f64,
    pub estage_ctr_gain: f64,
    /// Detail-page-to-immersive-feed entry: `sdr* = entry_base + entry_gain * theta`.
    pub estage_entry_base: f64,
    pub estage_entry_gain: f64,
    /// Next-day return: `sigmoid(logit(propensity) + coupling * satisfaction)`.
    pub return_coupling: f64,
    pub satisfaction_ipv_weight: f64,
    pub satisfaction_purchase_weight: f64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self {
            cvr_floor: 0.25,
            comparison_bonus_cap: 0.25,
            estage_ctr_base: 0.05,
            estage_ctr_gain: 0.35,
            estage_entry_base: 0.25,
            estage_entry_gain: 0.55,
            return_coupling: 0.0,
            satisfaction_ipv_weight: 0.1,
            satisfaction_purchase_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub users: Vec<UserProfile>,
    pub items: Vec<Item>,
    pub categories: Vec<CategoryParams>,
    pub behavior: BehaviorParams,
    pub seed: u64,
    pub day_count: u32,
}

/// Per-category generation spec, straight from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    pub items: u32,
    #[serde(default = "CategorySpec::default_involvement")]
    pub involvement: Involvement,
    #[serde(default = "CategorySpec::default_quality_range")]
    pub quality_range: [f64; 2],
    pub base_cvr: f64,
    pub view_time_median_seconds: f64,
    pub view_time_sigma: f64,
    pub view_time_affinity_gain: f64,
    pub conversion_view_shift: f64,
    pub exit_after_conversion: f64,
    pub exit_without_conversion: f64,
    #[serde(default)]
    pub fstage_comparison_bonus: f64,
}

impl CategorySpec {
    fn default_involvement() -> Involvement {
        Involvement::Standard
    }
    fn default_quality_range() -> [f64; 2] {
        [0.05, 0.95]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub seed: u64,
    pub users: u32,
    pub day_count: u32,
    #[serde(default = "WorldConfig::default_affinity_range")]
    pub affinity_range: [f64; 2],
    #[serde(default = "WorldConfig::default_patience_range")]
    pub patience_range: [f64; 2],
    #[serde(default = "WorldConfig::default_return_range")]
    pub return_propensity_range: [f64; 2],
    #[serde(default)]
    pub behavior: BehaviorParams,
    pub categories: Vec<CategorySpec>,
}

impl WorldConfig {
    fn default_affinity_range() -> [f64; 2] {
        [0.05, 0.95]
    }
    fn default_patience_range() -> [f64; 2] {
        [0.2, 0.9]
    }
    fn default_return_range() -> [f64; 2] {
        [0.35, 0.75]
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::Config("world.users must be >= 1".into()));
        }
        if self.day_count == 0 {
            return Err(Error::Config("world.day_count must be >= 1".into()));
        }
        if self.categories.is_empty() {
            return Err(Error::Config("world needs at least one category".into()));
        }
        for r in [
            self.affinity_range,
            self.patience_range,
            self.return_propensity_range,
        ] {
            check_range01(r)?;
        }
        for c in &self.categories {
            if c.items == 0 {
                return Err(Error::Config(format!(
                    "category `{}` must have at least one item",
                    c.name
                )));
            }
            check_range01(c.quality_range)?;
            for (label, p) in [
                ("base_cvr", c.base_cvr),
                ("exit_after_conversion", c.exit_after_conversion),
                ("exit_without_conversion", c.exit_without_conversion),
            ] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!(
                        "category `{}` {label} out of [0,1]: {p}",
                        c.name
                    )));
                }
            }
            if c.exit_after_conversion <= c.exit_without_conversion {
                return Err(Error::Config(format!(
                    "category `{}`: exit_after_conversion must exceed exit_without_conversion",
                    c.name
                )));
            }
            if c.view_time_median_seconds <= 0.0
                || c.view_time_sigma <= 0.0
                || c.view_time_affinity_gain < 0.0
                || c.conversion_view_shift <= 0.0
            {
                return Err(Error::Config(format!(
                    "category `{}`: view-time law parameters must be positive",
                    c.name
                )));
            }
            if c.fstage_comparison_bonus < 0.0 {
                return Err(Error::Config(format!(
                    "category `{}`: fstage_comparison_bonus must be >= 0",
                    c.name
                )));
            }
            if c.fstage_comparison_bonus > 0.0 && c.involvement != Involvement::HighInvolvement {
                return Err(Error::Config(format!(
                    "category `{}`: comparison bonus requires high_involvement",
                    c.name
                )));
            }
        }
        let b = &self.behavior;
        for (label, p) in [
            ("cvr_floor", b.cvr_floor),
            ("estage_ctr_base", b.estage_ctr_base),
            ("estage_entry_base", b.estage_entry_base),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("behavior.{label} out of [0,1]: {p}")));
            }
        }
        if b.estage_ctr_gain < 0.0 || b.estage_entry_gain < 0.0 || b.comparison_bonus_cap < 0.0 {
            return Err(Error::Config(
                "behavior gains and caps must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn check_range01(r: [f64; 2]) -> Result<()> {
    if r[0] > r[1] || r[0] < 0.0 || r[1] > 1.0 {
        return Err(Error::Config(format!("range {r:?} must satisfy 0 <= lo <= hi <= 1")));
    }
    Ok(())
}

fn uniform_in(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.gen_range(range[0]..range[1])
    }
}

/// Generate a deterministic world from config and seed. Same inputs produce a
/// bit-identical population.
pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<World> {
    config.validate()?;
    let category_count = config.categories.len();

    let categories: Vec<CategoryParams> = config
        .categories
        .iter()
        .enumerate()
        .map(|(idx, spec)| CategoryParams {
            category_id: CategoryId(idx as u16),
            name: spec.name.clone(),
            base_cvr: spec.base_cvr,
            view_time: ViewTimeLaw {
                median_seconds: spec.view_time_median_seconds,
                sigma: spec.view_time_sigma,
                affinity_gain: spec.view_time_affinity_gain,
            },
            conversion_view_shift: spec.conversion_view_shift,
            exit_after_conversion: spec.exit_after_conversion,
            exit_without_conversion: spec.exit_without_conversion,
            fstage_comparison_bonus: spec.fstage_comparison_bonus,
        })
        .collect();

    let mut users = Vec::with_capacity(config.users as usize);
    for uid in 0..config.users {
        let mut r = rng::stream(seed, &[tag::WORLD, 1, uid as u64]);
        let latent_affinity = (0..category_count)
            .map(|_| uniform_in(&mut r, config.affinity_range))
            .collect();
        users.push(UserProfile {
            user_id: UserId(uid),
            latent_affinity,
            patience: uniform_in(&mut r, config.patience_range),
            return_propensity: uniform_in(&mut r, config.return_propensity_range),
        });
    }

    let mut items = Vec::new();
    let mut next_item = 0u32;
    for (idx, spec) in config.categories.iter().enumerate() {
        let mut r = rng::stream(seed, &[tag::WORLD, 2, idx as u64]);
        for _ in 0..spec.items {
            items.push(Item {
                item_id: ItemId(next_item),
                category_id: CategoryId(idx as u16),
                quality: uniform_in(&mut r, spec.quality_range),
                involvement: spec.involvement,
            });
            next_item += 1;
        }
    }

    Ok(World {
        users,
        items,
        categories,
        behavior: config.behavior.clone(),
        seed,
        day_count: config.day_count,
    })
}

/// Slot context that modulates ground-truth probabilities.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoreContext {
    /// Same-category items the user has already viewed this session
    /// (including the trigger's detail page).
    pub comparison_count: u32,
}

/// Ground-truth behavior probabilities for one (user, item) pair.
///
/// `vtr(threshold)` evaluates the view-through probability at any threshold
/// from the log-normal mixture, so oracle rankers can be built for arbitrary
/// binarization choices.
#[derive(Debug, Clone, Copy)]
pub struct TrueBehaviorProbs {
    pub ctr: f64,
    pub cvr: f64,
    pub sdr: f64,
    pub sdr_star: f64,
    view_mu: f64,
    view_shift: f64,
    view_sigma: f64,
}

impl TrueBehaviorProbs {
    /// P(T > threshold): mixture of the converted and non-converted tails.
    pub fn vtr(&self, threshold_seconds: f64) -> f64 {
        assert!(threshold_seconds > 0.0, "vtr threshold must be positive");
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        let lt = threshold_seconds.ln();
        let tail_no = 1.0 - n.cdf((lt - self.view_mu) / self.view_sigma);
        let tail_conv = 1.0 - n.cdf((lt - self.view_mu - self.view_shift) / self.view_sigma);
        self.cvr * tail_conv + (1.0 - self.cvr) * tail_no
    }
}

impl World {
    pub fn user(&self, id: UserId) -> Result<&UserProfile> {
        self.users
            .get(id.0 as usize)
            .filter(|u| u.user_id == id)
            .ok_or_else(|| Error::Lookup(format!("unknown user {}", id.0)))
    }

    pub fn item(&self, id: ItemId) -> Result<&Item> {
        self.items
            .get(id.0 as usize)
            .filter(|i| i.item_id == id)
            .ok_or_else(|| Error::Lookup(format!("unknown item {}", id.0)))
    }

    pub fn category(&self, id: CategoryId) -> Result<&CategoryParams> {
        self.categories
            .get(id.0 as usize)
            .filter(|c| c.category_id == id)
            .ok_or_else(|| Error::Lookup(format!("unknown category {}", id.0)))
    }

    /// User-item match score in [0,1].
    pub fn theta(&self, user: &UserProfile, item: &Item) -> f64 {
        user.latent_affinity[item.category_id.0 as usize] * item.quality
    }

    /// Structural checks for deserialized worlds.
    pub fn validate(&self) -> Result<()> {
        for item in &self.items {
            self.category(item.category_id).map_err(|_| {
                Error::Config(format!(
                    "item {} references missing category {}",
                    item.item_id.0, item.category_id.0
                ))
            })?;
        }
        for user in &self.users {
            if user.latent_affinity.len() != self.categories.len() {
                return Err(Error::Config(format!(
                    "user {} affinity length {} != category count {}",
                    user.user_id.0,
                    user.latent_affinity.len(),
                    self.categories.len()
                )));
            }
        }
        Ok(())
    }

    /// Items of one category, excluding `exclude`.
    pub fn category_items(&self, category: CategoryId, exclude: Option<ItemId>) -> Vec<ItemId> {
        self.items
            .iter()
            .filter(|i| i.category_id == category && Some(i.item_id) != exclude)
            .map(|i| i.item_id)
            .collect()
    }

    pub fn involved_categories(&self) -> BTreeSet<CategoryId> {
        self.items
            .iter()
            .filter(|i| i.involvement == Involvement::HighInvolvement)
            .map(|i| i.category_id)
            .collect()
    }
}

/// Ground-truth behavior probabilities for `(user, item)` under `ctx`.
///
/// The swipe-down probability is the conversion-weighted mixture of the two
/// exit regimes:
/// `sdr = cvr * (1 - exit_after) + (1 - cvr) * (1 - exit_without_eff)`,
/// where `exit_without_eff` shrinks with user patience and item match.
pub fn true_scores(
    world: &World,
    user: &UserProfile,
    item_id: ItemId,
    ctx: ScoreContext,
) -> Result<TrueBehaviorProbs> {
    let item = world.item(item_id)?;
    world.user(user.user_id)?;
    let cat = world.category(item.category_id)?;
    let b = &world.behavior;
    let theta = world.theta(user, item);

    let base = cat.base_cvr * (b.cvr_floor + (1.0 - b.cvr_floor) * theta);
    let bonus = (cat.fstage_comparison_bonus * ctx.comparison_count as f64)
        .min(b.comparison_bonus_cap);
    let cvr = (base + bonus).clamp(0.0, 1.0);

    let exit_without_eff = cat.exit_without_conversion * (1.0 - user.patience * theta);
    let sdr = cvr * (1.0 - cat.exit_after_conversion) + (1.0 - cvr) * (1.0 - exit_without_eff);

    let ctr = (b.estage_ctr_base + b.estage_ctr_gain * theta).clamp(0.0, 1.0);
    let sdr_star = (b.estage_entry_base + b.estage_entry_gain * theta).clamp(0.0, 1.0);

    Ok(TrueBehaviorProbs {
        ctr,
        cvr,
        sdr,
        sdr_star,
        view_mu: cat.view_time.median_seconds.ln() + cat.view_time.affinity_gain * theta,
        view_shift: cat.conversion_view_shift,
        view_sigma: cat.view_time.sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> WorldConfig {
        WorldConfig {
            seed: 7,
            users: 2,
            day_count: 3,
            affinity_range: [0.05, 0.95],
            patience_range: [0.2, 0.9],
            return_propensity_range: [0.35, 0.75],
            behavior: BehaviorParams::default(),
            categories: vec![CategorySpec {
                name: "only".into(),
                items: 5,
                involvement: Involvement::Standard,
                quality_range: [0.05, 0.95],
                base_cvr: 0.05,
                view_time_median_seconds: 4.0,
                view_time_sigma: 0.9,
                view_time_affinity_gain: 0.9,
                conversion_view_shift: 1.4,
                exit_after_conversion: 0.7,
                exit_without_conversion: 0.25,
                fstage_comparison_bonus: 0.0,
            }],
        }
    }

    #[test]
    fn counts_follow_config() {
        let w = generate_world(&tiny_config(), 7).unwrap();
        assert_eq!(w.users.len(), 2);
        assert_eq!(w.categories.len(), 1);
        assert_eq!(w.items.len(), 5);
        w.validate().unwrap();
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let cfg = tiny_config();
        let a = serde_json::to_string(&generate_world(&cfg, 7).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_world(&cfg, 7).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_produce_distinct_worlds() {
        // Derived check: no collisions across 100 adjacent seed pairs.
        let cfg = tiny_config();
        for s in 0..100u64 {
            let a = serde_json::to_string(&generate_world(&cfg, s).unwrap()).unwrap();
            let b = serde_json::to_string(&generate_world(&cfg, s + 1).unwrap()).unwrap();
            assert_ne!(a, b, "seed pair ({s},{}) collided", s + 1);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = tiny_config();
        cfg.users = 0;
        assert!(matches!(generate_world(&cfg, 1), Err(Error::Config(_))));

        let mut cfg = tiny_config();
        cfg.categories[0].exit_after_conversion = 0.2;
        cfg.categories[0].exit_without_conversion = 0.4;
        assert!(matches!(generate_world(&cfg, 1), Err(Error::Config(_))));

        let mut cfg = tiny_config();
        cfg.categories[0].fstage_comparison_bonus = 0.1;
        assert!(matches!(generate_world(&cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn zero_match_hits_cvr_floor() {
        let mut cfg = tiny_config();
        cfg.categories[0].quality_range = [0.0, 0.0];
        let w = generate_world(&cfg, 7).unwrap();
        let user = &w.users[0];
        let probs = true_scores(&w, user, ItemId(0), ScoreContext::default()).unwrap();
        let expected = w.categories[0].base_cvr * w.behavior.cvr_floor;
        assert!((probs.cvr - expected).abs() < 1e-15);
    }

    #[test]
    fn forced_exit_mixture_gives_zero_sdr() {
        // exit_after = 1, exit_without = 0, cvr forced to 1 => sdr = 0.
        let mut cfg = tiny_config();
        cfg.categories[0].base_cvr = 1.0;
        cfg.categories[0].exit_after_conversion = 1.0;
        cfg.categories[0].exit_without_conversion = 0.0;
        cfg.categories[0].quality_range = [1.0, 1.0];
        cfg.affinity_range = [1.0, 1.0];
        cfg.behavior.cvr_floor = 1.0;
        // exit_after > exit_without still holds (1 > 0)
        let w = generate_world(&cfg, 7).unwrap();
        let probs = true_scores(&w, &w.users[0], ItemId(0), ScoreContext::default()).unwrap();
        assert!((probs.cvr - 1.0).abs() < 1e-15);
        assert!(probs.sdr.abs() < 1e-15);
    }

    #[test]
    fn unknown_ids_are_lookup_errors() {
        let w = generate_world(&tiny_config(), 7).unwrap();
        let user = w.users[0].clone();
        assert!(matches!(
            true_scores(&w, &user, ItemId(99), ScoreContext::default()),
            Err(Error::Lookup(_))
        ));
        let mut ghost = user;
        ghost.user_id = UserId(42);
        assert!(matches!(
            true_scores(&w, &ghost, ItemId(0), ScoreContext::default()),
            Err(Error::Lookup(_))
        ));
    }

    #[test]
    fn vtr_is_antitone_in_threshold() {
        let w = generate_world(&tiny_config(), 7).unwrap();
        let probs = true_scores(&w, &w.users[0], ItemId(1), ScoreContext::default()).unwrap();
        let v2 = probs.vtr(2.0);
        let v5 = probs.vtr(5.0);
        let v25 = probs.vtr(25.0);
        assert!(v2 > v5 && v5 > v25);
        assert!((0.0..=1.0).contains(&v2));
    }

    #[test]
    fn comparison_bonus_raises_cvr_up_to_cap() {
        let mut cfg = tiny_config();
        cfg.categories[0].involvement = Involvement::HighInvolvement;
        cfg.categories[0].fstage_comparison_bonus = 0.1;
        cfg.behavior.comparison_bonus_cap = 0.15;
        let w = generate_world(&cfg, 7).unwrap();
        let base = true_scores(&w, &w.users[0], ItemId(0), ScoreContext::default())
            .unwrap()
            .cvr;
        let one = true_scores(&w, &w.users[0], ItemId(0), ScoreContext { comparison_count: 1 })
            .unwrap()
            .cvr;
        let many = true_scores(&w, &w.users[0], ItemId(0), ScoreContext { comparison_count: 9 })
            .unwrap()
            .cvr;
        assert!((one - base - 0.1).abs() < 1e-12);
        assert!((many - base - 0.15).abs() < 1e-12, "bonus must cap at 0.15");
    }
}
