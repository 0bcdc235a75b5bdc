//! Session and day simulation.
//!
//! One session walks the two-stage funnel: the user scans a ranked homepage
//! list top-down (cascade click), views the clicked item's detail page (where
//! an immediate purchase may happen), optionally swipes into the immersive
//! feed, and then consumes feed slots sequentially until the first non-swipe.
//!
//! Each session owns a dedicated rng stream keyed by
//! `(replicate_seed, user, day, session_index)`, so two policy arms replay the
//! same randomness until their rankings actually change an outcome.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

use super::{true_scores, ItemId, ScoreContext, UserId, UserProfile, World};

/// Current session-log schema version (serialized as top-level `v`).
pub const SESSION_SCHEMA_VERSION: u32 = 1;

pub const FSTAGE_RANKER_CONTRACT: &str =
    "fstage ranker must return exactly `slate_len` distinct items drawn from the pool";

/// One immersive-feed slot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    /// 1-based slate position.
    pub position: u32,
    pub item_id: ItemId,
    pub view_time_seconds: f64,
    pub converted: bool,
    pub swiped_down: bool,
    pub exposed: bool,
}

/// Homepage-stage outcome. `impressions` is the examined prefix of the ranked
/// list; when `clicked`, its last entry is the trigger item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EStageOutcome {
    pub impressions: Vec<ItemId>,
    pub clicked: bool,
    /// Detail-page purchase of the trigger item.
    pub converted: bool,
    pub entered_fstage: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitPoint {
    Position(u32),
    EndOfList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub v: u32,
    pub user_id: UserId,
    pub day: u32,
    pub session_index: u32,
    pub trigger_item_id: Option<ItemId>,
    pub estage_outcome: EStageOutcome,
    pub fstage_slots: Vec<SlotOutcome>,
    pub exited_at: Option<ExitPoint>,
}

impl SessionLog {
    pub fn exposed_slots(&self) -> impl Iterator<Item = &SlotOutcome> {
        self.fstage_slots.iter().filter(|s| s.exposed)
    }

    /// Total purchases in this session (detail page + feed slots).
    pub fn purchases(&self) -> u32 {
        let f: u32 = self.exposed_slots().map(|s| s.converted as u32).sum();
        f + self.estage_outcome.converted as u32
    }

    /// Feed-side valid views: exposed slots watched longer than `threshold`.
    pub fn ipv_f(&self, threshold_seconds: f64) -> u32 {
        self.exposed_slots()
            .filter(|s| s.view_time_seconds > threshold_seconds)
            .count() as u32
    }
}

/// Immersive-feed request geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    /// Items returned per feed request (the slate length m).
    pub slate_len: usize,
    /// Candidate pool size per feed request.
    pub fpool_size: usize,
    /// Fraction of the pool drawn from the trigger's category.
    pub fpool_same_category: f64,
}

impl SessionParams {
    pub fn validate(&self) -> Result<()> {
        if self.slate_len == 0 || self.fpool_size < self.slate_len {
            return Err(Error::Config(
                "session params need slate_len >= 1 and fpool_size >= slate_len".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.fpool_same_category) {
            return Err(Error::Config("fpool_same_category out of [0,1]".into()));
        }
        Ok(())
    }
}

/// Ranking policy plugged into the simulator. Implementations must be pure
/// given their inputs; the simulator owns all randomness.
pub trait SessionPolicy: Sync {
    /// Order the homepage candidate pool; only the returned prefix is shown.
    fn rank_estage(&self, world: &World, user: &UserProfile, pool: &[ItemId])
        -> Result<Vec<ItemId>>;

    /// Pick and order exactly `slate_len` feed items from the pool.
    fn rank_fstage(
        &self,
        world: &World,
        user: &UserProfile,
        trigger: ItemId,
        pool: &[ItemId],
    ) -> Result<Vec<ItemId>>;
}

/// Sample `count` distinct entries from `base` (stable base order, seeded
/// partial shuffle). Consumes rng draws proportional to `count`.
fn sample_items(base: &mut Vec<ItemId>, count: usize, rng: &mut ChaCha8Rng) -> Vec<ItemId> {
    let take = count.min(base.len());
    let (picked, _) = base.partial_shuffle(rng, take);
    picked.to_vec()
}

/// Build the feed candidate pool for a trigger item: a same-category quota
/// topped up with items from sibling categories.
pub fn build_fstage_pool(
    world: &World,
    trigger: ItemId,
    params: &SessionParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ItemId>> {
    let trigger_item = world.item(trigger)?;
    let same_quota =
        ((params.fpool_size as f64) * params.fpool_same_category).round() as usize;

    let mut same = world.category_items(trigger_item.category_id, Some(trigger));
    let mut pool = sample_items(&mut same, same_quota.min(params.fpool_size), rng);

    if pool.len() < params.fpool_size {
        let mut others: Vec<ItemId> = world
            .items
            .iter()
            .filter(|i| i.category_id != trigger_item.category_id)
            .map(|i| i.item_id)
            .collect();
        let mut extra = sample_items(&mut others, params.fpool_size - pool.len(), rng);
        pool.append(&mut extra);
    }
    pool.sort_unstable();
    Ok(pool)
}

/// Simulate one session for `user` given a pre-ranked homepage list and a
/// feed ranker callback.
pub fn simulate_session(
    world: &World,
    user: &UserProfile,
    ranked_estage: &[ItemId],
    fstage_ranker: &mut dyn FnMut(ItemId, &[ItemId]) -> Result<Vec<ItemId>>,
    params: &SessionParams,
    rng: &mut ChaCha8Rng,
) -> Result<SessionLog> {
    if ranked_estage.is_empty() {
        return Err(Error::Input("ranked_estage must be non-empty".into()));
    }
    params.validate()?;

    let mut log = SessionLog {
        v: SESSION_SCHEMA_VERSION,
        user_id: user.user_id,
        day: 0,
        session_index: 0,
        trigger_item_id: None,
        estage_outcome: EStageOutcome {
            impressions: Vec::new(),
            clicked: false,
            converted: false,
            entered_fstage: false,
        },
        fstage_slots: Vec::new(),
        exited_at: None,
    };

    // Cascade scan: examine top-down, stop at the first attractive item.
    let mut trigger = None;
    for &item in ranked_estage {
        log.estage_outcome.impressions.push(item);
        let probs = true_scores(world, user, item, ScoreContext::default())?;
        if rng.gen::<f64>() < probs.ctr {
            trigger = Some(item);
            break;
        }
    }
    let Some(trigger) = trigger else {
        return Ok(log);
    };
    log.estage_outcome.clicked = true;
    log.trigger_item_id = Some(trigger);

    let trigger_probs = true_scores(world, user, trigger, ScoreContext::default())?;
    log.estage_outcome.converted = rng.gen::<f64>() < trigger_probs.cvr;
    log.estage_outcome.entered_fstage = rng.gen::<f64>() < trigger_probs.sdr_star;
    if !log.estage_outcome.entered_fstage {
        return Ok(log);
    }

    let pool = build_fstage_pool(world, trigger, params, rng)?;
    let slate = fstage_ranker(trigger, &pool)?;
    validate_slate(&slate, &pool, params.slate_len)?;

    // Same-category views so far, keyed by category; the trigger's detail
    // page counts as one view of its category.
    let trigger_cat = world.item(trigger)?.category_id;
    let mut views_by_cat: BTreeMap<u16, u32> = BTreeMap::new();
    views_by_cat.insert(trigger_cat.0, 1);

    let mut exited: Option<ExitPoint> = None;
    for (idx, &item_id) in slate.iter().enumerate() {
        let position = idx as u32 + 1;
        if exited.is_some() {
            log.fstage_slots.push(SlotOutcome {
                position,
                item_id,
                view_time_seconds: 0.0,
                converted: false,
                swiped_down: false,
                exposed: false,
            });
            continue;
        }

        let item = world.item(item_id)?;
        let comparison_count = *views_by_cat.get(&item.category_id.0).unwrap_or(&0);
        let probs = true_scores(world, user, item_id, ScoreContext { comparison_count })?;
        let cat = world.category(item.category_id)?;

        let converted = rng.gen::<f64>() < probs.cvr;
        let z: f64 = rng.sample(StandardNormal);
        let mu = cat.view_time.median_seconds.ln()
            + cat.view_time.affinity_gain * world.theta(user, item)
            + if converted { cat.conversion_view_shift } else { 0.0 };
        let view_time_seconds = (mu + cat.view_time.sigma * z).exp();

        let exit_p = if converted {
            cat.exit_after_conversion
        } else {
            cat.exit_without_conversion * (1.0 - user.patience * world.theta(user, item))
        };
        let swiped_down = rng.gen::<f64>() >= exit_p;

        *views_by_cat.entry(item.category_id.0).or_insert(0) += 1;
        log.fstage_slots.push(SlotOutcome {
            position,
            item_id,
            view_time_seconds,
            converted,
            swiped_down,
            exposed: true,
        });
        if !swiped_down {
            exited = Some(ExitPoint::Position(position));
        }
    }
    log.exited_at = Some(exited.unwrap_or(ExitPoint::EndOfList));
    Ok(log)
}

fn validate_slate(slate: &[ItemId], pool: &[ItemId], expected: usize) -> Result<()> {
    if slate.len() != expected {
        return Err(Error::Contract(format!(
            "{FSTAGE_RANKER_CONTRACT}: got {} items, expected {expected}",
            slate.len()
        )));
    }
    let pool_set: HashSet<ItemId> = pool.iter().copied().collect();
    let mut seen = HashSet::with_capacity(slate.len());
    for id in slate {
        if !pool_set.contains(id) {
            return Err(Error::Contract(format!(
                "{FSTAGE_RANKER_CONTRACT}: item {} not in pool",
                id.0
            )));
        }
        if !seen.insert(*id) {
            return Err(Error::Contract(format!(
                "{FSTAGE_RANKER_CONTRACT}: duplicate item {}",
                id.0
            )));
        }
    }
    Ok(())
}

/// Day-level simulation geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayParams {
    pub sessions_per_user: u32,
    /// Homepage candidate pool size sampled from the whole corpus.
    pub estage_pool: usize,
    /// Homepage list length actually shown (top of the policy's ranking).
    pub estage_list: usize,
    pub session: SessionParams,
}

impl DayParams {
    pub fn validate(&self, world: &World) -> Result<()> {
        self.session.validate()?;
        if self.sessions_per_user == 0 {
            return Err(Error::Config("sessions_per_user must be >= 1".into()));
        }
        if self.estage_list == 0 || self.estage_pool < self.estage_list {
            return Err(Error::Config(
                "need estage_pool >= estage_list >= 1".into(),
            ));
        }
        if self.estage_pool > world.items.len() {
            return Err(Error::Config(format!(
                "estage_pool {} exceeds corpus size {}",
                self.estage_pool,
                world.items.len()
            )));
        }
        // The feed ranker must always be able to fill a slate after the
        // trigger is excluded from its own category.
        for cat in &world.categories {
            let n = world.items.iter().filter(|i| i.category_id == cat.category_id).count();
            if n < self.session.slate_len + 1 {
                return Err(Error::Config(format!(
                    "category `{}` has {n} items; need at least slate_len + 1 = {}",
                    cat.name,
                    self.session.slate_len + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DayResult {
    pub sessions: Vec<SessionLog>,
    pub active_users: BTreeSet<UserId>,
}

/// Next-day return probability. `propensity` passes through unchanged when
/// satisfaction or coupling is zero.
pub fn return_probability(propensity: f64, coupling: f64, satisfaction: f64) -> f64 {
    if propensity >= 1.0 {
        return 1.0;
    }
    if propensity <= 0.0 {
        return 0.0;
    }
    let logit = (propensity / (1.0 - propensity)).ln();
    let z = logit + coupling * satisfaction;
    1.0 / (1.0 + (-z).exp())
}

/// Per-user satisfaction from one day of sessions: a linear blend of valid
/// views and purchases.
pub fn satisfaction_by_user(world: &World, sessions: &[SessionLog]) -> BTreeMap<UserId, f64> {
    let b = &world.behavior;
    let mut out: BTreeMap<UserId, f64> = BTreeMap::new();
    for s in sessions {
        let ipv = s.ipv_f(2.0) + s.estage_outcome.clicked as u32;
        let sat = b.satisfaction_ipv_weight * ipv as f64
            + b.satisfaction_purchase_weight * s.purchases() as f64;
        *out.entry(s.user_id).or_insert(0.0) += sat;
    }
    out
}

/// Simulate one day under a policy. Activity draws share a stream across
/// arms, so a higher-satisfaction arm activates a (weak) superset of users.
pub fn simulate_day(
    world: &World,
    policy: &dyn SessionPolicy,
    day: u32,
    prev_satisfaction: &BTreeMap<UserId, f64>,
    replicate_seed: u64,
    params: &DayParams,
) -> Result<DayResult> {
    if day == 0 {
        return Err(Error::Input("days are 1-based".into()));
    }
    params.validate(world)?;

    let per_user: Vec<(UserId, Vec<SessionLog>)> = world
        .users
        .par_iter()
        .map(|user| -> Result<Option<(UserId, Vec<SessionLog>)>> {
            let uid = user.user_id;
            let mut activity = rng::stream(replicate_seed, &[tag::ACTIVITY, uid.0 as u64, day as u64]);
            let sat = prev_satisfaction.get(&uid).copied().unwrap_or(0.0);
            let p = return_probability(user.return_propensity, world.behavior.return_coupling, sat);
            if activity.gen::<f64>() >= p {
                return Ok(None);
            }

            let mut sessions = Vec::with_capacity(params.sessions_per_user as usize);
            for s in 0..params.sessions_per_user {
                let mut srng = rng::stream(
                    replicate_seed,
                    &[tag::SESSION, uid.0 as u64, day as u64, s as u64],
                );
                let mut corpus: Vec<ItemId> = world.items.iter().map(|i| i.item_id).collect();
                let pool = sample_items(&mut corpus, params.estage_pool, &mut srng);
                let ranked = policy.rank_estage(world, user, &pool)?;
                let shown: Vec<ItemId> =
                    ranked.into_iter().take(params.estage_list).collect();
                let mut ranker = |trigger: ItemId, fpool: &[ItemId]| {
                    policy.rank_fstage(world, user, trigger, fpool)
                };
                let mut log = simulate_session(
                    world,
                    user,
                    &shown,
                    &mut ranker,
                    &params.session,
                    &mut srng,
                )?;
                log.day = day;
                log.session_index = s;
                sessions.push(log);
            }
            Ok(Some((uid, sessions)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut result = DayResult {
        sessions: Vec::new(),
        active_users: BTreeSet::new(),
    };
    for (uid, mut sessions) in per_user {
        result.active_users.insert(uid);
        result.sessions.append(&mut sessions);
    }
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub sessions: Vec<SessionLog>,
    pub daily_active: Vec<u32>,
}

/// Simulate `days` consecutive days with day-to-day return coupling.
pub fn simulate_days(
    world: &World,
    policy: &dyn SessionPolicy,
    days: u32,
    replicate_seed: u64,
    params: &DayParams,
) -> Result<SimulationRun> {
    let mut sessions = Vec::new();
    let mut daily_active = Vec::with_capacity(days as usize);
    let mut prev_sat = BTreeMap::new();
    for day in 1..=days {
        let mut dr = simulate_day(world, policy, day, &prev_sat, replicate_seed, params)?;
        prev_sat = satisfaction_by_user(world, &dr.sessions);
        daily_active.push(dr.active_users.len() as u32);
        sessions.append(&mut dr.sessions);
    }
    Ok(SimulationRun {
        sessions,
        daily_active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::{
        generate_world, BehaviorParams, CategorySpec, Involvement, WorldConfig,
    };

    pub(crate) fn test_config(categories: usize, items: u32) -> WorldConfig {
        WorldConfig {
            seed: 11,
            users: 6,
            day_count: 3,
            affinity_range: [0.1, 0.9],
            patience_range: [0.3, 0.8],
            return_propensity_range: [0.4, 0.7],
            behavior: BehaviorParams::default(),
            categories: (0..categories)
                .map(|i| CategorySpec {
                    name: format!("cat{i}"),
                    items,
                    involvement: Involvement::Standard,
                    quality_range: [0.1, 0.9],
                    base_cvr: 0.08,
                    view_time_median_seconds: 4.0,
                    view_time_sigma: 0.9,
                    view_time_affinity_gain: 0.9,
                    conversion_view_shift: 1.4,
                    exit_after_conversion: 0.7,
                    exit_without_conversion: 0.25,
                    fstage_comparison_bonus: 0.0,
                })
                .collect(),
        }
    }

    struct IdentityPolicy;
    impl SessionPolicy for IdentityPolicy {
        fn rank_estage(&self, _: &World, _: &UserProfile, pool: &[ItemId]) -> Result<Vec<ItemId>> {
            let mut v = pool.to_vec();
            v.sort_unstable();
            Ok(v)
        }
        fn rank_fstage(
            &self,
            _: &World,
            _: &UserProfile,
            _: ItemId,
            pool: &[ItemId],
        ) -> Result<Vec<ItemId>> {
            let mut v = pool.to_vec();
            v.sort_unstable();
            v.truncate(4);
            Ok(v)
        }
    }

    fn day_params() -> DayParams {
        DayParams {
            sessions_per_user: 2,
            estage_pool: 10,
            estage_list: 5,
            session: SessionParams {
                slate_len: 4,
                fpool_size: 8,
                fpool_same_category: 0.75,
            },
        }
    }

    #[test]
    fn zero_ctr_means_no_click() {
        let mut cfg = test_config(1, 8);
        cfg.behavior.estage_ctr_base = 0.0;
        cfg.behavior.estage_ctr_gain = 0.0;
        let world = generate_world(&cfg, 11).unwrap();
        let user = world.users[0].clone();
        let list: Vec<ItemId> = (0..5).map(ItemId).collect();
        let mut ranker = |_: ItemId, pool: &[ItemId]| Ok(pool[..4].to_vec());
        let mut r = rng::stream(1, &[tag::SESSION, 0, 1, 0]);
        let log = simulate_session(
            &world,
            &user,
            &list,
            &mut ranker,
            &day_params().session,
            &mut r,
        )
        .unwrap();
        assert!(!log.estage_outcome.clicked);
        assert!(log.fstage_slots.is_empty());
        assert_eq!(log.estage_outcome.impressions.len(), 5);
    }

    #[test]
    fn certain_exit_exposes_exactly_one_slot() {
        let mut cfg = test_config(1, 8);
        // Force click and entry, and force exit at every slot.
        cfg.behavior.estage_ctr_base = 1.0;
        cfg.behavior.estage_ctr_gain = 0.0;
        cfg.behavior.estage_entry_base = 1.0;
        cfg.behavior.estage_entry_gain = 0.0;
        cfg.categories[0].exit_after_conversion = 1.0;
        cfg.categories[0].exit_without_conversion = 1.0 - 1e-12;
        cfg.patience_range = [0.0, 0.0];
        let world = generate_world(&cfg, 11).unwrap();
        let user = world.users[0].clone();
        let list = vec![ItemId(0)];
        let mut ranker = |_: ItemId, pool: &[ItemId]| Ok(pool[..4].to_vec());
        for s in 0..32 {
            let mut r = rng::stream(9, &[tag::SESSION, 0, 1, s]);
            let log = simulate_session(
                &world,
                &user,
                &list,
                &mut ranker,
                &day_params().session,
                &mut r,
            )
            .unwrap();
            assert!(log.estage_outcome.entered_fstage);
            assert_eq!(log.exposed_slots().count(), 1);
            assert_eq!(log.exited_at, Some(ExitPoint::Position(1)));
        }
    }

    #[test]
    fn wrong_slate_length_is_contract_violation() {
        let world = generate_world(&test_config(1, 8), 11).unwrap();
        let user = world.users[0].clone();
        let mut cfg = test_config(1, 8);
        cfg.behavior.estage_ctr_base = 1.0;
        cfg.behavior.estage_entry_base = 1.0;
        cfg.behavior.estage_entry_gain = 0.0;
        let world_forced = generate_world(&cfg, 11).unwrap();
        let list = vec![ItemId(0)];
        let mut bad = |_: ItemId, pool: &[ItemId]| Ok(pool[..2].to_vec());
        let mut r = rng::stream(9, &[tag::SESSION, 0, 1, 0]);
        let err = simulate_session(
            &world_forced,
            &user,
            &list,
            &mut bad,
            &day_params().session,
            &mut r,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        drop(world);
    }

    #[test]
    fn exposure_is_a_prefix_and_exit_is_last_exposed() {
        let world = generate_world(&test_config(2, 8), 11).unwrap();
        let params = day_params();
        let run = simulate_days(&world, &IdentityPolicy, 3, 5, &params).unwrap();
        assert!(!run.sessions.is_empty());
        for s in &run.sessions {
            if !s.estage_outcome.entered_fstage {
                assert!(s.fstage_slots.is_empty());
                continue;
            }
            let exposed: Vec<bool> = s.fstage_slots.iter().map(|x| x.exposed).collect();
            let first_gap = exposed.iter().position(|e| !e).unwrap_or(exposed.len());
            assert!(exposed[first_gap..].iter().all(|e| !e), "exposure must be a prefix");
            let non_swipes: Vec<u32> = s
                .exposed_slots()
                .filter(|x| !x.swiped_down)
                .map(|x| x.position)
                .collect();
            assert!(non_swipes.len() <= 1);
            if let Some(&p) = non_swipes.first() {
                assert_eq!(Some(ExitPoint::Position(p)), s.exited_at);
                assert_eq!(p as usize, first_gap);
            }
            for slot in &s.fstage_slots {
                assert!(!slot.swiped_down || slot.exposed);
            }
        }
    }

    #[test]
    fn sessions_are_deterministic_given_streams() {
        let world = generate_world(&test_config(2, 8), 11).unwrap();
        let params = day_params();
        let a = simulate_days(&world, &IdentityPolicy, 3, 5, &params).unwrap();
        let b = simulate_days(&world, &IdentityPolicy, 3, 5, &params).unwrap();
        let ja = serde_json::to_string(&a.sessions).unwrap();
        let jb = serde_json::to_string(&b.sessions).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn return_probability_identity_cases() {
        assert_eq!(return_probability(1.0, 2.0, 5.0), 1.0);
        assert_eq!(return_probability(0.0, 2.0, 5.0), 0.0);
        let rp = 0.37;
        assert!((return_probability(rp, 0.0, 123.0) - rp).abs() < 1e-12);
        assert!((return_probability(rp, 1.5, 0.0) - rp).abs() < 1e-12);
        assert!(return_probability(rp, 1.5, 1.0) > rp);
    }

    #[test]
    fn all_users_active_when_propensity_one() {
        let mut cfg = test_config(1, 12);
        cfg.return_propensity_range = [1.0, 1.0];
        let world = generate_world(&cfg, 11).unwrap();
        let dr = simulate_day(&world, &IdentityPolicy, 1, &BTreeMap::new(), 3, &day_params())
            .unwrap();
        assert_eq!(dr.active_users.len(), world.users.len());
    }
}
