//! Policy bundles: a named, self-contained ranking behavior for both funnel
//! stages, pluggable into the session simulator.

use crate::error::Result;
use crate::labels::LabelSpec;
use crate::predictor::{EStageScores, ModelScorer, ObjectiveScores, OracleScorer, Scorer};
use crate::ranker::{rank_estage, rank_pointwise, EnsembleWeights, RankingConfig};
use crate::reranker::{beam_search, BeamConfig};
use crate::rng;
use crate::worldsim::{ItemId, SessionPolicy, UserId, UserProfile, World};

/// How an arm scores candidates.
pub enum PolicyScorer {
    Oracle(OracleScorer),
    Model(Box<ModelScorer>),
    /// Deterministic hash-ordered ranking, independent of any score; used
    /// for exploration/bootstrap traffic.
    Random { salt: u64 },
}

pub struct PolicyBundle {
    pub name: String,
    pub scorer: PolicyScorer,
    pub weights: EnsembleWeights,
    pub ranking: RankingConfig,
    /// `Some` switches the feed stage to beam-search re-ranking.
    pub beam: Option<BeamConfig>,
    pub label_spec: LabelSpec,
}

impl PolicyBundle {
    fn hash_order(&self, salt_stream: u64, user: UserId, pool: &[ItemId]) -> Vec<ItemId> {
        let mut keyed: Vec<(u64, ItemId)> = pool
            .iter()
            .map(|&id| {
                (
                    rng::mix(salt_stream, &[user.0 as u64, id.0 as u64]),
                    id,
                )
            })
            .collect();
        keyed.sort_unstable();
        keyed.into_iter().map(|(_, id)| id).collect()
    }

    fn fstage_scores(
        &self,
        scorer: &dyn Scorer,
        world: &World,
        user: UserId,
        trigger: ItemId,
        pool: &[ItemId],
    ) -> Result<Vec<(ItemId, ObjectiveScores)>> {
        pool.iter()
            .map(|&id| Ok((id, scorer.fstage(world, user, id, trigger)?)))
            .collect()
    }

    fn estage_scores(
        &self,
        scorer: &dyn Scorer,
        world: &World,
        user: UserId,
        pool: &[ItemId],
    ) -> Result<Vec<(ItemId, EStageScores)>> {
        pool.iter()
            .map(|&id| Ok((id, scorer.estage(world, user, id)?)))
            .collect()
    }

    fn as_scorer(&self) -> Option<&dyn Scorer> {
        match &self.scorer {
            PolicyScorer::Oracle(s) => Some(s),
            PolicyScorer::Model(s) => Some(s.as_ref()),
            PolicyScorer::Random { .. } => None,
        }
    }

    /// Feed slate for one request: pointwise top-m or beam re-ranked.
    pub fn fstage_slate(
        &self,
        world: &World,
        user: UserId,
        trigger: ItemId,
        pool: &[ItemId],
    ) -> Result<Vec<ItemId>> {
        let m = self.ranking.m.min(pool.len());
        match &self.scorer {
            PolicyScorer::Random { salt } => {
                let mut order = self.hash_order(rng::mix(*salt, &[2]), user, pool);
                order.truncate(m);
                Ok(order)
            }
            _ => {
                let scorer = self.as_scorer().expect("scored policy");
                let scored = self.fstage_scores(scorer, world, user, trigger, pool)?;
                match &self.beam {
                    Some(beam) => {
                        let cfg = BeamConfig { m, ..*beam };
                        Ok(beam_search(&scored, &cfg, &self.weights)?.permutation)
                    }
                    None => Ok(rank_pointwise(&scored, &self.weights, m)?
                        .into_iter()
                        .map(|c| c.item_id)
                        .collect()),
                }
            }
        }
    }
}

impl SessionPolicy for PolicyBundle {
    fn rank_estage(
        &self,
        world: &World,
        user: &UserProfile,
        pool: &[ItemId],
    ) -> Result<Vec<ItemId>> {
        match &self.scorer {
            PolicyScorer::Random { salt } => {
                Ok(self.hash_order(rng::mix(*salt, &[1]), user.user_id, pool))
            }
            _ => {
                let scorer = self.as_scorer().expect("scored policy");
                let scored = self.estage_scores(scorer, world, user.user_id, pool)?;
                Ok(rank_estage(&scored, &self.ranking)?
                    .into_iter()
                    .map(|c| c.item_id)
                    .collect())
            }
        }
    }

    fn rank_fstage(
        &self,
        world: &World,
        user: &UserProfile,
        trigger: ItemId,
        pool: &[ItemId],
    ) -> Result<Vec<ItemId>> {
        self.fstage_slate(world, user.user_id, trigger, pool)
    }
}
