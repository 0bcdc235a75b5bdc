//! Point-wise ranking: linear objective ensemble for feed slots, and
//! immediate-vs-look-ahead ranking for the homepage stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{EStageScores, ObjectiveScores};
use crate::worldsim::ItemId;

/// Linear ensemble weights over (vtr, cvr, sdr).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl EnsembleWeights {
    pub const DEFAULT: EnsembleWeights = EnsembleWeights {
        w1: 1.0,
        w2: 1.0,
        w3: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        if self.w1 < 0.0 || self.w2 < 0.0 || self.w3 < 0.0 {
            return Err(Error::Config("ensemble weights must be non-negative".into()));
        }
        if self.w1 + self.w2 + self.w3 <= 0.0 {
            return Err(Error::Config("at least one ensemble weight must be > 0".into()));
        }
        Ok(())
    }

    /// Simplex-normalized copy (weights sum to 1).
    pub fn normalized(&self) -> EnsembleWeights {
        let sum = self.w1 + self.w2 + self.w3;
        EnsembleWeights {
            w1: self.w1 / sum,
            w2: self.w2 / sum,
            w3: self.w3 / sum,
        }
    }
}

/// Request geometry and look-ahead switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    /// Candidates per request.
    pub n: usize,
    /// Items returned to the user interface.
    pub m: usize,
    /// Homepage list length (top-K cut of the ranked candidates).
    pub k: usize,
    #[serde(default)]
    pub lookahead_enabled: bool,
    #[serde(default = "RankingConfig::default_alpha")]
    pub lookahead_coefficient: f64,
}

impl RankingConfig {
    fn default_alpha() -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n || self.k > self.n || self.k == 0 {
            return Err(Error::Config(format!(
                "ranking config needs 1 <= m <= n and 1 <= k <= n (n={}, m={}, k={})",
                self.n, self.m, self.k
            )));
        }
        if self.lookahead_coefficient < 0.0 {
            return Err(Error::Config("lookahead coefficient must be >= 0".into()));
        }
        Ok(())
    }
}

/// A candidate with its predicted scores and ensemble value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub item_id: ItemId,
    pub scores: ObjectiveScores,
    pub value: f64,
    /// Look-ahead funnel value; 0 when look-ahead is disabled.
    pub lookahead_value: f64,
}

/// Item value of one slot: `w1*vtr + w2*cvr + w3*sdr`.
pub fn item_value(scores: &ObjectiveScores, weights: &EnsembleWeights) -> f64 {
    weights.w1 * scores.vtr + weights.w2 * scores.cvr + weights.w3 * scores.sdr
}

fn sort_desc_by_value(list: &mut [ScoredCandidate]) {
    list.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
}

/// Rank candidates by descending ensemble value, ties broken by ascending
/// item id; returns the top `k`.
pub fn rank_pointwise(
    candidates: &[(ItemId, ObjectiveScores)],
    weights: &EnsembleWeights,
    k: usize,
) -> Result<Vec<ScoredCandidate>> {
    if candidates.is_empty() {
        return Err(Error::Input("rank_pointwise needs candidates".into()));
    }
    if k > candidates.len() {
        return Err(Error::Input(format!(
            "k = {k} exceeds candidate count {}",
            candidates.len()
        )));
    }
    weights.validate()?;
    let mut scored: Vec<ScoredCandidate> = candidates
        .iter()
        .map(|(id, s)| ScoredCandidate {
            item_id: *id,
            scores: *s,
            value: item_value(s, weights),
            lookahead_value: 0.0,
        })
        .collect();
    sort_desc_by_value(&mut scored);
    scored.truncate(k);
    Ok(scored)
}

/// Look-ahead funnel value: `ctr * sdr_star * cvr_star`.
pub fn lookahead_value(ctr: f64, sdr_star: f64, cvr_star: f64) -> Result<f64> {
    for (name, p) in [("ctr", ctr), ("sdr_star", sdr_star), ("cvr_star", cvr_star)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Input(format!("{name} out of [0,1]: {p}")));
        }
    }
    Ok(ctr * sdr_star * cvr_star)
}

/// Homepage ranking. With look-ahead disabled the score is the immediate
/// conversion probability alone; enabled, it becomes
/// `cvr + alpha * ctr * sdr_star * cvr_star`.
pub fn rank_estage(
    candidates: &[(ItemId, EStageScores)],
    config: &RankingConfig,
) -> Result<Vec<ScoredCandidate>> {
    if candidates.is_empty() {
        return Err(Error::Input("rank_estage needs candidates".into()));
    }
    config.validate()?;
    let k = config.k.min(candidates.len());

    let mut scored = Vec::with_capacity(candidates.len());
    for (id, s) in candidates {
        let la = if config.lookahead_enabled {
            let cvr_star = s.cvr_star.ok_or_else(|| Error::MissingHead("cvr_star".into()))?;
            lookahead_value(s.ctr, s.sdr_star, cvr_star)?
        } else {
            0.0
        };
        scored.push(ScoredCandidate {
            item_id: *id,
            scores: ObjectiveScores {
                vtr: 0.0,
                cvr: s.cvr,
                sdr: 0.0,
                ctr: Some(s.ctr),
                sdr_star: Some(s.sdr_star),
                cvr_star: s.cvr_star,
            },
            value: s.cvr + config.lookahead_coefficient * la,
            lookahead_value: la,
        });
    }
    sort_desc_by_value(&mut scored);
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(id: u32, vtr: f64, cvr: f64, sdr: f64) -> (ItemId, ObjectiveScores) {
        (ItemId(id), ObjectiveScores::feed(vtr, cvr, sdr))
    }

    #[test]
    fn item_value_is_the_weighted_sum() {
        let s = ObjectiveScores::feed(0.5, 0.1, 0.8);
        let v = item_value(&s, &EnsembleWeights { w1: 1.0, w2: 1.0, w3: 1.0 });
        assert!((v - 1.4).abs() < 1e-15);
        let proj = item_value(&s, &EnsembleWeights { w1: 0.0, w2: 1.0, w3: 0.0 });
        assert_eq!(proj, 0.1);
    }

    #[test]
    fn scaling_weights_preserves_order() {
        let cands = vec![feed(0, 0.2, 0.05, 0.9), feed(1, 0.7, 0.01, 0.3), feed(2, 0.4, 0.2, 0.5)];
        let w = EnsembleWeights { w1: 0.3, w2: 1.0, w3: 0.4 };
        let scaled = EnsembleWeights { w1: 0.9, w2: 3.0, w3: 1.2 };
        let a: Vec<ItemId> = rank_pointwise(&cands, &w, 3).unwrap().iter().map(|c| c.item_id).collect();
        let b: Vec<ItemId> = rank_pointwise(&cands, &scaled, 3).unwrap().iter().map(|c| c.item_id).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn pointwise_order_and_ties() {
        let cands = vec![feed(0, 0.3, 0.0, 0.0), feed(1, 0.9, 0.0, 0.0), feed(2, 0.1, 0.0, 0.0)];
        let w = EnsembleWeights { w1: 1.0, w2: 0.0, w3: 0.0 };
        let top: Vec<ItemId> = rank_pointwise(&cands, &w, 2).unwrap().iter().map(|c| c.item_id).collect();
        assert_eq!(top, vec![ItemId(1), ItemId(0)]);

        let tied = vec![feed(5, 0.5, 0.0, 0.0), feed(3, 0.5, 0.0, 0.0)];
        let order: Vec<ItemId> = rank_pointwise(&tied, &w, 2).unwrap().iter().map(|c| c.item_id).collect();
        assert_eq!(order, vec![ItemId(3), ItemId(5)], "ties break by ascending id");
    }

    #[test]
    fn lookahead_value_is_the_product() {
        assert!((lookahead_value(0.1, 0.5, 0.2).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(lookahead_value(0.0, 0.9, 0.9).unwrap(), 0.0);
        assert_eq!(lookahead_value(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!(lookahead_value(1.5, 0.2, 0.2).is_err());
    }

    #[test]
    fn estage_lookahead_breaks_immediate_ties() {
        let cands = vec![
            (
                ItemId(0),
                EStageScores { cvr: 0.1, ctr: 0.5, sdr_star: 0.5, cvr_star: Some(0.1) },
            ),
            (
                ItemId(1),
                EStageScores { cvr: 0.1, ctr: 0.5, sdr_star: 0.5, cvr_star: Some(0.9) },
            ),
        ];
        let cfg = RankingConfig {
            n: 2,
            m: 1,
            k: 2,
            lookahead_enabled: true,
            lookahead_coefficient: 1.0,
        };
        let ranked = rank_estage(&cands, &cfg).unwrap();
        assert_eq!(ranked[0].item_id, ItemId(1));

        let off = RankingConfig { lookahead_enabled: false, ..cfg };
        let ranked_off = rank_estage(&cands, &off).unwrap();
        assert_eq!(ranked_off[0].item_id, ItemId(0), "tie falls back to id order");
    }

    #[test]
    fn alpha_zero_equals_immediate_ranking() {
        let cands: Vec<(ItemId, EStageScores)> = (0..10)
            .map(|i| {
                (
                    ItemId(i),
                    EStageScores {
                        cvr: (i as f64 * 0.37).sin().abs() * 0.2,
                        ctr: 0.3,
                        sdr_star: 0.4,
                        cvr_star: Some((i as f64 * 0.11).cos().abs()),
                    },
                )
            })
            .collect();
        let on = RankingConfig { n: 10, m: 5, k: 10, lookahead_enabled: true, lookahead_coefficient: 0.0 };
        let off = RankingConfig { lookahead_enabled: false, ..on };
        let a: Vec<ItemId> = rank_estage(&cands, &on).unwrap().iter().map(|c| c.item_id).collect();
        let b: Vec<ItemId> = rank_estage(&cands, &off).unwrap().iter().map(|c| c.item_id).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn lookahead_needs_cvr_star() {
        let cands = vec![(
            ItemId(0),
            EStageScores { cvr: 0.1, ctr: 0.5, sdr_star: 0.5, cvr_star: None },
        )];
        let cfg = RankingConfig { n: 1, m: 1, k: 1, lookahead_enabled: true, lookahead_coefficient: 1.0 };
        let err = rank_estage(&cands, &cfg).unwrap_err();
        assert!(err.to_string().contains("cvr_star"));
    }
}
