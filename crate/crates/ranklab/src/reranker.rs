//! Permutation-level re-ranking of feed slates.
//!
//! A slate's value is the sum of per-slot item values discounted by exposure
//! probability, where exposure decomposes into a running product of the
//! preceding slots' swipe-down probabilities. Generation is beam search;
//! `brute_force_best` enumerates every permutation and is the exact oracle
//! the beam is tested against.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::ObjectiveScores;
use crate::ranker::{item_value, EnsembleWeights};
use crate::worldsim::ItemId;

/// Default cap on enumerated permutations for the brute-force oracle.
pub const DEFAULT_PERMUTATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_width: usize,
    /// Slate length m.
    pub m: usize,
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 || self.m == 0 {
            return Err(Error::Config("beam_width and m must be >= 1".into()));
        }
        Ok(())
    }
}

/// An evaluated permutation: items, per-position exposure, total value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlateEvaluation {
    pub permutation: Vec<ItemId>,
    pub exposure_probs: Vec<f64>,
    pub sequence_value: f64,
}

/// Exposure probabilities from per-position swipe-down probabilities:
/// `p[i] = prod_{k<i} sdr[k]`, so `p[0] = 1` always.
pub fn exposure_probs(sdr_by_position: &[f64]) -> Result<Vec<f64>> {
    let mut p = Vec::with_capacity(sdr_by_position.len());
    let mut acc = 1.0;
    for (i, &s) in sdr_by_position.iter().enumerate() {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Input(format!("sdr[{i}] out of [0,1]: {s}")));
        }
        p.push(acc);
        acc *= s;
    }
    Ok(p)
}

/// Candidate set addressed by id, with precomputed item values; the shared
/// substrate for evaluation, enumeration and beam search.
pub struct SlatePool {
    ids: Vec<ItemId>,
    values: Vec<f64>,
    sdrs: Vec<f64>,
}

impl SlatePool {
    /// Build from scored candidates. Candidates are ordered by ascending id
    /// internally so index order equals the deterministic tie-break order.
    pub fn new(candidates: &[(ItemId, ObjectiveScores)], weights: &EnsembleWeights) -> Result<Self> {
        weights.validate()?;
        let mut sorted: Vec<&(ItemId, ObjectiveScores)> = candidates.iter().collect();
        sorted.sort_by_key(|(id, _)| *id);
        for pair in sorted.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Input(format!(
                    "duplicate candidate item {}",
                    pair[0].0 .0
                )));
            }
        }
        let mut ids = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut sdrs = Vec::with_capacity(sorted.len());
        for (id, scores) in sorted {
            if !(0.0..=1.0).contains(&scores.sdr) {
                return Err(Error::Input(format!(
                    "item {} sdr out of [0,1]: {}",
                    id.0, scores.sdr
                )));
            }
            ids.push(*id);
            values.push(item_value(scores, weights));
            sdrs.push(scores.sdr);
        }
        Ok(Self { ids, values, sdrs })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn index_of(&self, id: ItemId) -> Result<usize> {
        self.ids
            .binary_search(&id)
            .map_err(|_| Error::Lookup(format!("item {} not in candidate set", id.0)))
    }

    fn evaluate_indices(&self, perm: &[usize]) -> SlateEvaluation {
        let mut exposure = Vec::with_capacity(perm.len());
        let mut acc = 1.0;
        let mut value = 0.0;
        for &i in perm {
            exposure.push(acc);
            value += acc * self.values[i];
            acc *= self.sdrs[i];
        }
        SlateEvaluation {
            permutation: perm.iter().map(|&i| self.ids[i]).collect(),
            exposure_probs: exposure,
            sequence_value: value,
        }
    }
}

/// Evaluate one explicit permutation against scored candidates.
pub fn sequence_value(
    permutation: &[ItemId],
    candidates: &[(ItemId, ObjectiveScores)],
    weights: &EnsembleWeights,
) -> Result<SlateEvaluation> {
    if permutation.is_empty() {
        return Err(Error::Input("permutation must be non-empty".into()));
    }
    let pool = SlatePool::new(candidates, weights)?;
    let mut seen = vec![false; pool.len()];
    let mut indices = Vec::with_capacity(permutation.len());
    for &id in permutation {
        let i = pool.index_of(id)?;
        if seen[i] {
            return Err(Error::Input(format!("duplicate item {} in permutation", id.0)));
        }
        seen[i] = true;
        indices.push(i);
    }
    Ok(pool.evaluate_indices(&indices))
}

fn permutation_count(n: usize, m: usize) -> u128 {
    ((n - m + 1)..=n).map(|x| x as u128).product()
}

/// Exact argmax over all ordered m-selections; ties resolve to the
/// lexicographically smallest item-id sequence.
pub fn brute_force_best(
    candidates: &[(ItemId, ObjectiveScores)],
    m: usize,
    weights: &EnsembleWeights,
    cap: Option<u128>,
) -> Result<SlateEvaluation> {
    let pool = SlatePool::new(candidates, weights)?;
    if m == 0 || m > pool.len() {
        return Err(Error::Input(format!(
            "m = {m} out of range for {} candidates",
            pool.len()
        )));
    }
    let cap = cap.unwrap_or(DEFAULT_PERMUTATION_CAP);
    let count = permutation_count(pool.len(), m);
    if count > cap {
        return Err(Error::PermutationCap {
            requested: count,
            cap,
        });
    }

    // itertools yields permutations in lexicographic index order, so the
    // first strict maximum is automatically the smallest-id tie winner.
    let mut best: Option<SlateEvaluation> = None;
    for perm in (0..pool.len()).permutations(m) {
        let eval = pool.evaluate_indices(&perm);
        match &best {
            Some(b) if eval.sequence_value <= b.sequence_value => {}
            _ => best = Some(eval),
        }
    }
    Ok(best.expect("at least one permutation"))
}

#[derive(Clone)]
struct Partial {
    items: Vec<usize>,
    used: u64,
    value: f64,
    exposure: f64,
}

/// Beam search over slate prefixes. Prefixes are scored with exactly the
/// same discounted value as full evaluation; at each length only the top
/// `beam_width` survive (value descending, then lexicographic items).
pub fn beam_search(
    candidates: &[(ItemId, ObjectiveScores)],
    config: &BeamConfig,
    weights: &EnsembleWeights,
) -> Result<SlateEvaluation> {
    config.validate()?;
    let pool = SlatePool::new(candidates, weights)?;
    if pool.len() < config.m {
        return Err(Error::Input(format!(
            "need at least m = {} candidates, got {}",
            config.m,
            pool.len()
        )));
    }
    if pool.len() > 64 {
        return Err(Error::Input(
            "beam search supports up to 64 candidates per request".into(),
        ));
    }

    let mut beam = vec![Partial {
        items: Vec::new(),
        used: 0,
        value: 0.0,
        exposure: 1.0,
    }];
    for _ in 0..config.m {
        let mut next = Vec::with_capacity(beam.len() * pool.len());
        for partial in &beam {
            for i in 0..pool.len() {
                if partial.used & (1 << i) != 0 {
                    continue;
                }
                let mut items = partial.items.clone();
                items.push(i);
                next.push(Partial {
                    items,
                    used: partial.used | (1 << i),
                    value: partial.value + partial.exposure * pool.values[i],
                    exposure: partial.exposure * pool.sdrs[i],
                });
            }
        }
        next.sort_by(|a, b| {
            b.value
                .total_cmp(&a.value)
                .then_with(|| a.items.cmp(&b.items))
        });
        next.truncate(config.beam_width);
        beam = next;
    }

    let best = &beam[0];
    Ok(pool.evaluate_indices(&best.items))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(id: u32, v_as_cvr: f64, sdr: f64) -> (ItemId, ObjectiveScores) {
        // With weights (0,1,0) the item value equals the cvr slot below.
        (ItemId(id), ObjectiveScores::feed(0.0, v_as_cvr, sdr))
    }

    const VALUE_ONLY: EnsembleWeights = EnsembleWeights { w1: 0.0, w2: 1.0, w3: 0.0 };

    #[test]
    fn exposure_probs_basics() {
        let p = exposure_probs(&[0.5, 0.5, 0.9]).unwrap();
        assert_eq!(p, vec![1.0, 0.5, 0.25]);
        let p0 = exposure_probs(&[0.7, 0.0, 0.8, 0.6]).unwrap();
        assert_eq!(p0, vec![1.0, 0.7, 0.0, 0.0]);
        let ones = exposure_probs(&[1.0, 1.0, 1.0]).unwrap();
        assert!(ones.iter().all(|&x| x == 1.0));
        assert!(exposure_probs(&[1.2]).is_err());
    }

    #[test]
    fn single_item_slate_has_no_discount() {
        let c = vec![cand(0, 0.37, 0.2)];
        let eval = sequence_value(&[ItemId(0)], &c, &VALUE_ONLY).unwrap();
        assert_eq!(eval.sequence_value, 0.37);
        assert_eq!(eval.exposure_probs, vec![1.0]);
    }

    #[test]
    fn greedy_trap_hand_example() {
        // A: value 1, always swiped; B: value 1, always exits.
        let c = vec![cand(0, 1.0, 1.0), cand(1, 1.0, 0.0)];
        let ab = sequence_value(&[ItemId(0), ItemId(1)], &c, &VALUE_ONLY).unwrap();
        let ba = sequence_value(&[ItemId(1), ItemId(0)], &c, &VALUE_ONLY).unwrap();
        assert_eq!(ab.sequence_value, 2.0);
        assert_eq!(ba.sequence_value, 1.0);
    }

    #[test]
    fn duplicates_rejected() {
        let c = vec![cand(0, 0.5, 0.5), cand(1, 0.4, 0.6)];
        assert!(sequence_value(&[ItemId(0), ItemId(0)], &c, &VALUE_ONLY).is_err());
        let dup_pool = vec![cand(0, 0.5, 0.5), cand(0, 0.4, 0.6)];
        assert!(SlatePool::new(&dup_pool, &VALUE_ONLY).is_err());
    }

    #[test]
    fn brute_force_trivial_and_tie_break() {
        let single = vec![cand(7, 0.3, 0.5)];
        let best = brute_force_best(&single, 1, &VALUE_ONLY, None).unwrap();
        assert_eq!(best.permutation, vec![ItemId(7)]);

        // Identical scores: every permutation ties; lexicographically
        // smallest id sequence must win.
        let same = vec![cand(4, 0.5, 0.5), cand(2, 0.5, 0.5), cand(9, 0.5, 0.5)];
        let best = brute_force_best(&same, 2, &VALUE_ONLY, None).unwrap();
        assert_eq!(best.permutation, vec![ItemId(2), ItemId(4)]);
    }

    #[test]
    fn brute_force_cap_refuses() {
        let many: Vec<_> = (0..12).map(|i| cand(i, 0.1, 0.5)).collect();
        let err = brute_force_best(&many, 8, &VALUE_ONLY, Some(1000)).unwrap_err();
        assert!(matches!(err, Error::PermutationCap { .. }));
    }

    #[test]
    fn beam_one_is_greedy_by_partial_value() {
        // Greedy by partial V picks the high-value exit item first.
        let c = vec![cand(0, 0.9, 0.1), cand(1, 0.8, 0.95), cand(2, 0.2, 0.9)];
        let greedy = beam_search(&c, &BeamConfig { beam_width: 1, m: 2 }, &VALUE_ONLY).unwrap();
        assert_eq!(greedy.permutation[0], ItemId(0));
        // A wide beam escapes the trap.
        let wide = beam_search(&c, &BeamConfig { beam_width: 16, m: 2 }, &VALUE_ONLY).unwrap();
        let brute = brute_force_best(&c, 2, &VALUE_ONLY, None).unwrap();
        assert_eq!(wide.permutation, brute.permutation);
        assert!(wide.sequence_value > greedy.sequence_value);
    }

    #[test]
    fn unpruned_beam_equals_brute_force() {
        let c = vec![
            cand(0, 0.12, 0.8),
            cand(1, 0.3, 0.2),
            cand(2, 0.05, 0.99),
            cand(3, 0.2, 0.5),
            cand(4, 0.08, 0.9),
        ];
        let brute = brute_force_best(&c, 3, &VALUE_ONLY, None).unwrap();
        let beam = beam_search(&c, &BeamConfig { beam_width: 100_000, m: 3 }, &VALUE_ONLY).unwrap();
        assert_eq!(brute.permutation, beam.permutation);
        assert!((brute.sequence_value - beam.sequence_value).abs() < 1e-12);
    }

    #[test]
    fn prefix_value_consistency() {
        let c = vec![cand(0, 0.4, 0.7), cand(1, 0.2, 0.9), cand(2, 0.6, 0.3)];
        let full = sequence_value(&[ItemId(2), ItemId(0), ItemId(1)], &c, &VALUE_ONLY).unwrap();
        let prefix = sequence_value(&[ItemId(2), ItemId(0)], &c, &VALUE_ONLY).unwrap();
        let last_term = full.exposure_probs[2] * 0.2;
        assert!((full.sequence_value - prefix.sequence_value - last_term).abs() < 1e-15);
    }
}
