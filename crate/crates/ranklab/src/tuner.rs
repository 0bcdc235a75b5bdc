//! Black-box search over ensemble weights.
//!
//! The objective is the sum of per-objective AUCs of the *combined* ensemble
//! score against each feed objective's labels — the only reading under which
//! the weights can move the target at all. Probe #1 is always the default
//! weights, so "tuned beats default" holds by construction and any further
//! probes can only improve the best.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::Objective;
use crate::predictor::{auc, ObjectiveScores};
use crate::ranker::EnsembleWeights;
use crate::rng::{self, tag};

/// Tunable parameters. `Alpha` scales the homepage look-ahead term and is
/// searched only when the config asks for it; it does not move the AUC-sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneParam {
    W1,
    W2,
    W3,
    Alpha,
}

impl TuneParam {
    pub fn name(&self) -> &'static str {
        match self {
            TuneParam::W1 => "w1",
            TuneParam::W2 => "w2",
            TuneParam::W3 => "w3",
            TuneParam::Alpha => "alpha",
        }
    }

    fn default_value(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TuneMethod {
    #[default]
    Random,
    Coordinate,
    BayesLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSpec {
    /// Per-parameter search boxes `[lo, hi]`.
    pub space: BTreeMap<TuneParam, [f64; 2]>,
    pub budget: usize,
    #[serde(default)]
    pub method: TuneMethod,
    pub seed: u64,
}

impl TuneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("tune budget must be >= 1".into()));
        }
        if self.space.is_empty() {
            return Err(Error::Config("tune space must name at least one parameter".into()));
        }
        for (p, [lo, hi]) in &self.space {
            if lo >= hi || *lo < 0.0 {
                return Err(Error::Config(format!(
                    "tune space for {} must satisfy 0 <= lo < hi",
                    p.name()
                )));
            }
        }
        Ok(())
    }
}

/// One candidate point in the search space.
pub type ProbePoint = BTreeMap<TuneParam, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub probe: usize,
    pub point: ProbePoint,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    /// Winning ensemble weights, simplex-normalized.
    pub best_weights: EnsembleWeights,
    pub best_alpha: Option<f64>,
    pub best_objective: f64,
    pub default_objective: f64,
    pub trace: Vec<TraceEntry>,
}

/// Precomputed validation set: per feed objective, the predicted score
/// triples with labels and sample weights.
#[derive(Debug, Clone, Default)]
pub struct ValidationSet {
    per_objective: BTreeMap<Objective, Vec<(ObjectiveScores, u8, f64)>>,
}

impl ValidationSet {
    pub fn insert(&mut self, objective: Objective, scores: ObjectiveScores, label: u8, weight: f64) {
        self.per_objective
            .entry(objective)
            .or_default()
            .push((scores, label, weight));
    }

    pub fn len(&self) -> usize {
        self.per_objective.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        for objective in [Objective::Vtr, Objective::Cvr, Objective::Sdr] {
            let rows = self.per_objective.get(&objective).ok_or_else(|| {
                Error::Degenerate(format!("validation set missing objective {objective}"))
            })?;
            let pos = rows.iter().filter(|(_, y, w)| *y == 1 && *w > 0.0).count();
            let neg = rows.iter().filter(|(_, y, w)| *y == 0 && *w > 0.0).count();
            if pos == 0 || neg == 0 {
                return Err(Error::Degenerate(format!(
                    "objective {objective}: validation needs positives and negatives"
                )));
            }
        }
        Ok(())
    }
}

fn point_weights(point: &ProbePoint) -> EnsembleWeights {
    EnsembleWeights {
        w1: point.get(&TuneParam::W1).copied().unwrap_or(1.0),
        w2: point.get(&TuneParam::W2).copied().unwrap_or(1.0),
        w3: point.get(&TuneParam::W3).copied().unwrap_or(1.0),
    }
}

/// AUC-sum objective: ensemble score vs each feed objective's labels.
pub fn tune_objective(weights: &EnsembleWeights, validation: &ValidationSet) -> Result<f64> {
    validation.validate()?;
    weights.validate()?;
    let mut total = 0.0;
    for objective in [Objective::Vtr, Objective::Cvr, Objective::Sdr] {
        let rows = &validation.per_objective[&objective];
        let scores: Vec<f64> = rows
            .iter()
            .map(|(s, _, _)| crate::ranker::item_value(s, weights))
            .collect();
        let labels: Vec<u8> = rows.iter().map(|(_, y, _)| *y).collect();
        let sample_weights: Vec<f64> = rows.iter().map(|(_, _, w)| *w).collect();
        total += auc(&scores, &labels, &sample_weights).map_err(|e| {
            Error::Degenerate(format!("objective {objective}: {e}"))
        })?;
    }
    Ok(total)
}

fn default_point(spec: &TuneSpec) -> ProbePoint {
    spec.space
        .keys()
        .map(|p| (*p, p.default_value()))
        .collect()
}

fn random_point(spec: &TuneSpec, rng: &mut impl Rng) -> ProbePoint {
    spec.space
        .iter()
        .map(|(p, [lo, hi])| (*p, rng.gen_range(*lo..*hi)))
        .collect()
}

/// Deterministic probe schedule for the coordinate method: sweep each
/// parameter over an even grid around the incumbent, cycling parameters.
fn coordinate_schedule(spec: &TuneSpec) -> Vec<(TuneParam, f64)> {
    const GRID: usize = 9;
    let mut out = Vec::new();
    for (p, [lo, hi]) in &spec.space {
        for g in 0..GRID {
            let x = lo + (hi - lo) * (g as f64 + 0.5) / GRID as f64;
            out.push((*p, x));
        }
    }
    out
}

/// Quadratic surrogate fit per parameter (independent 1-d fits over the
/// trace), optimized over a random candidate cloud.
fn surrogate_candidate(
    spec: &TuneSpec,
    trace: &[TraceEntry],
    rng: &mut impl Rng,
) -> ProbePoint {
    let mut best: Option<(f64, ProbePoint)> = None;
    for _ in 0..256 {
        let cand = random_point(spec, rng);
        let mut predicted = 0.0;
        for (p, &x) in &cand {
            // Fit y ~ a + b x + c x^2 by least squares over the trace.
            let pts: Vec<(f64, f64)> = trace
                .iter()
                .filter_map(|t| t.point.get(p).map(|v| (*v, t.objective)))
                .collect();
            predicted += quad_fit_at(&pts, x);
        }
        if best.as_ref().is_none_or(|(b, _)| predicted > *b) {
            best = Some((predicted, cand));
        }
    }
    best.expect("candidate cloud is non-empty").1
}

fn quad_fit_at(pts: &[(f64, f64)], x: f64) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 3 {
        return pts.iter().map(|(_, y)| y).sum::<f64>() / n.max(1.0);
    }
    // Normal equations for [a, b, c] on 1, x, x^2.
    let (mut s1, mut sx, mut sx2, mut sx3, mut sx4) = (n, 0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0);
    for (xi, yi) in pts {
        sx += xi;
        sx2 += xi * xi;
        sx3 += xi * xi * xi;
        sx4 += xi * xi * xi * xi;
        sy += yi;
        sxy += xi * yi;
        sx2y += xi * xi * yi;
    }
    // Ridge for stability.
    let eps = 1e-9;
    s1 += eps;
    sx2 += eps;
    sx4 += eps;
    let m = [[s1, sx, sx2], [sx, sx2, sx3], [sx2, sx3, sx4]];
    let rhs = [sy, sxy, sx2y];
    match solve3(m, rhs) {
        Some([a, b, c]) => a + b * x + c * x * x,
        None => sy / n,
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    Some([b[0] / m[0][0], b[1] / m[1][1], b[2] / m[2][2]])
}

/// Run the search. The probe sequence is fully determined by `(spec, seed)`,
/// so a larger budget extends (never rewrites) a smaller one.
pub fn tune(spec: &TuneSpec, validation: &ValidationSet) -> Result<TuneResult> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[tag::TUNE]);
    let schedule = coordinate_schedule(spec);

    let mut trace: Vec<TraceEntry> = Vec::with_capacity(spec.budget);
    let mut default_objective = 0.0;
    for probe in 0..spec.budget {
        let point = if probe == 0 {
            default_point(spec)
        } else {
            match spec.method {
                TuneMethod::Random => random_point(spec, &mut rng),
                TuneMethod::Coordinate => {
                    let (p, x) = schedule[(probe - 1) % schedule.len()];
                    let mut best_point = trace
                        .iter()
                        .max_by(|a, b| a.objective.total_cmp(&b.objective))
                        .map(|t| t.point.clone())
                        .unwrap_or_else(|| default_point(spec));
                    best_point.insert(p, x);
                    best_point
                }
                TuneMethod::BayesLike => {
                    // Warm up with random probes, then alternate surrogate
                    // argmax and exploration.
                    if probe < 16 || probe % 4 == 0 {
                        random_point(spec, &mut rng)
                    } else {
                        surrogate_candidate(spec, &trace, &mut rng)
                    }
                }
            }
        };
        let objective = tune_objective(&point_weights(&point), validation)?;
        if probe == 0 {
            default_objective = objective;
        }
        trace.push(TraceEntry {
            probe,
            point,
            objective,
        });
    }

    let best = trace
        .iter()
        .max_by(|a, b| a.objective.total_cmp(&b.objective).then(b.probe.cmp(&a.probe)))
        .expect("budget >= 1");
    Ok(TuneResult {
        best_weights: point_weights(&best.point).normalized(),
        best_alpha: best.point.get(&TuneParam::Alpha).copied(),
        best_objective: best.objective,
        default_objective,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_validation() -> ValidationSet {
        // cvr label tracks the cvr score; vtr/sdr labels are noisy copies of
        // their scores. Higher w2 should raise the cvr AUC term.
        let mut v = ValidationSet::default();
        let mut rng = rng::stream(3, &[tag::ORACLE, 7]);
        for _ in 0..400 {
            let s = ObjectiveScores::feed(rng.gen(), rng.gen(), rng.gen());
            v.insert(Objective::Cvr, s, (s.cvr > 0.5) as u8, 1.0);
            v.insert(Objective::Vtr, s, (s.vtr + 0.3 * rng.gen::<f64>() > 0.6) as u8, 1.0);
            v.insert(Objective::Sdr, s, (s.sdr + 0.3 * rng.gen::<f64>() > 0.6) as u8, 1.0);
        }
        v
    }

    fn spec(budget: usize, method: TuneMethod, seed: u64) -> TuneSpec {
        let mut space = BTreeMap::new();
        space.insert(TuneParam::W1, [0.0, 2.0]);
        space.insert(TuneParam::W2, [0.0, 2.0]);
        space.insert(TuneParam::W3, [0.0, 2.0]);
        TuneSpec {
            space,
            budget,
            method,
            seed,
        }
    }

    #[test]
    fn objective_is_bounded_and_projection_matches_plain_auc() {
        let v = synthetic_validation();
        let only_cvr = EnsembleWeights { w1: 0.0, w2: 1.0, w3: 0.0 };
        let obj = tune_objective(&only_cvr, &v).unwrap();
        assert!(obj > 0.0 && obj <= 3.0);

        // cvr term equals AUC(cvr score, cvr labels) = 1 by construction.
        let rows = &v.per_objective[&Objective::Cvr];
        let scores: Vec<f64> = rows.iter().map(|(s, _, _)| s.cvr).collect();
        let labels: Vec<u8> = rows.iter().map(|(_, y, _)| *y).collect();
        let weights: Vec<f64> = rows.iter().map(|(_, _, w)| *w).collect();
        let direct = auc(&scores, &labels, &weights).unwrap();
        assert_eq!(direct, 1.0);
    }

    #[test]
    fn objective_is_scale_invariant() {
        let v = synthetic_validation();
        let w = EnsembleWeights { w1: 0.4, w2: 1.1, w3: 0.2 };
        let scaled = EnsembleWeights { w1: 0.8, w2: 2.2, w3: 0.4 };
        let a = tune_objective(&w, &v).unwrap();
        let b = tune_objective(&scaled, &v).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn budget_one_returns_defaults() {
        let v = synthetic_validation();
        let result = tune(&spec(1, TuneMethod::Random, 5), &v).unwrap();
        assert_eq!(result.trace.len(), 1);
        assert_eq!(result.best_objective, result.default_objective);
    }

    #[test]
    fn collapsed_space_pins_the_point() {
        let v = synthetic_validation();
        let mut s = spec(8, TuneMethod::Random, 5);
        for bounds in s.space.values_mut() {
            *bounds = [0.499999, 0.500001];
        }
        let result = tune(&s, &v).unwrap();
        for t in &result.trace[1..] {
            for x in t.point.values() {
                assert!((x - 0.5).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn tuned_never_loses_to_defaults_and_traces_are_reproducible() {
        let v = synthetic_validation();
        for method in [TuneMethod::Random, TuneMethod::Coordinate, TuneMethod::BayesLike] {
            let s = spec(60, method, 11);
            let a = tune(&s, &v).unwrap();
            let b = tune(&s, &v).unwrap();
            assert!(a.best_objective >= a.default_objective);
            assert_eq!(
                serde_json::to_string(&a.trace).unwrap(),
                serde_json::to_string(&b.trace).unwrap()
            );
        }
    }

    #[test]
    fn budget_prefix_property() {
        let v = synthetic_validation();
        let small = tune(&spec(20, TuneMethod::Random, 9), &v).unwrap();
        let large = tune(&spec(60, TuneMethod::Random, 9), &v).unwrap();
        assert_eq!(
            serde_json::to_string(&small.trace).unwrap(),
            serde_json::to_string(&large.trace[..20]).unwrap()
        );
        assert!(large.best_objective >= small.best_objective);
    }

    #[test]
    fn normalized_weights_reported() {
        let v = synthetic_validation();
        let result = tune(&spec(30, TuneMethod::Random, 2), &v).unwrap();
        let w = result.best_weights;
        assert!((w.w1 + w.w2 + w.w3 - 1.0).abs() < 1e-12);
    }
}
