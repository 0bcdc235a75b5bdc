//! Measurement layer: rank correlations, exit-probability tables, hitrate,
//! session-level report aggregation and paired A/B lift computation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::worldsim::{ItemId, SessionLog, World};

/// Seconds a feed view must exceed to count as a valid item-detail view.
pub const IPV_VIEW_SECONDS: f64 = 2.0;

/// Default view-time bucket edges (seconds) for the correlation table.
pub const DEFAULT_BUCKET_EDGES: [f64; 3] = [2.0, 5.0, 25.0];

// --- rank correlation ----------------------------------------------------

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        for k in i..j {
            ranks[idx[k]] = mean_rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "correlation undefined for a constant input vector".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Input(format!(
            "spearman needs two equal-length vectors of size >= 2 (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRho {
    /// `[lo, hi)` in seconds; `hi` is `null` for the open top bucket.
    pub lo: f64,
    pub hi: Option<f64>,
    pub slots: usize,
    pub conversions: usize,
    /// `None` when the bucket is degenerate (constant labels or times).
    pub rho: Option<f64>,
}

/// Per-bucket Spearman correlation between slot conversion and view time.
/// Degenerate buckets are marked undefined rather than failing the table.
pub fn bucketed_spearman(
    slots: impl Iterator<Item = (f64, bool)>,
    edges: &[f64],
) -> Result<Vec<BucketRho>> {
    if edges.windows(2).any(|w| w[0] >= w[1]) || edges.iter().any(|e| *e <= 0.0) {
        return Err(Error::Input("bucket edges must be positive and increasing".into()));
    }
    let mut buckets: Vec<(Vec<f64>, Vec<f64>)> = vec![Default::default(); edges.len() + 1];
    for (t, conv) in slots {
        let b = edges.iter().position(|e| t < *e).unwrap_or(edges.len());
        buckets[b].0.push(t);
        buckets[b].1.push(conv as u8 as f64);
    }
    let mut out = Vec::with_capacity(buckets.len());
    for (i, (times, convs)) in buckets.iter().enumerate() {
        let lo = if i == 0 { 0.0 } else { edges[i - 1] };
        let hi = edges.get(i).copied();
        let rho = if times.len() >= 2 {
            spearman_rho(convs, times).ok()
        } else {
            None
        };
        out.push(BucketRho {
            lo,
            hi,
            slots: times.len(),
            conversions: convs.iter().filter(|c| **c > 0.0).count(),
            rho,
        });
    }
    Ok(out)
}

// --- exit probability table ----------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRow {
    pub within_pvs: u32,
    pub p_exit_not_converted: f64,
    pub p_exit_converted: f64,
    pub slots_not_converted: usize,
    pub slots_converted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTable {
    pub rows: Vec<ExitRow>,
    pub first_slots_only: bool,
}

/// P(exit within k views | slot conversion status) over exposed feed slots.
///
/// Exit means leaving by non-swipe at a position in `[pos, pos+k-1]`;
/// sessions that run off the end of the slate count as not exited (censored).
pub fn exit_probability_table(
    sessions: &[SessionLog],
    windows: &[u32],
    first_slots_only: bool,
) -> Result<ExitTable> {
    if sessions.is_empty() {
        return Err(Error::Input("exit table needs at least one session".into()));
    }
    let mut rows = Vec::with_capacity(windows.len());
    for &k in windows {
        if k == 0 {
            return Err(Error::Input("exit windows are 1-based".into()));
        }
        let mut counts = [[0usize; 2]; 2]; // [converted][exited]
        for s in sessions {
            let exit_pos = s
                .exposed_slots()
                .find(|slot| !slot.swiped_down)
                .map(|slot| slot.position);
            for slot in s.exposed_slots() {
                if first_slots_only && slot.position != 1 {
                    continue;
                }
                let exited_within =
                    exit_pos.is_some_and(|e| e >= slot.position && e < slot.position + k);
                counts[slot.converted as usize][exited_within as usize] += 1;
            }
        }
        let rate = |c: [usize; 2]| {
            let total = c[0] + c[1];
            if total == 0 {
                f64::NAN
            } else {
                c[1] as f64 / total as f64
            }
        };
        rows.push(ExitRow {
            within_pvs: k,
            p_exit_not_converted: rate(counts[0]),
            p_exit_converted: rate(counts[1]),
            slots_not_converted: counts[0][0] + counts[0][1],
            slots_converted: counts[1][0] + counts[1][1],
        });
    }
    Ok(ExitTable {
        rows,
        first_slots_only,
    })
}

// --- hitrate ---------------------------------------------------------------

/// `|top-k(a) ∩ top-k(b)| / k`: set agreement of the two lists' prefixes.
pub fn hitrate_at_k(a: &[ItemId], b: &[ItemId], k: usize) -> Result<f64> {
    if k == 0 || k > a.len() || k > b.len() {
        return Err(Error::Input(format!(
            "k = {k} out of range for lists of {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sa: BTreeSet<ItemId> = a[..k].iter().copied().collect();
    let hits = b[..k].iter().filter(|id| sa.contains(id)).count();
    Ok(hits as f64 / k as f64)
}

// --- session-level report ---------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CategoryBreakdown {
    pub ipv_f: u64,
    pub purchases: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sessions: u64,
    /// Feed slots viewed longer than 2 seconds.
    pub ipv_f: u64,
    /// Homepage clicks.
    pub ipv_e: u64,
    /// All purchases: detail-page plus feed conversions.
    pub purchases: u64,
    pub purchases_e: u64,
    pub purchases_f: u64,
    /// Mean daily active users across the world's day span.
    pub dau_proxy: f64,
    /// Mean exposed position of converting feed slots, when any.
    pub depth_at_conversion: Option<f64>,
    pub per_category: BTreeMap<String, CategoryBreakdown>,
}

/// Aggregate a batch of session logs into the standard report.
pub fn session_metrics(logs: &[SessionLog], world: &World) -> Result<MetricReport> {
    if logs.is_empty() {
        return Err(Error::Input("cannot build a report from zero sessions".into()));
    }
    let mut report = MetricReport {
        sessions: logs.len() as u64,
        ipv_f: 0,
        ipv_e: 0,
        purchases: 0,
        purchases_e: 0,
        purchases_f: 0,
        dau_proxy: 0.0,
        depth_at_conversion: None,
        per_category: BTreeMap::new(),
    };
    let mut daily_users: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    let mut depth_sum = 0u64;
    let mut depth_count = 0u64;

    for s in logs {
        daily_users.entry(s.day).or_default().insert(s.user_id.0);
        report.ipv_e += s.estage_outcome.clicked as u64;
        if s.estage_outcome.converted {
            report.purchases_e += 1;
            if let Some(trigger) = s.trigger_item_id {
                let cat = world.category(world.item(trigger)?.category_id)?;
                report.per_category.entry(cat.name.clone()).or_default().purchases += 1;
            }
        }
        for slot in s.exposed_slots() {
            let cat = world.category(world.item(slot.item_id)?.category_id)?;
            let entry = report.per_category.entry(cat.name.clone()).or_default();
            if slot.view_time_seconds > IPV_VIEW_SECONDS {
                report.ipv_f += 1;
                entry.ipv_f += 1;
            }
            if slot.converted {
                report.purchases_f += 1;
                entry.purchases += 1;
                depth_sum += slot.position as u64;
                depth_count += 1;
            }
        }
    }
    report.purchases = report.purchases_e + report.purchases_f;
    if depth_count > 0 {
        report.depth_at_conversion = Some(depth_sum as f64 / depth_count as f64);
    }
    let total_active: u64 = daily_users.values().map(|s| s.len() as u64).sum();
    report.dau_proxy = total_active as f64 / world.day_count as f64;
    Ok(report)
}

// --- paired lifts -----------------------------------------------------------

/// Paired statistics of per-replicate relative lifts `(a_i - b_i) / b_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedLift {
    pub replicates: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Mean of per-replicate relative lifts.
    pub rel_lift: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    /// One-sided t statistic for lift > 0.
    pub t_stat: f64,
    /// Replicates with strictly positive lift.
    pub wins: usize,
}

/// Paired lift of metric values across replicates. `None` when any baseline
/// replicate is zero (relative lift undefined).
pub fn paired_lift(a: &[f64], b: &[f64]) -> Result<Option<PairedLift>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Input("paired_lift needs equal non-empty vectors".into()));
    }
    if b.iter().any(|x| *x == 0.0) {
        return Ok(None);
    }
    let n = a.len();
    let lifts: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) / y).collect();
    let mean = lifts.iter().sum::<f64>() / n as f64;
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let wins = lifts.iter().filter(|l| **l > 0.0).count();
    if n == 1 {
        return Ok(Some(PairedLift {
            replicates: 1,
            mean_a,
            mean_b,
            rel_lift: mean,
            ci95_lo: mean,
            ci95_hi: mean,
            t_stat: 0.0,
            wins,
        }));
    }
    let var = lifts.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Input(format!("t distribution: {e}")))?;
    let q = t.inverse_cdf(0.975);
    let t_stat = if se > 0.0 { mean / se } else { 0.0 };
    Ok(Some(PairedLift {
        replicates: n,
        mean_a,
        mean_b,
        rel_lift: mean,
        ci95_lo: mean - q * se,
        ci95_hi: mean + q * se,
        t_stat,
        wins,
    }))
}

/// One-sided critical value for a paired t test at 95% confidence.
pub fn t_critical_95_one_sided(replicates: usize) -> f64 {
    let t = StudentsT::new(0.0, 1.0, (replicates - 1) as f64).expect("valid dof");
    t.inverse_cdf(0.95)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftTable {
    pub arm_a: String,
    pub arm_b: String,
    pub replicates: usize,
    /// Per-metric paired lifts; `None` where the baseline metric is zero.
    pub metrics: BTreeMap<String, Option<PairedLift>>,
}

/// Compare two arms' per-replicate reports (paired by index).
pub fn compare(
    arm_a: &str,
    reports_a: &[MetricReport],
    arm_b: &str,
    reports_b: &[MetricReport],
) -> Result<LiftTable> {
    if reports_a.len() != reports_b.len() || reports_a.is_empty() {
        return Err(Error::Input(
            "compare needs equally many reports per arm (paired replicates)".into(),
        ));
    }
    let mut metrics = BTreeMap::new();
    let field = |f: fn(&MetricReport) -> f64, reports: &[MetricReport]| -> Vec<f64> {
        reports.iter().map(f).collect()
    };
    let pairs: [(&str, fn(&MetricReport) -> f64); 5] = [
        ("ipv_f", |r| r.ipv_f as f64),
        ("ipv_e", |r| r.ipv_e as f64),
        ("purchases", |r| r.purchases as f64),
        ("dau_proxy", |r| r.dau_proxy),
        ("depth_at_conversion", |r| {
            r.depth_at_conversion.unwrap_or(0.0)
        }),
    ];
    for (name, f) in pairs {
        metrics.insert(
            name.to_string(),
            paired_lift(&field(f, reports_a), &field(f, reports_b))?,
        );
    }
    Ok(LiftTable {
        arm_a: arm_a.to_string(),
        arm_b: arm_b.to_string(),
        replicates: reports_a.len(),
        metrics,
    })
}

impl LiftTable {
    /// Aligned text rendering for terminals and logs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<22} {:>12} {:>12} {:>9} {:>20}\n",
            format!("{} vs {}", self.arm_a, self.arm_b),
            "mean A",
            "mean B",
            "lift",
            "95% CI"
        ));
        for (name, lift) in &self.metrics {
            match lift {
                Some(l) => out.push_str(&format!(
                    "{:<22} {:>12.3} {:>12.3} {:>8.2}% [{:>+7.2}%, {:>+7.2}%]\n",
                    name,
                    l.mean_a,
                    l.mean_b,
                    l.rel_lift * 100.0,
                    l.ci95_lo * 100.0,
                    l.ci95_hi * 100.0
                )),
                None => out.push_str(&format!("{name:<22} (baseline is zero; lift undefined)\n")),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::{EStageOutcome, ExitPoint, SlotOutcome, UserId};

    #[test]
    fn spearman_perfect_and_reverse() {
        let x = vec![1.0, 2.0, 5.0, 9.0, 11.0];
        let y_rev: Vec<f64> = x.iter().rev().copied().collect();
        assert!((spearman_rho(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&x, &y_rev).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_constant_vector_errors() {
        let x = vec![3.0, 3.0, 3.0];
        let y = vec![1.0, 2.0, 3.0];
        assert!(matches!(spearman_rho(&x, &y), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spearman_tie_handling_matches_known_value() {
        // x has a tie; average ranks give a hand-computable value.
        let x = vec![1.0, 2.0, 2.0, 4.0];
        let y = vec![10.0, 20.0, 30.0, 40.0];
        // ranks x: 1, 2.5, 2.5, 4; ranks y: 1,2,3,4
        let rho = spearman_rho(&x, &y).unwrap();
        let expect = pearson(&[1.0, 2.5, 2.5, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((rho - expect).abs() < 1e-15);
    }

    fn slot(pos: u32, t: f64, conv: bool, swiped: bool) -> SlotOutcome {
        SlotOutcome {
            position: pos,
            item_id: ItemId(pos),
            view_time_seconds: t,
            converted: conv,
            swiped_down: swiped,
            exposed: true,
        }
    }

    fn session(slots: Vec<SlotOutcome>, clicked: bool) -> SessionLog {
        let entered = !slots.is_empty();
        let exited_at = slots
            .iter()
            .find(|s| !s.swiped_down)
            .map(|s| ExitPoint::Position(s.position))
            .or(if entered { Some(ExitPoint::EndOfList) } else { None });
        SessionLog {
            v: 1,
            user_id: UserId(0),
            day: 1,
            session_index: 0,
            trigger_item_id: if clicked { Some(ItemId(0)) } else { None },
            estage_outcome: EStageOutcome {
                impressions: vec![ItemId(0)],
                clicked,
                converted: false,
                entered_fstage: entered,
            },
            fstage_slots: slots,
            exited_at,
        }
    }

    #[test]
    fn exit_table_forced_columns() {
        // Conversions always exit immediately.
        let sessions = vec![
            session(vec![slot(1, 3.0, true, false)], true),
            session(vec![slot(1, 3.0, false, true), slot(2, 3.0, true, false)], true),
        ];
        let table = exit_probability_table(&sessions, &[1, 3, 5], false).unwrap();
        for row in &table.rows {
            assert_eq!(row.p_exit_converted, 1.0);
        }
        // Single 1-slot session: immediate exit cell is 1.0.
        let single = vec![session(vec![slot(1, 1.0, false, false)], true)];
        let t = exit_probability_table(&single, &[1], false).unwrap();
        assert_eq!(t.rows[0].p_exit_not_converted, 1.0);
    }

    #[test]
    fn exit_windows_nest() {
        let sessions = vec![session(
            vec![
                slot(1, 3.0, false, true),
                slot(2, 3.0, false, true),
                slot(3, 3.0, false, false),
            ],
            true,
        )];
        let table = exit_probability_table(&sessions, &[1, 3, 5], false).unwrap();
        let p: Vec<f64> = table.rows.iter().map(|r| r.p_exit_not_converted).collect();
        assert!(p[0] <= p[1] && p[1] <= p[2]);
        assert_eq!(p[1], 1.0); // all three slots see the exit within 3
    }

    #[test]
    fn hitrate_basics() {
        let a: Vec<ItemId> = (0..10).map(ItemId).collect();
        let rev: Vec<ItemId> = a.iter().rev().copied().collect();
        for k in 1..=10 {
            assert_eq!(hitrate_at_k(&a, &a, k).unwrap(), 1.0);
        }
        assert_eq!(hitrate_at_k(&a, &rev, 10).unwrap(), 1.0);
        assert_eq!(hitrate_at_k(&a, &rev, 1).unwrap(), 0.0);
        let disjoint: Vec<ItemId> = (100..110).map(ItemId).collect();
        assert_eq!(hitrate_at_k(&a, &disjoint, 5).unwrap(), 0.0);
        // symmetry
        assert_eq!(
            hitrate_at_k(&a, &rev, 3).unwrap(),
            hitrate_at_k(&rev, &a, 3).unwrap()
        );
    }

    #[test]
    fn report_hand_count() {
        use crate::worldsim::{generate_world, BehaviorParams, CategorySpec, Involvement, WorldConfig};
        let cfg = WorldConfig {
            seed: 1,
            users: 1,
            day_count: 1,
            affinity_range: [0.5, 0.5],
            patience_range: [0.5, 0.5],
            return_propensity_range: [0.5, 0.5],
            behavior: BehaviorParams::default(),
            categories: vec![CategorySpec {
                name: "c".into(),
                items: 6,
                involvement: Involvement::Standard,
                quality_range: [0.5, 0.5],
                base_cvr: 0.1,
                view_time_median_seconds: 4.0,
                view_time_sigma: 0.9,
                view_time_affinity_gain: 0.9,
                conversion_view_shift: 1.3,
                exit_after_conversion: 0.6,
                exit_without_conversion: 0.2,
                fstage_comparison_bonus: 0.0,
            }],
        };
        let world = generate_world(&cfg, 1).unwrap();
        // 3 exposed slots with T = 1, 3, 10 and one conversion at slot 3.
        let s = session(
            vec![
                slot(1, 1.0, false, true),
                slot(2, 3.0, false, true),
                slot(3, 10.0, true, false),
            ],
            true,
        );
        let report = session_metrics(&[s], &world).unwrap();
        assert_eq!(report.ipv_f, 2);
        assert_eq!(report.ipv_e, 1);
        assert_eq!(report.purchases, 1);
        assert_eq!(report.depth_at_conversion, Some(3.0));
        assert_eq!(report.dau_proxy, 1.0);
    }

    #[test]
    fn identical_arms_have_zero_lift() {
        use crate::worldsim::{generate_world, BehaviorParams, CategorySpec, Involvement, WorldConfig};
        let cfg = WorldConfig {
            seed: 1,
            users: 1,
            day_count: 1,
            affinity_range: [0.5, 0.5],
            patience_range: [0.5, 0.5],
            return_propensity_range: [0.5, 0.5],
            behavior: BehaviorParams::default(),
            categories: vec![CategorySpec {
                name: "c".into(),
                items: 6,
                involvement: Involvement::Standard,
                quality_range: [0.5, 0.5],
                base_cvr: 0.1,
                view_time_median_seconds: 4.0,
                view_time_sigma: 0.9,
                view_time_affinity_gain: 0.9,
                conversion_view_shift: 1.3,
                exit_after_conversion: 0.6,
                exit_without_conversion: 0.2,
                fstage_comparison_bonus: 0.0,
            }],
        };
        let world = generate_world(&cfg, 1).unwrap();
        let s = session(vec![slot(1, 5.0, true, false)], true);
        let r = session_metrics(&[s], &world).unwrap();
        let table = compare("a", &[r.clone(), r.clone()], "b", &[r.clone(), r]).unwrap();
        for lift in table.metrics.values().flatten() {
            assert_eq!(lift.rel_lift, 0.0);
        }
    }

    #[test]
    fn empty_logs_refused() {
        use crate::worldsim::{generate_world, BehaviorParams, CategorySpec, Involvement, WorldConfig};
        let cfg = WorldConfig {
            seed: 1,
            users: 1,
            day_count: 1,
            affinity_range: [0.5, 0.5],
            patience_range: [0.5, 0.5],
            return_propensity_range: [0.5, 0.5],
            behavior: BehaviorParams::default(),
            categories: vec![CategorySpec {
                name: "c".into(),
                items: 6,
                involvement: Involvement::Standard,
                quality_range: [0.5, 0.5],
                base_cvr: 0.1,
                view_time_median_seconds: 4.0,
                view_time_sigma: 0.9,
                view_time_affinity_gain: 0.9,
                conversion_view_shift: 1.3,
                exit_after_conversion: 0.6,
                exit_without_conversion: 0.2,
                fstage_comparison_bonus: 0.0,
            }],
        };
        let world = generate_world(&cfg, 1).unwrap();
        assert!(session_metrics(&[], &world).is_err());
    }

    #[test]
    fn null_bucket_correlation_is_noise() {
        // T independent of conversion: every bucket rho within ±3 sigma of 0.
        use rand::Rng;
        let mut rng = crate::rng::stream(5, &[crate::rng::tag::ORACLE, 1]);
        let slots: Vec<(f64, bool)> = (0..200_000)
            .map(|_| {
                let t = (rng.gen::<f64>() * 3.0).exp();
                let conv = rng.gen::<f64>() < 0.05;
                (t, conv)
            })
            .collect();
        let table = bucketed_spearman(slots.into_iter(), &DEFAULT_BUCKET_EDGES).unwrap();
        for b in table {
            if let Some(rho) = b.rho {
                let sigma = 1.0 / (b.slots as f64).sqrt();
                assert!(
                    rho.abs() < 3.0 * sigma,
                    "bucket [{}, {:?}) rho {} exceeds 3 sigma {}",
                    b.lo,
                    b.hi,
                    rho,
                    3.0 * sigma
                );
            }
        }
    }
}
