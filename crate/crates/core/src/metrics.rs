//! Slate- and experiment-level metrics.
//!
//! Day series mirror the analyses the harness is built to reproduce:
//! relevance of served pages, novel-creator impressions/consumptions,
//! repeated exploration, unique clusters consumed per user, and an
//! active-user count driven by the return-propensity dynamics. Arm
//! comparisons are paired by user and reported as relative changes with
//! user-level bootstrap confidence intervals.

use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::divers::RankedSlate;
use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::sim::SessionLog;

/// Top-K summary of one served slate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlateMetrics {
    /// Distinct aligned intents in the top K over `min(K, n_intents)`.
    pub intent_coverage: f64,
    /// `exp(entropy)` of the intent-mass distribution of the top K.
    pub effective_intents: f64,
    /// Mean quality score of the top K.
    pub mean_relevance: f64,
    /// Novelty-flagged items in the top K.
    pub novel_impressions: u32,
}

/// Computes [`SlateMetrics`] over the first `k` items of a served page.
pub fn slate_metrics_for_items<'a>(
    items: impl Iterator<Item = &'a Candidate>,
    n_intents: usize,
    k: usize,
) -> SlateMetrics {
    let mut covered: Vec<bool> = vec![false; n_intents];
    let mut mass: Vec<f64> = vec![0.0; n_intents];
    let mut relevance_sum = 0.0;
    let mut novel = 0u32;
    let mut taken = 0usize;
    for c in items.take(k) {
        taken += 1;
        relevance_sum += c.quality;
        if c.novelty {
            novel += 1;
        }
        for &v in &c.aligned {
            covered[v as usize] = true;
            mass[v as usize] += 1.0;
        }
    }
    if taken == 0 {
        return SlateMetrics {
            intent_coverage: 0.0,
            effective_intents: 1.0,
            mean_relevance: 0.0,
            novel_impressions: 0,
        };
    }
    let distinct = covered.iter().filter(|&&c| c).count();
    let denom = taken.min(n_intents).max(1);
    let total_mass: f64 = mass.iter().sum();
    let entropy: f64 = mass
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| {
            let p = m / total_mass;
            -p * p.ln()
        })
        .sum();
    SlateMetrics {
        intent_coverage: distinct as f64 / denom as f64,
        effective_intents: entropy.exp(),
        mean_relevance: relevance_sum / taken as f64,
        novel_impressions: novel,
    }
}

/// Top-K metrics of a [`RankedSlate`] given the candidate set it ranked.
pub fn slate_metrics(
    slate: &RankedSlate,
    candidates: &[Candidate],
    n_intents: usize,
    k: usize,
) -> Result<SlateMetrics> {
    let mut by_id = std::collections::HashMap::with_capacity(candidates.len());
    for c in candidates {
        by_id.insert(c.item_id.as_str(), c);
    }
    let resolved: Vec<&Candidate> = slate
        .order
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("slate item `{id}` not in candidates")))
        })
        .collect::<Result<_>>()?;
    Ok(slate_metrics_for_items(resolved.into_iter(), n_intents, k))
}

/// One day of an experiment arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: u32,
    pub active_users: u32,
    pub consumption_count: u64,
    pub mean_relevance: f64,
    pub novel_impressions: u64,
    pub novel_consumptions: u64,
    pub novel_ctr: Option<f64>,
    /// Cumulative count of repeated-exploration pairs up to this day.
    pub repeated_exploration_count: u64,
    /// Mean distinct clusters consumed per user, cumulative to this day.
    pub unique_clusters_per_user: f64,
    pub intent_coverage: f64,
    pub effective_intents: f64,
    /// Mean day-satisfaction over users active this day.
    pub satisfaction_mean: f64,
}

/// Whole-horizon aggregates of an experiment arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Mean active users per day.
    pub dau_proxy: f64,
    pub consumption_count: u64,
    pub mean_relevance: f64,
    pub novel_impressions: u64,
    pub novel_consumptions: u64,
    pub novel_ctr: Option<f64>,
    pub repeated_exploration: u64,
    pub unique_clusters_per_user: f64,
    pub intent_coverage: f64,
    pub effective_intents: f64,
    pub satisfaction_mean: f64,
}

/// Per-user totals retained for paired bootstrap comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStats {
    pub user_id: u32,
    pub active_days: u32,
    pub pages: u32,
    pub consumptions: u32,
    pub novel_impressions: u32,
    pub novel_consumptions: u32,
    pub repeated_exploration: u32,
    pub unique_clusters: u32,
    pub relevance_sum: f64,
    pub satisfaction_sum: f64,
}

/// Metric series and aggregates of one simulated arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub arm: String,
    pub n_days: u32,
    pub days: Vec<DayMetrics>,
    pub aggregates: Aggregates,
    pub per_user: Vec<UserStats>,
    /// Intent-model predictions issued while serving.
    pub model_calls: u64,
    /// Times the intent model was retrained between days.
    pub train_invocations: u32,
}

/// Number of (user, creator) pairs where the creator was novel at the user's
/// first consumption and was consumed at least twice over the horizon.
pub fn repeated_exploration(logs: &[SessionLog]) -> u64 {
    use std::collections::BTreeMap;
    let mut pairs: BTreeMap<(u32, u32), (bool, u32)> = BTreeMap::new();
    for log in logs {
        if let Some(c) = &log.consumed {
            let entry = pairs
                .entry((log.user_id, c.creator))
                .or_insert((c.novel, 0));
            entry.1 += 1;
        }
    }
    pairs
        .values()
        .filter(|(first_novel, count)| *first_novel && *count >= 2)
        .count() as u64
}

/// Relative treatment-vs-control change for one prediction-percentile bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketDelta {
    pub bucket: usize,
    pub treatment_pages: u64,
    pub control_pages: u64,
    pub novel_impressions_delta: Option<f64>,
    pub novel_consumptions_delta: Option<f64>,
    pub novel_ctr_delta: Option<f64>,
}

fn relative_delta(t: f64, c: f64) -> Option<f64> {
    if c == 0.0 {
        None
    } else {
        Some((t - c) / c)
    }
}

fn ctr(consumptions: f64, impressions: f64) -> Option<f64> {
    if impressions == 0.0 {
        None
    } else {
        Some(consumptions / impressions)
    }
}

/// Bucket edges at pooled prediction quantiles. `bucket(p)` = number of edges
/// `<= p`, so pages split into `n_buckets` rank groups.
fn bucket_edges(pooled: &mut [f64], n_buckets: usize) -> Vec<f64> {
    pooled.sort_by(f64::total_cmp);
    (1..n_buckets)
        .map(|i| pooled[(i * pooled.len()) / n_buckets])
        .collect()
}

fn bucket_of(edges: &[f64], p: f64) -> usize {
    edges.partition_point(|&e| e <= p)
}

/// Per-bucket novelty totals: (pages, novel impressions, novel consumptions).
fn bucket_totals(
    logs: &[SessionLog],
    predictions: &[f64],
    edges: &[f64],
    n_buckets: usize,
) -> Vec<(u64, u64, u64)> {
    let mut totals = vec![(0u64, 0u64, 0u64); n_buckets];
    for (log, &p) in logs.iter().zip(predictions) {
        let b = bucket_of(edges, p);
        totals[b].0 += 1;
        totals[b].1 += log.novel_impressions as u64;
        if log.consumed.as_ref().is_some_and(|c| c.novel) {
            totals[b].2 += 1;
        }
    }
    totals
}

/// Treatment-vs-control novelty deltas sliced by pooled percentiles of the
/// predicted intent probability. Buckets with no pages in either arm, or a
/// zero control denominator, report absent deltas.
pub fn slice_by_predicted_intent(
    treatment_logs: &[SessionLog],
    treatment_predictions: &[f64],
    control_logs: &[SessionLog],
    control_predictions: &[f64],
    n_buckets: usize,
) -> Result<Vec<BucketDelta>> {
    if n_buckets == 0 {
        return Err(Error::InvalidConfig("n_buckets must be >= 1".to_string()));
    }
    if treatment_logs.len() != treatment_predictions.len()
        || control_logs.len() != control_predictions.len()
    {
        return Err(Error::DimensionMismatch {
            expected: treatment_logs.len(),
            got: treatment_predictions.len(),
        });
    }
    if treatment_logs.is_empty() && control_logs.is_empty() {
        return Err(Error::InvalidInput("no pages to slice".to_string()));
    }
    let mut pooled: Vec<f64> = treatment_predictions
        .iter()
        .chain(control_predictions)
        .copied()
        .collect();
    let edges = bucket_edges(&mut pooled, n_buckets);

    let t = bucket_totals(treatment_logs, treatment_predictions, &edges, n_buckets);
    let c = bucket_totals(control_logs, control_predictions, &edges, n_buckets);

    Ok((0..n_buckets)
        .map(|b| {
            let (tp, ti, tc) = t[b];
            let (cp, ci, cc) = c[b];
            let empty = tp == 0 || cp == 0;
            let t_ctr = ctr(tc as f64, ti as f64);
            let c_ctr = ctr(cc as f64, ci as f64);
            BucketDelta {
                bucket: b,
                treatment_pages: tp,
                control_pages: cp,
                novel_impressions_delta: if empty {
                    None
                } else {
                    relative_delta(ti as f64, ci as f64)
                },
                novel_consumptions_delta: if empty {
                    None
                } else {
                    relative_delta(tc as f64, cc as f64)
                },
                novel_ctr_delta: match (t_ctr, c_ctr) {
                    (Some(t), Some(c)) if !empty && c > 0.0 => Some((t - c) / c),
                    _ => None,
                },
            }
        })
        .collect())
}

/// Spearman rank correlation with midranks for ties. `None` when fewer than
/// two points or either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rx = midranks(xs);
    let ry = midranks(ys);
    pearson(&rx, &ry)
}

fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx <= 1e-24 || vy <= 1e-24 {
        None
    } else {
        Some(cov / (vx.sqrt() * vy.sqrt()))
    }
}

/// Observed Spearman correlation between bucket index and per-bucket novelty
/// deltas, with a one-sided user-bootstrap p-value for `rho <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicedTrend {
    pub metric: String,
    pub rho: Option<f64>,
    pub p_one_sided: Option<f64>,
}

/// Bootstrap test of the personalization trend: are novelty deltas increasing
/// in the predicted-intent bucket? Users are resampled with replacement
/// (paired across arms); bucket edges stay fixed at the observed pooled
/// percentiles.
#[allow(clippy::too_many_arguments)]
pub fn sliced_trend_bootstrap(
    treatment_logs: &[SessionLog],
    treatment_predictions: &[f64],
    control_logs: &[SessionLog],
    control_predictions: &[f64],
    n_buckets: usize,
    n_users: usize,
    resamples: usize,
    seed: u64,
) -> Result<Vec<SlicedTrend>> {
    if n_buckets < 2 {
        return Err(Error::InvalidConfig("n_buckets must be >= 2".to_string()));
    }
    let mut pooled: Vec<f64> = treatment_predictions
        .iter()
        .chain(control_predictions)
        .copied()
        .collect();
    if pooled.is_empty() {
        return Err(Error::InvalidInput("no pages to slice".to_string()));
    }
    let edges = bucket_edges(&mut pooled, n_buckets);

    // (impressions, consumptions) per user per bucket per arm.
    let mut t_user = vec![vec![(0f64, 0f64); n_buckets]; n_users];
    let mut c_user = vec![vec![(0f64, 0f64); n_buckets]; n_users];
    for (logs, preds, acc) in [
        (treatment_logs, treatment_predictions, &mut t_user),
        (control_logs, control_predictions, &mut c_user),
    ] {
        for (log, &p) in logs.iter().zip(preds) {
            let b = bucket_of(&edges, p);
            let cell = &mut acc[log.user_id as usize][b];
            cell.0 += log.novel_impressions as f64;
            if log.consumed.as_ref().is_some_and(|c| c.novel) {
                cell.1 += 1.0;
            }
        }
    }

    let trend = |users: &[usize]| -> (Option<f64>, Option<f64>) {
        let mut t_tot = vec![(0f64, 0f64); n_buckets];
        let mut c_tot = vec![(0f64, 0f64); n_buckets];
        for &u in users {
            for b in 0..n_buckets {
                t_tot[b].0 += t_user[u][b].0;
                t_tot[b].1 += t_user[u][b].1;
                c_tot[b].0 += c_user[u][b].0;
                c_tot[b].1 += c_user[u][b].1;
            }
        }
        let mut cons_x = Vec::new();
        let mut cons_y = Vec::new();
        let mut ctr_x = Vec::new();
        let mut ctr_y = Vec::new();
        for b in 0..n_buckets {
            if let Some(d) = relative_delta(t_tot[b].1, c_tot[b].1) {
                cons_x.push(b as f64);
                cons_y.push(d);
            }
            if let (Some(t), Some(c)) = (ctr(t_tot[b].1, t_tot[b].0), ctr(c_tot[b].1, c_tot[b].0)) {
                if c > 0.0 {
                    ctr_x.push(b as f64);
                    ctr_y.push((t - c) / c);
                }
            }
        }
        (spearman(&cons_x, &cons_y), spearman(&ctr_x, &ctr_y))
    };

    let all: Vec<usize> = (0..n_users).collect();
    let (rho_cons, rho_ctr) = trend(&all);

    let mut worse_cons = 0usize;
    let mut valid_cons = 0usize;
    let mut worse_ctr = 0usize;
    let mut valid_ctr = 0usize;
    let mut rng = rng::substream(seed, &[stream::BOOTSTRAP]);
    let mut sample = vec![0usize; n_users];
    for _ in 0..resamples {
        for s in sample.iter_mut() {
            *s = rand::Rng::random_range(&mut rng, 0..n_users);
        }
        let (rc, rt) = trend(&sample);
        if let Some(r) = rc {
            valid_cons += 1;
            if r <= 0.0 {
                worse_cons += 1;
            }
        }
        if let Some(r) = rt {
            valid_ctr += 1;
            if r <= 0.0 {
                worse_ctr += 1;
            }
        }
    }

    let p = |worse: usize, valid: usize| {
        if valid == 0 {
            None
        } else {
            Some(worse as f64 / valid as f64)
        }
    };
    Ok(vec![
        SlicedTrend {
            metric: "novel_consumptions".to_string(),
            rho: rho_cons,
            p_one_sided: p(worse_cons, valid_cons),
        },
        SlicedTrend {
            metric: "novel_ctr".to_string(),
            rho: rho_ctr,
            p_one_sided: p(worse_ctr, valid_ctr),
        },
    ])
}

/// One row of an arm comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDelta {
    pub metric: String,
    pub control: f64,
    pub treatment: f64,
    /// `(treatment - control) / control`; absent when the control value is 0.
    pub delta: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

const COMPARED_METRICS: [&str; 9] = [
    "dau_proxy",
    "consumption_count",
    "mean_relevance",
    "novel_impressions",
    "novel_consumptions",
    "novel_ctr",
    "repeated_exploration",
    "unique_clusters_per_user",
    "satisfaction_mean",
];

fn metric_value(users: &[&UserStats], metric: &str, n_days: u32) -> f64 {
    let sum = |f: fn(&UserStats) -> f64| users.iter().map(|u| f(u)).sum::<f64>();
    match metric {
        "dau_proxy" => sum(|u| u.active_days as f64) / n_days.max(1) as f64,
        "consumption_count" => sum(|u| u.consumptions as f64),
        "mean_relevance" => {
            let pages = sum(|u| u.pages as f64);
            if pages == 0.0 {
                0.0
            } else {
                sum(|u| u.relevance_sum) / pages
            }
        }
        "novel_impressions" => sum(|u| u.novel_impressions as f64),
        "novel_consumptions" => sum(|u| u.novel_consumptions as f64),
        "novel_ctr" => {
            let impressions = sum(|u| u.novel_impressions as f64);
            if impressions == 0.0 {
                0.0
            } else {
                sum(|u| u.novel_consumptions as f64) / impressions
            }
        }
        "repeated_exploration" => sum(|u| u.repeated_exploration as f64),
        "unique_clusters_per_user" => {
            if users.is_empty() {
                0.0
            } else {
                sum(|u| u.unique_clusters as f64) / users.len() as f64
            }
        }
        "satisfaction_mean" => {
            let days = sum(|u| u.active_days as f64);
            if days == 0.0 {
                0.0
            } else {
                sum(|u| u.satisfaction_sum) / days
            }
        }
        other => unreachable!("unknown metric {other}"),
    }
}

/// Relative treatment-vs-control changes with user-level bootstrap confidence
/// intervals. The two reports must come from paired runs over the same user
/// population; resampling reuses the same user indices on both sides.
pub fn compare_arms(
    treatment: &ExperimentReport,
    control: &ExperimentReport,
    resamples: usize,
    seed: u64,
) -> Result<Vec<ArmDelta>> {
    if treatment.per_user.len() != control.per_user.len() {
        return Err(Error::InvalidInput(
            "arm reports cover different user populations".to_string(),
        ));
    }
    if treatment.n_days != control.n_days {
        return Err(Error::InvalidInput(
            "arm reports cover different horizons".to_string(),
        ));
    }
    let n = treatment.per_user.len();
    let n_days = treatment.n_days;
    let t_all: Vec<&UserStats> = treatment.per_user.iter().collect();
    let c_all: Vec<&UserStats> = control.per_user.iter().collect();

    let mut rng = rng::substream(seed, &[stream::BOOTSTRAP, 1]);
    let mut resampled_deltas: Vec<Vec<f64>> = vec![Vec::new(); COMPARED_METRICS.len()];
    let mut t_sample: Vec<&UserStats> = Vec::with_capacity(n);
    let mut c_sample: Vec<&UserStats> = Vec::with_capacity(n);
    for _ in 0..resamples {
        t_sample.clear();
        c_sample.clear();
        for _ in 0..n {
            let idx = rand::Rng::random_range(&mut rng, 0..n);
            t_sample.push(t_all[idx]);
            c_sample.push(c_all[idx]);
        }
        for (m, metric) in COMPARED_METRICS.iter().enumerate() {
            let c = metric_value(&c_sample, metric, n_days);
            if c != 0.0 {
                let t = metric_value(&t_sample, metric, n_days);
                resampled_deltas[m].push((t - c) / c);
            }
        }
    }

    Ok(COMPARED_METRICS
        .iter()
        .enumerate()
        .map(|(m, metric)| {
            let c = metric_value(&c_all, metric, n_days);
            let t = metric_value(&t_all, metric, n_days);
            let delta = relative_delta(t, c);
            let samples = &mut resampled_deltas[m];
            samples.sort_by(f64::total_cmp);
            let (ci_low, ci_high) = if samples.len() >= 40 {
                let lo = samples[(samples.len() as f64 * 0.025).floor() as usize];
                let hi = samples[((samples.len() as f64 * 0.975).ceil() as usize)
                    .min(samples.len())
                    .saturating_sub(1)];
                (Some(lo), Some(hi))
            } else {
                (None, None)
            };
            ArmDelta {
                metric: metric.to_string(),
                control: c,
                treatment: t,
                delta,
                ci_low,
                ci_high,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cand(id: &str, s: f64, aligned: &[u32], novel: bool) -> Candidate {
        Candidate::new(id, s, 0.5, aligned.iter().copied(), novel).unwrap()
    }

    #[test]
    fn slate_metrics_single_intent_page() {
        let items = [
            cand("a", 1.0, &[0], false),
            cand("b", 2.0, &[0], true),
            cand("c", 3.0, &[0], false),
        ];
        let m = slate_metrics_for_items(items.iter(), 4, 3);
        assert_relative_eq!(m.intent_coverage, 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(m.effective_intents, 1.0, max_relative = 1e-12);
        assert_relative_eq!(m.mean_relevance, 2.0, max_relative = 1e-12);
        assert_eq!(m.novel_impressions, 1);
    }

    #[test]
    fn slate_metrics_disjoint_intents_cover_fully() {
        let items = [
            cand("a", 1.0, &[0], false),
            cand("b", 1.0, &[1], false),
            cand("c", 1.0, &[2], false),
        ];
        let m = slate_metrics_for_items(items.iter(), 5, 3);
        assert_relative_eq!(m.intent_coverage, 1.0, max_relative = 1e-12);
        assert_relative_eq!(m.effective_intents, 3.0, max_relative = 1e-9);
    }

    #[test]
    fn effective_intents_hand_entropy_case() {
        // Top-3 aligned masses: two items on intent 0, one on intent 1.
        let items = [
            cand("a", 1.0, &[0], false),
            cand("b", 1.0, &[0], false),
            cand("c", 1.0, &[1], false),
        ];
        let m = slate_metrics_for_items(items.iter(), 2, 3);
        let h = -(2.0 / 3.0f64) * (2.0 / 3.0f64).ln() - (1.0 / 3.0f64) * (1.0 / 3.0f64).ln();
        assert_relative_eq!(m.effective_intents, h.exp(), max_relative = 1e-12);
        assert_relative_eq!(m.effective_intents, 1.8899, epsilon = 1e-4);
    }

    #[test]
    fn slate_metric_bounds_hold_on_random_pages() {
        let mut rng = crate::rng::substream(40, &[2]);
        for _ in 0..200 {
            let n_intents = rand::Rng::random_range(&mut rng, 1..8usize);
            let k = rand::Rng::random_range(&mut rng, 1..10usize);
            let items: Vec<Candidate> = (0..rand::Rng::random_range(&mut rng, 1..12usize))
                .map(|i| {
                    let aligned = vec![rand::Rng::random_range(&mut rng, 0..n_intents as u32)];
                    Candidate::new(
                        format!("x{i}"),
                        rand::Rng::random_range(&mut rng, 0.0..2.0),
                        0.5,
                        aligned,
                        rand::Rng::random::<bool>(&mut rng),
                    )
                    .unwrap()
                })
                .collect();
            let m = slate_metrics_for_items(items.iter(), n_intents, k);
            assert!(m.intent_coverage > 0.0 && m.intent_coverage <= 1.0);
            assert!(m.effective_intents >= 1.0 - 1e-12);
            assert!(m.effective_intents <= k.min(n_intents) as f64 + 1e-9);
        }
    }

    #[test]
    fn slate_metrics_via_ranked_slate() {
        let cands = vec![cand("a", 1.0, &[0], true), cand("b", 0.5, &[1], false)];
        let slate = RankedSlate {
            order: vec!["b".to_string(), "a".to_string()],
            trace: Vec::new(),
        };
        let m = slate_metrics(&slate, &cands, 2, 1).unwrap();
        assert_eq!(m.novel_impressions, 0);
        assert_relative_eq!(m.mean_relevance, 0.5);
    }

    fn log_with(user: u32, creator: u32, novel: bool, consumed: bool) -> SessionLog {
        SessionLog {
            user_id: user,
            day: 0,
            session: 0,
            hour: 0,
            features: Vec::new(),
            predicted_explore: None,
            order: Vec::new(),
            novel_impressions: 1,
            mean_relevance: 0.0,
            intent_coverage: 1.0,
            effective_intents: 1.0,
            true_intent: 0,
            scanned_depth: 1,
            consumed: consumed.then(|| crate::sim::Consumption {
                item: 0,
                creator,
                cluster: 0,
                novel,
                base_value: 0.5,
                aligned: vec![0],
                completion: 0.5,
            }),
        }
    }

    #[test]
    fn repeated_exploration_counting_rules() {
        // One novel consumption only: no pair.
        assert_eq!(repeated_exploration(&[log_with(1, 7, true, true)]), 0);
        // Three consumptions of a first-novel creator: one pair.
        let logs = vec![
            log_with(1, 7, true, true),
            log_with(1, 7, false, true),
            log_with(1, 7, false, true),
        ];
        assert_eq!(repeated_exploration(&logs), 1);
        // Two users, same creator, twice each: two pairs.
        let logs = vec![
            log_with(1, 7, true, true),
            log_with(1, 7, false, true),
            log_with(2, 7, true, true),
            log_with(2, 7, false, true),
        ];
        assert_eq!(repeated_exploration(&logs), 2);
        // First consumption was not novel: never counted.
        let logs = vec![
            log_with(3, 9, false, true),
            log_with(3, 9, false, true),
            log_with(3, 9, false, true),
        ];
        assert_eq!(repeated_exploration(&logs), 0);
    }

    #[test]
    fn identical_arms_slice_to_zero_deltas() {
        let logs: Vec<SessionLog> = (0..40)
            .map(|i| log_with(i % 4, i % 3, i % 2 == 0, i % 2 == 0))
            .collect();
        let preds: Vec<f64> = (0..40).map(|i| i as f64 / 40.0).collect();
        let deltas = slice_by_predicted_intent(&logs, &preds, &logs, &preds, 4).unwrap();
        assert_eq!(deltas.len(), 4);
        for d in deltas {
            assert_eq!(d.novel_impressions_delta, Some(0.0));
            assert_eq!(d.novel_consumptions_delta, Some(0.0));
            assert_eq!(d.novel_ctr_delta, Some(0.0));
        }
    }

    #[test]
    fn one_bucket_slice_equals_overall_delta() {
        let t: Vec<SessionLog> = (0..10).map(|i| log_with(0, i, true, true)).collect();
        let c: Vec<SessionLog> = (0..10).map(|i| log_with(0, i, true, i % 2 == 0)).collect();
        let preds = vec![0.5; 10];
        let deltas = slice_by_predicted_intent(&t, &preds, &c, &preds, 1).unwrap();
        assert_eq!(deltas.len(), 1);
        // 10 vs 5 novel consumptions.
        assert_relative_eq!(deltas[0].novel_consumptions_delta.unwrap(), 1.0);
    }

    #[test]
    fn constructed_monotone_gap_has_perfect_spearman() {
        // Per-bucket novelty gap grows linearly with the bucket index.
        let mut t = Vec::new();
        let mut c = Vec::new();
        let mut tp = Vec::new();
        let mut cp = Vec::new();
        for b in 0..5u32 {
            for i in 0..20u32 {
                let p = (b as f64 + 0.5) / 5.0;
                // Control converts 2 of 20; treatment converts 2 + b extra.
                c.push(log_with(i, b, true, i < 2));
                cp.push(p);
                t.push(log_with(i, b, true, i < 2 + b));
                tp.push(p);
            }
        }
        let deltas = slice_by_predicted_intent(&t, &tp, &c, &cp, 5).unwrap();
        let xs: Vec<f64> = deltas.iter().map(|d| d.bucket as f64).collect();
        let ys: Vec<f64> = deltas
            .iter()
            .map(|d| d.novel_consumptions_delta.unwrap())
            .collect();
        assert_relative_eq!(spearman(&xs, &ys).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn spearman_basics() {
        assert_relative_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            1.0
        );
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        assert_eq!(spearman(&[1.0], &[1.0]), None);
    }

    fn stats(user_id: u32, consumptions: u32, novel: u32) -> UserStats {
        UserStats {
            user_id,
            active_days: 2,
            pages: 4,
            consumptions,
            novel_impressions: 10,
            novel_consumptions: novel,
            repeated_exploration: 1,
            unique_clusters: 3,
            relevance_sum: 2.0,
            satisfaction_sum: 1.0,
        }
    }

    fn report(arm: &str, per_user: Vec<UserStats>) -> ExperimentReport {
        ExperimentReport {
            arm: arm.to_string(),
            n_days: 2,
            days: Vec::new(),
            aggregates: Aggregates {
                dau_proxy: 0.0,
                consumption_count: 0,
                mean_relevance: 0.0,
                novel_impressions: 0,
                novel_consumptions: 0,
                novel_ctr: None,
                repeated_exploration: 0,
                unique_clusters_per_user: 0.0,
                intent_coverage: 0.0,
                effective_intents: 0.0,
                satisfaction_mean: 0.0,
            },
            per_user,
            model_calls: 0,
            train_invocations: 0,
        }
    }

    #[test]
    fn identical_reports_compare_to_zero() {
        let users: Vec<UserStats> = (0..50).map(|i| stats(i, 5, 2)).collect();
        let t = report("treatment", users.clone());
        let c = report("control", users);
        let rows = compare_arms(&t, &c, 200, 7).unwrap();
        for row in rows {
            assert_eq!(row.delta, Some(0.0), "{}", row.metric);
            assert_eq!(row.ci_low, Some(0.0));
            assert_eq!(row.ci_high, Some(0.0));
        }
    }

    #[test]
    fn five_percent_lift_is_reported() {
        let c_users: Vec<UserStats> = (0..100).map(|i| stats(i, 100, 2)).collect();
        let t_users: Vec<UserStats> = (0..100).map(|i| stats(i, 105, 2)).collect();
        let t = report("treatment", t_users);
        let c = report("control", c_users);
        let rows = compare_arms(&t, &c, 100, 7).unwrap();
        let row = rows
            .iter()
            .find(|r| r.metric == "consumption_count")
            .unwrap();
        assert_relative_eq!(row.delta.unwrap(), 0.05, max_relative = 1e-12);
    }

    #[test]
    fn bootstrap_ci_contains_point_estimate() {
        let mut rng = rng::substream(3, &[99]);
        let c_users: Vec<UserStats> = (0..200)
            .map(|i| {
                stats(
                    i,
                    rand::Rng::random_range(&mut rng, 2..30u32),
                    rand::Rng::random_range(&mut rng, 0..5u32),
                )
            })
            .collect();
        let t_users: Vec<UserStats> = c_users
            .iter()
            .map(|u| UserStats {
                consumptions: u.consumptions + 2,
                novel_consumptions: u.novel_consumptions + 1,
                ..u.clone()
            })
            .collect();
        let t = report("treatment", t_users);
        let c = report("control", c_users);
        let rows = compare_arms(&t, &c, 500, 11).unwrap();
        for row in rows {
            if let (Some(d), Some(lo), Some(hi)) = (row.delta, row.ci_low, row.ci_high) {
                assert!(
                    lo <= d && d <= hi,
                    "{}: {d} outside [{lo}, {hi}]",
                    row.metric
                );
            }
        }
    }

    #[test]
    fn arm_swap_is_antisymmetric_via_identity() {
        let c_users: Vec<UserStats> = (0..50).map(|i| stats(i, 20, 2)).collect();
        let t_users: Vec<UserStats> = (0..50).map(|i| stats(i, 26, 3)).collect();
        let t = report("treatment", t_users);
        let c = report("control", c_users);
        let forward = compare_arms(&t, &c, 50, 7).unwrap();
        let backward = compare_arms(&c, &t, 50, 7).unwrap();
        for (f, b) in forward.iter().zip(&backward) {
            if let (Some(df), Some(db)) = (f.delta, b.delta) {
                assert_relative_eq!(db, -df / (1.0 + df), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn compare_rejects_mismatched_populations() {
        let t = report("treatment", (0..3).map(|i| stats(i, 1, 0)).collect());
        let c = report("control", (0..4).map(|i| stats(i, 1, 0)).collect());
        assert!(compare_arms(&t, &c, 10, 1).is_err());
    }
}
