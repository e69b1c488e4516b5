//! The day-by-day experiment loop.
//!
//! Per simulated day: (treatment arms) retrain the intent predictor on the
//! latest labeled pages, serve each active user their sessions, log outcomes,
//! then fold each user's day satisfaction into their return propensity, which
//! drives next-day activity. All randomness comes from substreams keyed by
//! (seed, user, day, session), so paired arms see identical worlds, candidate
//! pools and page-view draws wherever their slates agree.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::candidate::Candidate;
use crate::divers::{diversify_order, DiversifierConfig, TieBreak};
use crate::error::Result;
use crate::metrics::{
    slate_metrics_for_items, Aggregates, DayMetrics, ExperimentReport, SlateMetrics, UserStats,
};
use crate::model::{self, Dataset, IntentModelParams, TrainConfig, CANONICAL_FEATURES};
use crate::rng::{derive_seed, stream, substream};
use crate::sim::{
    generate_candidates, generate_world, sample_true_intent_dist, Consumption, Policy, SessionLog,
    SimConfig, UserProfile,
};

/// Everything a run produces: the metric report, the per-page logs (when
/// `keep_logs` is set) and the final trained predictor of a treatment arm.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub logs: Vec<SessionLog>,
    pub final_params: Option<IntentModelParams>,
}

struct UserRuntime {
    profile: UserProfile,
    /// Per consumed creator: (novel at first consumption, consumption count).
    consumed_creators: std::collections::BTreeMap<u32, (bool, u32)>,
    clusters: BTreeSet<u32>,
    consumptions: u32,
    repeated_consumptions: u32,
    completion_sum: f64,
    length_sum: f64,
    last_abs_hour: Option<f64>,
    active_days: u32,
    stats: UserStats,
    // today's scratch
    pages_today: u32,
    consumptions_today: u32,
    satisfaction_today: f64,
}

impl UserRuntime {
    fn new(profile: UserProfile) -> Self {
        let user_id = profile.user_id;
        Self {
            profile,
            consumed_creators: Default::default(),
            clusters: Default::default(),
            consumptions: 0,
            repeated_consumptions: 0,
            completion_sum: 0.0,
            length_sum: 0.0,
            last_abs_hour: None,
            active_days: 0,
            stats: UserStats {
                user_id,
                active_days: 0,
                pages: 0,
                consumptions: 0,
                novel_impressions: 0,
                novel_consumptions: 0,
                repeated_exploration: 0,
                unique_clusters: 0,
                relevance_sum: 0.0,
                satisfaction_sum: 0.0,
            },
            pages_today: 0,
            consumptions_today: 0,
            satisfaction_today: 0.0,
        }
    }

    fn features(&self, day: u32, session: u32, hour: u8) -> Vec<f64> {
        let abs_hour = day as f64 * 24.0 + hour as f64;
        let time_since_last = match self.last_abs_hour {
            Some(last) => (abs_hour - last).max(0.0),
            None => 24.0,
        };
        let consumptions = self.consumptions as f64;
        let theta = 2.0 * std::f64::consts::PI * hour as f64 / 24.0;
        vec![
            session as f64,
            self.consumptions_today as f64,
            time_since_last,
            if self.consumptions > 0 {
                self.completion_sum / consumptions
            } else {
                0.5
            },
            if self.consumptions > 0 {
                self.length_sum / consumptions
            } else {
                8.0
            },
            if day == 0 {
                1.0
            } else {
                self.active_days as f64 / day as f64
            },
            if self.consumptions > 0 {
                self.repeated_consumptions as f64 / consumptions
            } else {
                0.5
            },
            self.clusters.len() as f64,
            self.consumed_creators.len() as f64,
            theta.sin(),
            theta.cos(),
        ]
    }
}

/// Runs one experiment arm to completion. Deterministic for a fixed config.
pub fn run_experiment(cfg: &SimConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (catalog, profiles) = generate_world(cfg)?;
    let n_intents = cfg.n_intents();
    let space = cfg.intent_space();
    let feature_names: Vec<String> = CANONICAL_FEATURES.iter().map(|s| s.to_string()).collect();

    let mut users: Vec<UserRuntime> = profiles.into_iter().map(UserRuntime::new).collect();
    let mut params = IntentModelParams::zeros(space.ids().to_vec(), feature_names.clone());
    let mut model_calls: u64 = 0;
    let mut train_invocations: u32 = 0;
    // (day, features, labels) of consumed pages; pruned to the train window.
    let mut labeled: Vec<(u32, Vec<f64>, Vec<u8>)> = Vec::new();

    let diversifier = match cfg.policy {
        Policy::Treatment { gamma, mode } => Some(DiversifierConfig {
            gamma,
            posterior_mode: mode,
            tie_break: TieBreak::LowestItemId,
            epsilon: 1e-12,
            dense_trace_threshold: 64,
        }),
        Policy::Control => None,
    };

    let mut logs: Vec<SessionLog> = Vec::new();
    let mut days: Vec<DayMetrics> = Vec::with_capacity(cfg.n_days);
    let mut repeated_exploration_total: u64 = 0;
    let completion_noise = Normal::new(0.0, 0.15).expect("completion noise");

    for day in 0..cfg.n_days as u32 {
        // Retrain between days on the latest window of labeled pages.
        if diversifier.is_some() && day > 0 {
            let horizon = day.saturating_sub(cfg.train_window_days as u32);
            labeled.retain(|(d, _, _)| *d >= horizon);
            if labeled.len() >= cfg.min_train_examples {
                let mut dataset = Dataset::new(feature_names.clone(), space.ids().to_vec());
                for (_, x, y) in &labeled {
                    dataset.push(x.clone(), y.clone())?;
                }
                let train_cfg = TrainConfig {
                    seed: derive_seed(cfg.seed, &[stream::TRAIN, day as u64]),
                    ..cfg.train.clone()
                };
                params = model::train(&dataset, &train_cfg)?;
                train_invocations += 1;
            }
        }

        let mut active_users = 0u32;
        let mut day_consumptions = 0u64;
        let mut day_pages = 0u64;
        let mut day_relevance = 0.0;
        let mut day_coverage = 0.0;
        let mut day_effective = 0.0;
        let mut day_novel_impressions = 0u64;
        let mut day_novel_consumptions = 0u64;
        let mut day_satisfaction_sum = 0.0;

        for u in users.iter_mut() {
            let uid = u.profile.user_id;
            let mut activity = substream(cfg.seed, &[stream::ACTIVITY, uid as u64, day as u64]);
            if activity.random::<f64>() >= u.profile.return_propensity {
                continue;
            }
            active_users += 1;
            u.active_days += 1;
            u.stats.active_days += 1;
            u.pages_today = 0;
            u.consumptions_today = 0;
            u.satisfaction_today = 0.0;

            let mut hours: Vec<u8> = {
                let mut hour_rng = substream(cfg.seed, &[stream::HOUR, uid as u64, day as u64]);
                (0..cfg.sessions_per_day)
                    .map(|_| hour_rng.random_range(0..24u8))
                    .collect()
            };
            hours.sort_unstable();

            for (session, &hour) in hours.iter().enumerate() {
                let session = session as u32;
                let features = u.features(day, session, hour);

                let mut pool_rng = substream(
                    cfg.seed,
                    &[stream::POOL, uid as u64, day as u64, session as u64],
                );
                let pool =
                    generate_candidates(&catalog, &u.profile, cfg.pool_size, cfg, &mut pool_rng);

                // Order the pool and keep the top of it as the served page.
                let (served_positions, predicted_explore): (Vec<usize>, Option<f64>) =
                    match &diversifier {
                        Some(dcfg) => {
                            let prior = model::predict_intents(&params, &features)?;
                            model_calls += 1;
                            let p0 = prior.probs()[0];
                            let cands: Vec<Candidate> =
                                pool.iter().map(|p| p.candidate.clone()).collect();
                            let order = diversify_order(&prior, &cands, dcfg)?;
                            (order, Some(p0))
                        }
                        None => {
                            let mut order: Vec<usize> = (0..pool.len()).collect();
                            order.sort_by(|&a, &b| {
                                pool[b]
                                    .candidate
                                    .quality
                                    .total_cmp(&pool[a].candidate.quality)
                                    .then_with(|| {
                                        pool[a].candidate.item_id.cmp(&pool[b].candidate.item_id)
                                    })
                            });
                            (order, None)
                        }
                    };

                let served: Vec<&Candidate> = served_positions
                    .iter()
                    .take(cfg.page_size)
                    .map(|&i| &pool[i].candidate)
                    .collect();
                let page_metrics: SlateMetrics =
                    slate_metrics_for_items(served.iter().copied(), n_intents, cfg.metrics_k());

                let mut view_rng = substream(
                    cfg.seed,
                    &[stream::VIEW, uid as u64, day as u64, session as u64],
                );
                let outcome = cascade_scan(&u.profile, hour, &served, &mut view_rng)?;

                let consumed = outcome.consumed_position.map(|pos| {
                    let pooled = &pool[served_positions[pos]];
                    let item = &catalog.items[pooled.catalog_index as usize];
                    let completion = (u.profile.completion_mean
                        + completion_noise.sample(&mut view_rng))
                    .clamp(0.0, 1.0);
                    Consumption {
                        item: pooled.catalog_index,
                        creator: item.creator,
                        cluster: item.cluster,
                        novel: pooled.candidate.novelty,
                        base_value: pooled.candidate.base_value,
                        aligned: pooled.candidate.aligned.clone(),
                        completion,
                    }
                });

                // Bookkeeping before the next page sees the features.
                u.pages_today += 1;
                u.stats.pages += 1;
                u.stats.relevance_sum += page_metrics.mean_relevance;
                u.stats.novel_impressions += page_metrics.novel_impressions;
                u.last_abs_hour = Some(day as f64 * 24.0 + hour as f64);
                day_pages += 1;
                day_relevance += page_metrics.mean_relevance;
                day_coverage += page_metrics.intent_coverage;
                day_effective += page_metrics.effective_intents;
                day_novel_impressions += page_metrics.novel_impressions as u64;

                if let Some(c) = &consumed {
                    u.consumptions_today += 1;
                    u.consumptions += 1;
                    u.stats.consumptions += 1;
                    u.satisfaction_today += c.base_value;
                    u.completion_sum += c.completion;
                    u.length_sum += catalog.items[c.item as usize].length;
                    if c.novel {
                        u.stats.novel_consumptions += 1;
                        day_novel_consumptions += 1;
                    } else {
                        u.repeated_consumptions += 1;
                    }
                    u.clusters.insert(c.cluster);
                    u.profile.seen_creators.insert(c.creator);
                    let entry = u.consumed_creators.entry(c.creator).or_insert((c.novel, 0));
                    entry.1 += 1;
                    if entry.0 && entry.1 == 2 {
                        repeated_exploration_total += 1;
                        u.stats.repeated_exploration += 1;
                    }
                    day_consumptions += 1;
                }

                let log = SessionLog {
                    user_id: uid,
                    day,
                    session,
                    hour,
                    features,
                    predicted_explore,
                    order: served_positions
                        .iter()
                        .take(cfg.page_size)
                        .map(|&i| pool[i].catalog_index)
                        .collect(),
                    novel_impressions: page_metrics.novel_impressions,
                    mean_relevance: page_metrics.mean_relevance,
                    intent_coverage: page_metrics.intent_coverage,
                    effective_intents: page_metrics.effective_intents,
                    true_intent: outcome.true_intent,
                    scanned_depth: outcome.scanned_depth,
                    consumed,
                };
                if diversifier.is_some() {
                    if let Some((x, y)) = crate::sim::label_from_log(&log, n_intents) {
                        labeled.push((day, x, y));
                    }
                }
                if cfg.keep_logs {
                    logs.push(log);
                }
            }

            if u.pages_today > 0 {
                let day_satisfaction = u.satisfaction_today / u.pages_today as f64;
                day_satisfaction_sum += day_satisfaction;
                u.stats.satisfaction_sum += day_satisfaction;
                u.profile
                    .update_return_propensity(day_satisfaction, cfg.return_decay);
            }
        }

        let unique_clusters_per_user =
            users.iter().map(|u| u.clusters.len() as f64).sum::<f64>() / cfg.n_users as f64;

        days.push(DayMetrics {
            day,
            active_users,
            consumption_count: day_consumptions,
            mean_relevance: if day_pages > 0 {
                day_relevance / day_pages as f64
            } else {
                0.0
            },
            novel_impressions: day_novel_impressions,
            novel_consumptions: day_novel_consumptions,
            novel_ctr: if day_novel_impressions > 0 {
                Some(day_novel_consumptions as f64 / day_novel_impressions as f64)
            } else {
                None
            },
            repeated_exploration_count: repeated_exploration_total,
            unique_clusters_per_user,
            intent_coverage: if day_pages > 0 {
                day_coverage / day_pages as f64
            } else {
                0.0
            },
            effective_intents: if day_pages > 0 {
                day_effective / day_pages as f64
            } else {
                0.0
            },
            satisfaction_mean: if active_users > 0 {
                day_satisfaction_sum / active_users as f64
            } else {
                0.0
            },
        });
    }

    for u in users.iter_mut() {
        u.stats.unique_clusters = u.clusters.len() as u32;
    }

    let total_pages: f64 = users.iter().map(|u| u.stats.pages as f64).sum();
    let total_novel_impressions: u64 = users.iter().map(|u| u.stats.novel_impressions as u64).sum();
    let total_novel_consumptions: u64 = users
        .iter()
        .map(|u| u.stats.novel_consumptions as u64)
        .sum();
    let total_active_days: f64 = users.iter().map(|u| u.stats.active_days as f64).sum();
    let aggregates = Aggregates {
        dau_proxy: days.iter().map(|d| d.active_users as f64).sum::<f64>()
            / cfg.n_days.max(1) as f64,
        consumption_count: users.iter().map(|u| u.stats.consumptions as u64).sum(),
        mean_relevance: if total_pages > 0.0 {
            users.iter().map(|u| u.stats.relevance_sum).sum::<f64>() / total_pages
        } else {
            0.0
        },
        novel_impressions: total_novel_impressions,
        novel_consumptions: total_novel_consumptions,
        novel_ctr: if total_novel_impressions > 0 {
            Some(total_novel_consumptions as f64 / total_novel_impressions as f64)
        } else {
            None
        },
        repeated_exploration: repeated_exploration_total,
        unique_clusters_per_user: users
            .iter()
            .map(|u| u.stats.unique_clusters as f64)
            .sum::<f64>()
            / cfg.n_users as f64,
        intent_coverage: mean_over_days(&days, |d| d.intent_coverage),
        effective_intents: mean_over_days(&days, |d| d.effective_intents),
        satisfaction_mean: if total_active_days > 0.0 {
            users.iter().map(|u| u.stats.satisfaction_sum).sum::<f64>() / total_active_days
        } else {
            0.0
        },
    };

    let report = ExperimentReport {
        arm: match cfg.policy {
            Policy::Control => "control".to_string(),
            Policy::Treatment { .. } => "treatment".to_string(),
        },
        n_days: cfg.n_days as u32,
        days,
        aggregates,
        per_user: users.into_iter().map(|u| u.stats).collect(),
        model_calls,
        train_invocations,
    };

    Ok(RunOutput {
        report,
        logs,
        final_params: diversifier.is_some().then_some(params),
    })
}

fn mean_over_days(days: &[DayMetrics], f: impl Fn(&DayMetrics) -> f64) -> f64 {
    if days.is_empty() {
        0.0
    } else {
        days.iter().map(f).sum::<f64>() / days.len() as f64
    }
}

pub(crate) struct ScanOutcome {
    pub true_intent: u32,
    pub scanned_depth: u32,
    pub consumed_position: Option<usize>,
}

/// Cascade scan shared by [`crate::sim::simulate_page_view`] and the
/// experiment loop (which serves borrowed candidates).
pub(crate) fn cascade_scan<R: Rng>(
    u: &UserProfile,
    hour: u8,
    slate: &[&Candidate],
    rng: &mut R,
) -> Result<ScanOutcome> {
    let dist = sample_true_intent_dist(u, hour)?;
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    let mut true_intent = dist.len() as u32 - 1;
    for (v, &p) in dist.probs().iter().enumerate() {
        acc += p;
        if draw < acc {
            true_intent = v as u32;
            break;
        }
    }

    let depth_limit = slate.len().min(u.patience as usize);
    let mut scanned = 0u32;
    let mut consumed_position = None;
    for (pos, item) in slate[..depth_limit].iter().enumerate() {
        scanned = pos as u32 + 1;
        if item.is_aligned(true_intent) && rng.random::<f64>() < item.base_value {
            consumed_position = Some(pos);
            break;
        }
        if pos + 1 < depth_limit && rng.random::<f64>() >= u.continuation_prob {
            break;
        }
    }

    Ok(ScanOutcome {
        true_intent,
        scanned_depth: scanned,
        consumed_position,
    })
}
