//! Synthetic-user world: catalog, latent intent process, cascade page views.
//!
//! Users carry a daily-stable intent trait (logits) modulated by an hour-of-
//! day sinusoid. A page view draws one intent from that process, then scans
//! the slate top-down: an aligned item is consumed with probability equal to
//! its base value (at most one consumption per page); a non-consuming scan
//! continues to the next position with the user's continuation probability,
//! up to their patience. Day-level satisfaction feeds a return-propensity
//! recursion that decides next-day activity — the harness's stand-in for a
//! long-term retention metric.
//!
//! All generative choices here (cascade scan, patience, continuation,
//! return-propensity recursion, log-normal quality noise, familiarity-biased
//! retrieval) are harness constructions, tuned so that over-concentrating on
//! one intent is costly across days while on-intent relevant items stay
//! rewarding.

mod experiment;

pub use experiment::{run_experiment, RunOutput};

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::candidate::{Candidate, MAX_BASE_VALUE};
use crate::divers::PosteriorMode;
use crate::error::{Error, Result};
use crate::intent::{IntentDistribution, IntentSpace};
use crate::model::TrainConfig;

/// Intent index of the exploration intent in two-intent worlds.
pub const EXPLORE: u32 = 0;
/// Intent index of the familiarity intent in two-intent worlds.
pub const FAMILIAR: u32 = 1;

/// How catalog items align with intents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntentMode {
    /// Two intents: an item from a creator the user has not engaged with is
    /// exploration-aligned, otherwise familiarity-aligned. Alignment is
    /// per-user, per-page.
    TwoIntent,
    /// One intent per creator; every item aligns with exactly its creator.
    CreatorIntent,
}

/// Serving policy of an experiment arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum Policy {
    /// Descending quality, no intent model.
    Control,
    /// Greedy intent diversification with the trained model's prior.
    Treatment {
        gamma: f64,
        #[serde(default = "default_mode")]
        mode: PosteriorMode,
    },
}

fn default_mode() -> PosteriorMode {
    PosteriorMode::PaperLiteral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_users: usize,
    pub n_days: usize,
    pub sessions_per_day: usize,
    pub page_size: usize,
    pub pool_size: usize,
    pub catalog_size: usize,
    pub n_creators: usize,
    pub n_clusters: usize,
    pub seed: u64,
    pub policy: Policy,
    pub intent_mode: IntentMode,

    /// Sigma of the log-normal noise linking quality scores to base values.
    pub quality_noise_sigma: f64,
    /// Retrieval weight of familiar-creator items relative to novel ones.
    pub familiar_pool_weight: f64,
    /// Creators each user starts having engaged with.
    pub initial_seen_creators: usize,
    pub quality_min: f64,
    pub quality_max: f64,

    /// Population mean of the exploration trait (logit scale, two-intent
    /// worlds): positive values skew the population toward explorers.
    pub base_logit_mean: f64,
    /// Spread of the per-user exploration trait (logit scale).
    pub base_logit_std: f64,
    pub hourly_amplitude: f64,
    /// Std of per-user phase offsets around the population's shared phase.
    pub phase_jitter: f64,
    pub patience: u32,
    pub continuation_prob: f64,

    pub return_decay: f64,
    pub initial_return_propensity: f64,

    pub train: TrainConfig,
    /// Retraining uses labels from this many latest days.
    pub train_window_days: usize,
    pub min_train_examples: usize,

    /// Top-K cutoff for slate metrics; defaults to the page size.
    pub metrics_k: Option<usize>,
    /// Retain per-page logs in the run output.
    pub keep_logs: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_users: 2000,
            n_days: 30,
            sessions_per_day: 4,
            page_size: 10,
            pool_size: 25,
            catalog_size: 600,
            n_creators: 200,
            n_clusters: 50,
            seed: 1,
            policy: Policy::Control,
            intent_mode: IntentMode::TwoIntent,
            quality_noise_sigma: 0.006,
            familiar_pool_weight: 1.0,
            initial_seen_creators: 100,
            quality_min: 0.60,
            quality_max: 0.68,
            base_logit_mean: 0.7,
            base_logit_std: 1.8,
            hourly_amplitude: 1.6,
            phase_jitter: 1.3,
            patience: 4,
            continuation_prob: 0.65,
            return_decay: 0.8,
            initial_return_propensity: 1.0,
            train: TrainConfig {
                learning_rate: 0.1,
                epochs: 3,
                batch_size: 64,
                l2: 1e-4,
                seed: 0,
            },
            train_window_days: 3,
            min_train_examples: 200,
            metrics_k: None,
            keep_logs: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_users == 0 {
            return bad("n_users must be >= 1");
        }
        if self.page_size == 0 {
            return bad("page_size must be >= 1");
        }
        if self.pool_size < self.page_size {
            return bad("pool_size must be >= page_size");
        }
        if self.catalog_size < self.pool_size {
            return bad("catalog_size must be >= pool_size");
        }
        if self.n_creators == 0 || self.n_creators > self.catalog_size {
            return bad("n_creators must lie in 1..=catalog_size");
        }
        if self.n_clusters == 0 {
            return bad("n_clusters must be >= 1");
        }
        if self.initial_seen_creators > self.n_creators {
            return bad("initial_seen_creators must be <= n_creators");
        }
        if !(0.0..=1.0).contains(&self.continuation_prob) {
            return bad("continuation_prob must lie in [0, 1]");
        }
        if self.patience == 0 {
            return bad("patience must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.return_decay) {
            return bad("return_decay must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.initial_return_propensity) {
            return bad("initial_return_propensity must lie in [0, 1]");
        }
        if !(self.quality_min > 0.0 && self.quality_max < MAX_BASE_VALUE) {
            return bad("quality range must lie inside (0, 1 - 1e-9)");
        }
        if self.quality_min >= self.quality_max {
            return bad("quality_min must be < quality_max");
        }
        if self.quality_noise_sigma < 0.0 {
            return bad("quality_noise_sigma must be >= 0");
        }
        if self.familiar_pool_weight <= 0.0 {
            return bad("familiar_pool_weight must be > 0");
        }
        if self.hourly_amplitude < 0.0 {
            return bad("hourly_amplitude must be >= 0");
        }
        if let Policy::Treatment { gamma, .. } = self.policy {
            if !gamma.is_finite() || gamma <= 0.0 {
                return bad("treatment gamma must be > 0");
            }
        }
        self.train.validate()?;
        if self.train_window_days == 0 {
            return bad("train_window_days must be >= 1");
        }
        Ok(())
    }

    pub fn n_intents(&self) -> usize {
        match self.intent_mode {
            IntentMode::TwoIntent => 2,
            IntentMode::CreatorIntent => self.n_creators,
        }
    }

    pub fn intent_space(&self) -> IntentSpace {
        match self.intent_mode {
            IntentMode::TwoIntent => {
                IntentSpace::new(["explore", "familiar"]).expect("static two-intent space is valid")
            }
            IntentMode::CreatorIntent => {
                IntentSpace::new((0..self.n_creators).map(|c| format!("creator-{c:04}")))
                    .expect("creator ids are unique")
            }
        }
    }

    pub fn metrics_k(&self) -> usize {
        self.metrics_k.unwrap_or(self.page_size).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogItem {
    pub item_id: String,
    pub creator: u32,
    pub cluster: u32,
    pub intrinsic_quality: f64,
    /// Static alignment (the item's creator intent); two-intent worlds derive
    /// alignment from the viewing user's engagement history instead.
    pub aligned: Vec<u32>,
    /// Content length in minutes; only consumed lengths feed features.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub items: Vec<CatalogItem>,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Static traits plus the evolving engagement state of one synthetic user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: u32,
    pub base_logits: Vec<f64>,
    pub hourly_amplitude: f64,
    pub phase: f64,
    pub patience: u32,
    pub continuation_prob: f64,
    pub return_propensity: f64,
    /// Creators the user has engaged with (initial history plus in-horizon
    /// consumptions); novelty is defined against this set.
    pub seen_creators: BTreeSet<u32>,
    /// Mean of the per-consumption completion-ratio draw.
    pub completion_mean: f64,
}

/// One served page and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub user_id: u32,
    pub day: u32,
    pub session: u32,
    pub hour: u8,
    /// Feature vector in canonical order, captured before serving.
    pub features: Vec<f64>,
    /// Predicted probability of intent 0 when the policy consulted the model.
    pub predicted_explore: Option<f64>,
    /// Served catalog indices in page order.
    pub order: Vec<u32>,
    pub novel_impressions: u32,
    pub mean_relevance: f64,
    pub intent_coverage: f64,
    pub effective_intents: f64,
    pub true_intent: u32,
    pub scanned_depth: u32,
    pub consumed: Option<Consumption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consumption {
    pub item: u32,
    pub creator: u32,
    pub cluster: u32,
    /// Creator was outside `seen_creators` at consumption time.
    pub novel: bool,
    pub base_value: f64,
    pub aligned: Vec<u32>,
    pub completion: f64,
}

/// A pooled candidate and the catalog item it came from.
#[derive(Debug, Clone)]
pub struct PooledCandidate {
    pub catalog_index: u32,
    pub candidate: Candidate,
}

/// The user's intent distribution at a given hour: softmax of the base
/// logits plus a sinusoidal hour-of-day term with a per-user phase.
pub fn sample_true_intent_dist(u: &UserProfile, hour: u8) -> Result<IntentDistribution> {
    if hour > 23 {
        return Err(Error::InvalidInput(format!("hour {hour} outside 0..=23")));
    }
    let n = u.base_logits.len();
    let theta = 2.0 * std::f64::consts::PI * hour as f64 / 24.0 + u.phase;
    let logits: Vec<f64> = u
        .base_logits
        .iter()
        .enumerate()
        .map(|(v, &b)| {
            let offset = 2.0 * std::f64::consts::PI * v as f64 / n as f64;
            b + u.hourly_amplitude * (theta + offset).sin()
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    IntentDistribution::normalized(probs)
}

/// Samples a candidate pool for one page view.
///
/// Items are drawn without replacement, with familiar-creator items weighted
/// by `cfg.familiar_pool_weight` relative to novel ones (the stand-in for an
/// engagement-trained retrieval stage). Base value is the item's intrinsic
/// quality; the quality score multiplies it by log-normal noise, so score and
/// value correlate without being identical.
pub fn generate_candidates<R: Rng>(
    catalog: &Catalog,
    u: &UserProfile,
    pool_size: usize,
    cfg: &SimConfig,
    rng: &mut R,
) -> Vec<PooledCandidate> {
    debug_assert!(pool_size <= catalog.len());
    let n = catalog.len();
    let w = cfg.familiar_pool_weight;
    // Rejection sampling against the two-valued weight profile: the heavier
    // class is always accepted, the lighter with the weight ratio.
    let (accept_familiar, accept_novel) = if w >= 1.0 { (1.0, 1.0 / w) } else { (w, 1.0) };

    let mut chosen = vec![false; n];
    let mut picked: Vec<u32> = Vec::with_capacity(pool_size);
    let mut attempts = 0usize;
    let max_attempts = 200 * pool_size + 10 * n;
    while picked.len() < pool_size {
        attempts += 1;
        if attempts > max_attempts {
            // Deterministic fallback for pathological weight/size settings.
            for (idx, taken) in chosen.iter_mut().enumerate() {
                if picked.len() == pool_size {
                    break;
                }
                if !*taken {
                    *taken = true;
                    picked.push(idx as u32);
                }
            }
            break;
        }
        let idx = rng.random_range(0..n);
        if chosen[idx] {
            continue;
        }
        let familiar = u.seen_creators.contains(&catalog.items[idx].creator);
        let accept = if familiar {
            accept_familiar
        } else {
            accept_novel
        };
        if accept >= 1.0 || rng.random::<f64>() < accept {
            chosen[idx] = true;
            picked.push(idx as u32);
        }
    }

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    picked
        .into_iter()
        .map(|idx| {
            let item = &catalog.items[idx as usize];
            let familiar = u.seen_creators.contains(&item.creator);
            let noise = (cfg.quality_noise_sigma * normal.sample(rng)).exp();
            let quality = item.intrinsic_quality * noise;
            let aligned: Vec<u32> = match cfg.intent_mode {
                IntentMode::TwoIntent => {
                    if familiar {
                        vec![FAMILIAR]
                    } else {
                        vec![EXPLORE]
                    }
                }
                IntentMode::CreatorIntent => vec![item.creator],
            };
            let candidate = Candidate::new(
                item.item_id.clone(),
                quality,
                item.intrinsic_quality,
                aligned,
                !familiar,
            )
            .expect("catalog items satisfy candidate invariants");
            PooledCandidate {
                catalog_index: idx,
                candidate,
            }
        })
        .collect()
}

/// Result of one cascade scan over a served page.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageOutcome {
    pub true_intent: u32,
    pub scanned_depth: u32,
    /// Position (0-based) of the consumed item, if any.
    pub consumed_position: Option<usize>,
}

/// Scans a served slate under the cascade model and returns the outcome.
///
/// The true intent is drawn from [`sample_true_intent_dist`]; the scan visits
/// at most `u.patience` positions; an aligned item is consumed with
/// probability `base_value`, stopping the scan; otherwise the user moves on
/// with probability `u.continuation_prob` or abandons.
pub fn simulate_page_view<R: Rng>(
    u: &UserProfile,
    hour: u8,
    slate: &[Candidate],
    rng: &mut R,
) -> Result<PageOutcome> {
    if slate.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let refs: Vec<&Candidate> = slate.iter().collect();
    let outcome = experiment::cascade_scan(u, hour, &refs, rng)?;
    Ok(PageOutcome {
        true_intent: outcome.true_intent,
        scanned_depth: outcome.scanned_depth,
        consumed_position: outcome.consumed_position,
    })
}

/// Converts a logged page into a training example: multi-hot labels over the
/// consumed item's aligned intents, or nothing when the page converted no
/// consumption.
pub fn label_from_log(log: &SessionLog, n_intents: usize) -> Option<(Vec<f64>, Vec<u8>)> {
    let consumption = log.consumed.as_ref()?;
    let mut y = vec![0u8; n_intents];
    for &v in &consumption.aligned {
        y[v as usize] = 1;
    }
    Some((log.features.clone(), y))
}

/// One step of the return-propensity recursion:
/// `rho * current + (1 - rho) * day_satisfaction`, clipped to [0, 1].
pub fn return_propensity_step(current: f64, day_satisfaction: f64, rho: f64) -> f64 {
    (rho * current + (1.0 - rho) * day_satisfaction).clamp(0.0, 1.0)
}

impl UserProfile {
    /// Applies [`return_propensity_step`] in place.
    pub fn update_return_propensity(&mut self, day_satisfaction: f64, rho: f64) {
        self.return_propensity =
            return_propensity_step(self.return_propensity, day_satisfaction, rho);
    }
}

/// Builds the deterministic world (catalog and user population) for a config.
pub fn generate_world(cfg: &SimConfig) -> Result<(Catalog, Vec<UserProfile>)> {
    cfg.validate()?;
    let mut rng = crate::rng::substream(cfg.seed, &[crate::rng::stream::WORLD]);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let creators_per_cluster = cfg.n_creators.div_ceil(cfg.n_clusters);
    let items = (0..cfg.catalog_size)
        .map(|i| {
            let creator = (i % cfg.n_creators) as u32;
            let cluster = (creator as usize / creators_per_cluster) as u32;
            let intrinsic_quality = rng.random_range(cfg.quality_min..cfg.quality_max);
            let length = (8.0f64.ln() + 0.5 * normal.sample(&mut rng)).exp();
            CatalogItem {
                item_id: format!("i{i:06}"),
                creator,
                cluster,
                intrinsic_quality,
                aligned: vec![creator],
                length,
            }
        })
        .collect();
    let catalog = Catalog { items };

    let n_intents = cfg.n_intents();
    let users = (0..cfg.n_users)
        .map(|uid| {
            let base_logits: Vec<f64> = match cfg.intent_mode {
                IntentMode::TwoIntent => {
                    // One free logit against a zero reference.
                    vec![
                        cfg.base_logit_mean + cfg.base_logit_std * normal.sample(&mut rng),
                        0.0,
                    ]
                }
                IntentMode::CreatorIntent => (0..n_intents)
                    .map(|_| cfg.base_logit_std * normal.sample(&mut rng))
                    .collect(),
            };
            let phase = cfg.phase_jitter * normal.sample(&mut rng);
            // Familiarity-leaning users finish what they start more often.
            let explore_trait = 1.0 / (1.0 + (-base_logits[0]).exp());
            let completion_mean =
                (0.35 + 0.4 * (1.0 - explore_trait) + 0.05 * normal.sample(&mut rng))
                    .clamp(0.05, 0.95);

            // Partial Fisher-Yates for the initial engagement history.
            let mut creators: Vec<u32> = (0..cfg.n_creators as u32).collect();
            for i in 0..cfg.initial_seen_creators {
                let j = rng.random_range(i..cfg.n_creators);
                creators.swap(i, j);
            }
            let seen_creators: BTreeSet<u32> = creators[..cfg.initial_seen_creators]
                .iter()
                .copied()
                .collect();

            UserProfile {
                user_id: uid as u32,
                base_logits,
                hourly_amplitude: cfg.hourly_amplitude,
                phase,
                patience: cfg.patience,
                continuation_prob: cfg.continuation_prob,
                return_propensity: cfg.initial_return_propensity,
                seen_creators,
                completion_mean,
            }
        })
        .collect();

    Ok((catalog, users))
}
