//! Flat key-value run configurations.
//!
//! Each subcommand reads an optional TOML file of flat keys, applies
//! command-line overrides, validates, and writes the resolved result as
//! `resolved.toml` next to its outputs. Unknown keys are rejected. The
//! resolved copy never contains paths, so repeated runs with the same seed
//! produce byte-identical output directories.

use std::path::Path;

use serde::{Deserialize, Serialize};

use slatediv::divers::{DiversifierConfig, PosteriorMode, TieBreak};
use slatediv::model::TrainConfig;
use slatediv::sim::{IntentMode, Policy, SimConfig};

use crate::CliError;

pub fn load_toml<T: serde::de::DeserializeOwned + Default>(
    path: Option<&Path>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
        }
    }
}

pub fn write_resolved<T: Serialize>(out_dir: &Path, resolved: &T) -> Result<(), CliError> {
    let text = toml::to_string_pretty(resolved)
        .map_err(|e| CliError::Data(format!("cannot serialize resolved config: {e}")))?;
    std::fs::write(out_dir.join("resolved.toml"), text)
        .map_err(|e| CliError::Data(format!("cannot write resolved config: {e}")))?;
    Ok(())
}

fn default_tie_break() -> String {
    "lowest-item-id".to_string()
}

fn default_epsilon() -> f64 {
    1e-12
}

fn default_dense_trace_threshold() -> usize {
    64
}

fn default_gamma() -> f64 {
    0.02
}

fn default_mode() -> String {
    "paper-literal".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiversifyConfig {
    pub seed: u64,
    pub gamma: f64,
    pub mode: String,
    pub tie_break: String,
    pub epsilon: f64,
    pub dense_trace_threshold: usize,
}

impl Default for DiversifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gamma: default_gamma(),
            mode: default_mode(),
            tie_break: default_tie_break(),
            epsilon: default_epsilon(),
            dense_trace_threshold: default_dense_trace_threshold(),
        }
    }
}

impl DiversifyConfig {
    pub fn diversifier(&self) -> Result<DiversifierConfig, CliError> {
        let cfg = DiversifierConfig {
            gamma: self.gamma,
            posterior_mode: parse_mode(&self.mode)?,
            tie_break: parse_tie_break(&self.tie_break)?,
            epsilon: self.epsilon,
            dense_trace_threshold: self.dense_trace_threshold,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn parse_mode(s: &str) -> Result<PosteriorMode, CliError> {
    s.parse()
        .map_err(|e: slatediv::Error| CliError::Usage(e.to_string()))
}

fn parse_tie_break(s: &str) -> Result<TieBreak, CliError> {
    match s {
        "lowest-item-id" => Ok(TieBreak::LowestItemId),
        "highest-quality" => Ok(TieBreak::HighestQuality),
        other => Err(CliError::Usage(format!(
            "unknown tie_break `{other}` (expected lowest-item-id or highest-quality)"
        ))),
    }
}

/// Flat simulator settings shared by `simulate` and `sweep-gamma`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimKeys {
    pub seed: u64,
    pub n_users: usize,
    pub n_days: usize,
    pub sessions_per_day: usize,
    pub page_size: usize,
    pub pool_size: usize,
    pub catalog_size: usize,
    pub n_creators: usize,
    pub n_clusters: usize,
    pub intent_mode: String,
    pub quality_noise_sigma: f64,
    pub familiar_pool_weight: f64,
    pub initial_seen_creators: usize,
    pub quality_min: f64,
    pub quality_max: f64,
    pub base_logit_mean: f64,
    pub base_logit_std: f64,
    pub hourly_amplitude: f64,
    pub phase_jitter: f64,
    pub patience: u32,
    pub continuation_prob: f64,
    pub return_decay: f64,
    pub initial_return_propensity: f64,
    pub train_learning_rate: f64,
    pub train_epochs: usize,
    pub train_batch_size: usize,
    pub train_l2: f64,
    pub train_window_days: usize,
    pub min_train_examples: usize,
    pub metrics_k: Option<usize>,
    pub write_logs: bool,
    pub bootstrap_resamples: usize,
}

impl Default for SimKeys {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            seed: d.seed,
            n_users: d.n_users,
            n_days: d.n_days,
            sessions_per_day: d.sessions_per_day,
            page_size: d.page_size,
            pool_size: d.pool_size,
            catalog_size: d.catalog_size,
            n_creators: d.n_creators,
            n_clusters: d.n_clusters,
            intent_mode: "two-intent".to_string(),
            quality_noise_sigma: d.quality_noise_sigma,
            familiar_pool_weight: d.familiar_pool_weight,
            initial_seen_creators: d.initial_seen_creators,
            quality_min: d.quality_min,
            quality_max: d.quality_max,
            base_logit_mean: d.base_logit_mean,
            base_logit_std: d.base_logit_std,
            hourly_amplitude: d.hourly_amplitude,
            phase_jitter: d.phase_jitter,
            patience: d.patience,
            continuation_prob: d.continuation_prob,
            return_decay: d.return_decay,
            initial_return_propensity: d.initial_return_propensity,
            train_learning_rate: d.train.learning_rate,
            train_epochs: d.train.epochs,
            train_batch_size: d.train.batch_size,
            train_l2: d.train.l2,
            train_window_days: d.train_window_days,
            min_train_examples: d.min_train_examples,
            metrics_k: d.metrics_k,
            write_logs: true,
            bootstrap_resamples: 1000,
        }
    }
}

impl SimKeys {
    pub fn to_sim_config(&self, policy: Policy) -> Result<SimConfig, CliError> {
        let intent_mode = match self.intent_mode.as_str() {
            "two-intent" => IntentMode::TwoIntent,
            "creator-intent" => IntentMode::CreatorIntent,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown intent_mode `{other}` (expected two-intent or creator-intent)"
                )))
            }
        };
        let cfg = SimConfig {
            n_users: self.n_users,
            n_days: self.n_days,
            sessions_per_day: self.sessions_per_day,
            page_size: self.page_size,
            pool_size: self.pool_size,
            catalog_size: self.catalog_size,
            n_creators: self.n_creators,
            n_clusters: self.n_clusters,
            seed: self.seed,
            policy,
            intent_mode,
            quality_noise_sigma: self.quality_noise_sigma,
            familiar_pool_weight: self.familiar_pool_weight,
            initial_seen_creators: self.initial_seen_creators,
            quality_min: self.quality_min,
            quality_max: self.quality_max,
            base_logit_mean: self.base_logit_mean,
            base_logit_std: self.base_logit_std,
            hourly_amplitude: self.hourly_amplitude,
            phase_jitter: self.phase_jitter,
            patience: self.patience,
            continuation_prob: self.continuation_prob,
            return_decay: self.return_decay,
            initial_return_propensity: self.initial_return_propensity,
            train: TrainConfig {
                learning_rate: self.train_learning_rate,
                epochs: self.train_epochs,
                batch_size: self.train_batch_size,
                l2: self.train_l2,
                seed: 0,
            },
            train_window_days: self.train_window_days,
            min_train_examples: self.min_train_examples,
            metrics_k: self.metrics_k,
            keep_logs: self.write_logs,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub sim: SimKeys,
    pub arm: String,
    pub gamma: f64,
    pub mode: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            sim: SimKeys::default(),
            arm: "both".to_string(),
            gamma: default_gamma(),
            mode: default_mode(),
        }
    }
}

impl SimulateConfig {
    pub fn treatment_policy(&self) -> Result<Policy, CliError> {
        Ok(Policy::Treatment {
            gamma: self.gamma,
            mode: parse_mode(&self.mode)?,
        })
    }
}

fn default_gammas() -> Vec<f64> {
    vec![0.005, 0.01, 0.02, 0.04]
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub sim: SimKeys,
    pub gammas: Vec<f64>,
    pub mode: String,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sim: SimKeys::default(),
            gammas: default_gammas(),
            mode: default_mode(),
            workers: default_workers(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainIntentConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    /// Intent whose predictions drive the feature-correlation table; defaults
    /// to the dataset's first intent.
    pub correlation_intent: Option<String>,
}

impl Default for TrainIntentConfig {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            seed: d.seed,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            l2: d.l2,
            correlation_intent: None,
        }
    }
}

impl TrainIntentConfig {
    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let cfg = TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            l2: self.l2,
            seed: self.seed,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    pub seed: u64,
    pub buckets: usize,
    pub bootstrap_resamples: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            buckets: 10,
            bootstrap_resamples: 1000,
        }
    }
}
