//! Page-level intent prediction.
//!
//! A softmax regression over standardized session/context features, trained
//! with cross-entropy against multi-hot consumption labels: an example's
//! label bit for intent `v` is set when the consumed item aligns with `v`.
//! The model is deliberately small — convex, gradient-checkable, retrainable
//! every simulated day — and stores its feature manifest and standardization
//! statistics so predictions are self-contained.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::IntentDistribution;
use crate::rng::{self, stream};

/// Floor applied inside `log` when computing the loss.
pub const LOG_FLOOR: f64 = 1e-12;

/// Canonical feature names produced by the simulator, in serialization order.
pub const CANONICAL_FEATURES: [&str; 11] = [
    "session_length",
    "session_consumptions",
    "time_since_last_session",
    "avg_completion_ratio",
    "avg_item_length",
    "past_activity_level",
    "repeated_consumption_ratio",
    "unique_clusters_consumed",
    "unique_creators",
    "hour_sin",
    "hour_cos",
];

/// A dataset of labeled pages with a fixed feature and intent ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<String>,
    pub intents: Vec<String>,
    pub examples: Vec<Example>,
}

/// One labeled page: feature values aligned with `Dataset::features` and a
/// multi-hot label aligned with `Dataset::intents`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: Vec<u8>,
}

impl Dataset {
    pub fn new(features: Vec<String>, intents: Vec<String>) -> Self {
        Self {
            features,
            intents,
            examples: Vec::new(),
        }
    }

    pub fn push(&mut self, x: Vec<f64>, y: Vec<u8>) -> Result<()> {
        if x.len() != self.features.len() || y.len() != self.intents.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".to_string()));
        }
        if !y.contains(&1) {
            return Err(Error::InvalidInput(
                "labels must have at least one active intent".to_string(),
            ));
        }
        self.examples.push(Example { x, y });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Per-feature standardization statistics from the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(examples: &[Example], d: usize) -> Self {
        let n = examples.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for e in examples {
            for (m, &x) in mean.iter_mut().zip(&e.x) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for e in examples {
            for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(&e.x) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .iter()
            .map(|&v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0 // constant feature: centering alone zeroes it out
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(&self.mean)
                .zip(&self.std)
                .map(|((&x, &m), &s)| (x - m) / s),
        );
    }
}

/// Softmax regression weights plus the manifest needed to apply them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentModelParams {
    pub intents: Vec<String>,
    pub features: Vec<String>,
    pub standardizer: Standardizer,
    /// Row per intent, column per feature.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl IntentModelParams {
    /// Zero-initialized parameters: predictions start uniform.
    pub fn zeros(intents: Vec<String>, features: Vec<String>) -> Self {
        let (k, d) = (intents.len(), features.len());
        Self {
            intents,
            features,
            standardizer: Standardizer::identity(d),
            weights: vec![vec![0.0; d]; k],
            bias: vec![0.0; k],
        }
    }

    pub fn n_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    fn check_dims(&self, d: usize) -> Result<()> {
        if d != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: d,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 5,
            batch_size: 64,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(
                "learning_rate must be > 0".to_string(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".to_string()));
        }
        if !self.l2.is_finite() || self.l2 < 0.0 {
            return Err(Error::InvalidConfig("l2 must be >= 0".to_string()));
        }
        Ok(())
    }
}

#[inline]
fn softmax_into(logits: &[f64], out: &mut Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    let mut sum = 0.0;
    for &z in logits {
        let e = (z - max).exp();
        out.push(e);
        sum += e;
    }
    out.iter_mut().for_each(|p| *p /= sum);
}

fn logits_into(params: &IntentModelParams, x_std: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for (row, &b) in params.weights.iter().zip(&params.bias) {
        let mut z = b;
        for (&w, &x) in row.iter().zip(x_std) {
            z += w * x;
        }
        out.push(z);
    }
}

/// Predicted intent probabilities for the raw feature vector `x`.
pub fn predict_intents(params: &IntentModelParams, x: &[f64]) -> Result<IntentDistribution> {
    params.check_dims(x.len())?;
    let mut x_std = Vec::with_capacity(x.len());
    params.standardizer.apply_into(x, &mut x_std);
    let mut logits = Vec::with_capacity(params.n_intents());
    logits_into(params, &x_std, &mut logits);
    let mut probs = Vec::with_capacity(params.n_intents());
    softmax_into(&logits, &mut probs);
    IntentDistribution::normalized(probs)
}

/// Probabilities for every example, preallocated caller-side workspace free.
pub fn predict_batch(params: &IntentModelParams, examples: &[Example]) -> Result<Vec<Vec<f64>>> {
    examples
        .iter()
        .map(|e| predict_intents(params, &e.x).map(IntentDistribution::into_probs))
        .collect()
}

/// Summed cross-entropy over the batch plus `l2 * ||W||^2`, with each log
/// floored at `ln(LOG_FLOOR)`.
pub fn loss(params: &IntentModelParams, examples: &[Example], l2: f64) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InvalidInput("empty batch".to_string()));
    }
    let mut total = 0.0;
    let mut x_std = Vec::new();
    let mut logits = Vec::new();
    let mut probs = Vec::new();
    for e in examples {
        params.check_dims(e.x.len())?;
        params.standardizer.apply_into(&e.x, &mut x_std);
        logits_into(params, &x_std, &mut logits);
        softmax_into(&logits, &mut probs);
        for (&p, &y) in probs.iter().zip(&e.y) {
            if y == 1 {
                total -= p.max(LOG_FLOOR).ln();
            }
        }
    }
    let reg: f64 = params
        .weights
        .iter()
        .flat_map(|row| row.iter())
        .map(|&w| w * w)
        .sum();
    Ok(total + l2 * reg)
}

/// Analytic gradient of [`loss`] with respect to weights and bias.
pub fn gradient(
    params: &IntentModelParams,
    examples: &[Example],
    l2: f64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::InvalidInput("empty batch".to_string()));
    }
    let (k, d) = (params.n_intents(), params.n_features());
    let mut grad_w = vec![vec![0.0; d]; k];
    let mut grad_b = vec![0.0; k];
    gradient_into(params, examples.iter(), l2, &mut grad_w, &mut grad_b)?;
    Ok((grad_w, grad_b))
}

fn gradient_into<'a>(
    params: &IntentModelParams,
    examples: impl Iterator<Item = &'a Example>,
    l2: f64,
    grad_w: &mut [Vec<f64>],
    grad_b: &mut [f64],
) -> Result<()> {
    let k = params.n_intents();
    grad_w.iter_mut().for_each(|row| row.fill(0.0));
    grad_b.fill(0.0);
    let mut x_std = Vec::new();
    let mut logits = Vec::new();
    let mut probs = Vec::new();
    for e in examples {
        params.check_dims(e.x.len())?;
        params.standardizer.apply_into(&e.x, &mut x_std);
        logits_into(params, &x_std, &mut logits);
        softmax_into(&logits, &mut probs);
        // d(loss)/d(logit_k) = (sum of active labels) * p_k - y_k
        let active: f64 = e.y.iter().map(|&y| y as f64).sum();
        for v in 0..k {
            let g = active * probs[v] - e.y[v] as f64;
            grad_b[v] += g;
            let row = &mut grad_w[v];
            for (gw, &x) in row.iter_mut().zip(&x_std) {
                *gw += g * x;
            }
        }
    }
    for (g_row, w_row) in grad_w.iter_mut().zip(&params.weights) {
        for (g, &w) in g_row.iter_mut().zip(w_row) {
            *g += 2.0 * l2 * w;
        }
    }
    Ok(())
}

/// Mini-batch gradient descent from zero initialization.
///
/// Features are standardized with statistics fit on `dataset` and stored in
/// the returned parameters. Deterministic for a fixed `cfg.seed`.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<IntentModelParams> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".to_string()));
    }
    let mut params = IntentModelParams::zeros(dataset.intents.clone(), dataset.features.clone());
    params.standardizer = Standardizer::fit(&dataset.examples, dataset.features.len());

    let n = dataset.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = rng::substream(cfg.seed, &[stream::TRAIN]);
    let (k, d) = (dataset.intents.len(), dataset.features.len());
    let mut grad_w = vec![vec![0.0; d]; k];
    let mut grad_b = vec![0.0; k];

    for _ in 0..cfg.epochs {
        // Fisher-Yates with the seeded stream.
        for i in (1..n).rev() {
            let j = rand::Rng::random_range(&mut rng, 0..=i);
            indices.swap(i, j);
        }
        for chunk in indices.chunks(cfg.batch_size) {
            gradient_into(
                &params,
                chunk.iter().map(|&i| &dataset.examples[i]),
                cfg.l2,
                &mut grad_w,
                &mut grad_b,
            )?;
            let step = cfg.learning_rate / chunk.len() as f64;
            for (w_row, g_row) in params.weights.iter_mut().zip(&grad_w) {
                for (w, &g) in w_row.iter_mut().zip(g_row) {
                    *w -= step * g;
                }
            }
            for (b, &g) in params.bias.iter_mut().zip(&grad_b) {
                *b -= step * g;
            }
        }
    }
    Ok(params)
}

/// Ten-bin reliability row: predictions in `[lo, hi)` against observed label
/// frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_prediction: f64,
    pub label_rate: f64,
}

/// Evaluation of one intent column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentEval {
    pub intent: String,
    /// Rank-statistic AUC; absent when the label column is degenerate.
    pub auc: Option<f64>,
    /// Mean prediction / mean label; absent when no labels are positive.
    pub calibration_ratio: Option<f64>,
    pub reliability: Vec<ReliabilityBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_intent: Vec<IntentEval>,
    /// Mean per-example cross-entropy (no regularization term).
    pub log_loss: f64,
}

/// AUC via the Mann-Whitney rank statistic with midranks for ties.
/// `None` when either class is absent.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; ties share the midrank
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Per-intent AUC, calibration ratio and reliability table plus overall
/// log-loss on `dataset`.
pub fn evaluate(params: &IntentModelParams, dataset: &Dataset) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".to_string()));
    }
    let predictions = predict_batch(params, &dataset.examples)?;
    let n = dataset.len() as f64;
    let mut log_loss = 0.0;
    for (probs, e) in predictions.iter().zip(&dataset.examples) {
        for (&p, &y) in probs.iter().zip(&e.y) {
            if y == 1 {
                log_loss -= p.max(LOG_FLOOR).ln();
            }
        }
    }
    log_loss /= n;

    let mut per_intent = Vec::with_capacity(dataset.intents.len());
    for (v, intent) in dataset.intents.iter().enumerate() {
        let scores: Vec<f64> = predictions.iter().map(|p| p[v]).collect();
        let labels: Vec<u8> = dataset.examples.iter().map(|e| e.y[v]).collect();
        let mean_pred = scores.iter().sum::<f64>() / n;
        let mean_label = labels.iter().map(|&y| y as f64).sum::<f64>() / n;
        let calibration_ratio = if mean_label > 0.0 {
            Some(mean_pred / mean_label)
        } else {
            None
        };

        let mut bins: Vec<(usize, f64, f64)> = vec![(0, 0.0, 0.0); 10];
        for (&p, &y) in scores.iter().zip(&labels) {
            let b = ((p * 10.0) as usize).min(9);
            bins[b].0 += 1;
            bins[b].1 += p;
            bins[b].2 += y as f64;
        }
        let reliability = bins
            .into_iter()
            .enumerate()
            .map(|(b, (count, p_sum, y_sum))| ReliabilityBin {
                lo: b as f64 / 10.0,
                hi: (b + 1) as f64 / 10.0,
                count,
                mean_prediction: if count > 0 { p_sum / count as f64 } else { 0.0 },
                label_rate: if count > 0 { y_sum / count as f64 } else { 0.0 },
            })
            .collect();

        per_intent.push(IntentEval {
            intent: intent.clone(),
            auc: auc(&scores, &labels),
            calibration_ratio,
            reliability,
        });
    }
    Ok(EvalReport {
        per_intent,
        log_loss,
    })
}

/// Pearson correlation of each feature with `predictions`, sorted by `|r|`
/// descending; constant columns (or constant predictions) report `None` and
/// sort last. Requires at least 3 examples.
pub fn feature_correlations(
    dataset: &Dataset,
    predictions: &[f64],
) -> Result<Vec<(String, Option<f64>)>> {
    if dataset.len() < 3 {
        return Err(Error::InvalidInput(
            "feature correlations need at least 3 examples".to_string(),
        ));
    }
    if predictions.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.len(),
            got: predictions.len(),
        });
    }
    let n = dataset.len() as f64;
    let pred_mean = predictions.iter().sum::<f64>() / n;
    let pred_var: f64 = predictions.iter().map(|p| (p - pred_mean).powi(2)).sum();

    let mut rows: Vec<(String, Option<f64>)> = dataset
        .features
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mean = dataset.examples.iter().map(|e| e.x[j]).sum::<f64>() / n;
            let mut cov = 0.0;
            let mut var = 0.0;
            for (e, &p) in dataset.examples.iter().zip(predictions) {
                let dx = e.x[j] - mean;
                cov += dx * (p - pred_mean);
                var += dx * dx;
            }
            let r = if var > 1e-24 && pred_var > 1e-24 {
                Some(cov / (var.sqrt() * pred_var.sqrt()))
            } else {
                None
            };
            (name.clone(), r)
        })
        .collect();

    rows.sort_by(|a, b| match (a.1, b.1) {
        (Some(ra), Some(rb)) => rb.abs().total_cmp(&ra.abs()).then_with(|| a.0.cmp(&b.0)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.0.cmp(&b.0),
    });
    Ok(rows)
}

/// Fraction of examples whose highest-probability intent is an active label.
pub fn accuracy(params: &IntentModelParams, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".to_string()));
    }
    let predictions = predict_batch(params, &dataset.examples)?;
    let mut hits = 0usize;
    for (probs, e) in predictions.iter().zip(&dataset.examples) {
        let argmax = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if e.y[argmax] == 1 {
            hits += 1;
        }
    }
    Ok(hits as f64 / dataset.len() as f64)
}
