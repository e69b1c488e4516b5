//! Greedy intent diversification.
//!
//! A slate is filled one position at a time. Each remaining candidate is
//! scored as `quality * expected_satisfaction^gamma`, where expected
//! satisfaction is the belief-weighted probability that the item satisfies
//! the user's intent. After a candidate is placed, the belief is revised
//! under the counterfactual assumption that the user rejected it, so the
//! intents the placed item covers lose weight and under-covered intents rise
//! for the next position.
//!
//! Three revisions of the rejection update are provided, differing in how
//! mass is renormalized; see [`PosteriorMode`].

use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::error::{Error, Result};
use crate::intent::{IntentDistribution, IntentSpace};
use crate::sparse::SparseBelief;

/// How the belief is revised after assuming the user rejects a placed item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorMode {
    /// Aligned entries are scaled by `(1 - base_value) / (1 - marginal)`,
    /// where the marginal is the item's expected satisfaction under the
    /// current belief; unaligned entries are untouched. Total mass is
    /// non-increasing, so beliefs become subnormalized. Default.
    PaperLiteral,
    /// Full Bayes rule for the rejection event: aligned entries scaled by
    /// `(1 - base_value) / (1 - marginal)`, unaligned entries by
    /// `1 / (1 - marginal)`. A normalized belief stays normalized.
    ExactBayes,
    /// Aligned entries are scaled by `(1 - base_value)` with no
    /// renormalization — the update of the classic greedy coverage scheme,
    /// whose step score equals the marginal gain of a submodular objective.
    Unnormalized,
}

impl PosteriorMode {
    pub const ALL: [PosteriorMode; 3] = [
        PosteriorMode::PaperLiteral,
        PosteriorMode::ExactBayes,
        PosteriorMode::Unnormalized,
    ];
}

impl std::fmt::Display for PosteriorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PosteriorMode::PaperLiteral => "paper-literal",
            PosteriorMode::ExactBayes => "exact-bayes",
            PosteriorMode::Unnormalized => "unnormalized",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for PosteriorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" => Ok(PosteriorMode::PaperLiteral),
            "exact-bayes" => Ok(PosteriorMode::ExactBayes),
            "unnormalized" => Ok(PosteriorMode::Unnormalized),
            other => Err(Error::InvalidConfig(format!(
                "unknown posterior mode `{other}` (expected paper-literal, exact-bayes or unnormalized)"
            ))),
        }
    }
}

/// Deterministic resolution of score ties in the per-position argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Lexicographically smallest item id wins.
    LowestItemId,
    /// Highest quality wins; remaining ties fall back to lowest item id.
    HighestQuality,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversifierConfig {
    /// Strength of the intent term; the step score is
    /// `quality * expected_satisfaction^gamma`.
    pub gamma: f64,
    pub posterior_mode: PosteriorMode,
    pub tie_break: TieBreak,
    /// Numerical floor for the rejection-update denominator.
    pub epsilon: f64,
    /// Trace snapshots are dense belief vectors up to this many intents and
    /// sparse deltas beyond it.
    pub dense_trace_threshold: usize,
}

impl Default for DiversifierConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            posterior_mode: PosteriorMode::PaperLiteral,
            tie_break: TieBreak::LowestItemId,
            epsilon: 1e-12,
            dense_trace_threshold: 64,
        }
    }
}

impl DiversifierConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma must be a positive finite real, got {}",
                self.gamma
            )));
        }
        validate_epsilon(self.epsilon)
    }
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "epsilon must lie in (0, 1e-6), got {epsilon}"
        )));
    }
    Ok(())
}

/// Belief state recorded in the trace after a position was filled.
///
/// `Dense` holds the materialized belief vector. `Delta` holds only the raw
/// entries the update changed plus the state's scale factor; materialized
/// beliefs are `raw * scale`, composing over the preceding steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefSnapshot {
    Dense(Vec<f64>),
    Delta {
        changed: Vec<(u32, f64)>,
        scale: f64,
    },
}

/// One filled position: the chosen item, its score, its expected satisfaction
/// under the belief it was scored with, and the revised belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub item_id: String,
    pub step_score: f64,
    pub marginal: f64,
    pub posterior: BeliefSnapshot,
}

/// The diversified ordering plus its per-position trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSlate {
    pub order: Vec<String>,
    pub trace: Vec<TraceStep>,
}

impl RankedSlate {
    /// Reconstructs the dense belief after each position from the trace.
    ///
    /// Entry `m` is the belief used to score position `m + 1`.
    pub fn materialized_posteriors(&self, prior: &IntentDistribution) -> Vec<Vec<f64>> {
        let mut raw = prior.probs().to_vec();
        let mut out = Vec::with_capacity(self.trace.len());
        for step in &self.trace {
            match &step.posterior {
                BeliefSnapshot::Dense(dense) => {
                    raw = dense.clone();
                    out.push(dense.clone());
                }
                BeliefSnapshot::Delta { changed, scale } => {
                    for &(v, r) in changed {
                        raw[v as usize] = r;
                    }
                    out.push(raw.iter().map(|&r| r * scale).collect());
                }
            }
        }
        out
    }
}

/// Probability that the user enjoys `c` given they hold `intent`: the base
/// value if the item aligns with the intent, zero otherwise.
pub fn intent_conditioned_value(space: &IntentSpace, c: &Candidate, intent: &str) -> Result<f64> {
    let index = space.require_index(intent)?;
    c.check_space(space.len())?;
    Ok(if c.is_aligned(index) {
        c.base_value
    } else {
        0.0
    })
}

/// Belief-weighted probability that `c` satisfies the user:
/// `base_value * sum of belief over the aligned intents`.
pub fn expected_satisfaction(d: &IntentDistribution, c: &Candidate) -> Result<f64> {
    c.check_space(d.len())?;
    let mut aligned_mass = 0.0;
    for &v in &c.aligned {
        aligned_mass += d.probs()[v as usize];
    }
    Ok(c.base_value * aligned_mass)
}

/// Per-position score `quality * expected_satisfaction^gamma`.
///
/// A zero expected satisfaction scores zero for every gamma, so items with no
/// belief mass on their aligned intents can never outrank covered items on
/// quality alone.
pub fn step_score(d: &IntentDistribution, c: &Candidate, gamma: f64) -> Result<f64> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "gamma must be a positive finite real, got {gamma}"
        )));
    }
    let es = expected_satisfaction(d, c)?;
    Ok(score_from_parts(c.quality, es, gamma))
}

#[inline]
fn score_from_parts(quality: f64, es: f64, gamma: f64) -> f64 {
    if es == 0.0 {
        0.0
    } else {
        quality * es.powf(gamma)
    }
}

/// `true` if `(score_a, a)` beats `(score_b, b)` under the tie-break rule.
#[inline]
fn prefer(tie: TieBreak, score_a: f64, a: &Candidate, score_b: f64, b: &Candidate) -> bool {
    match score_a.total_cmp(&score_b) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => match tie {
            TieBreak::LowestItemId => a.item_id < b.item_id,
            TieBreak::HighestQuality => match a.quality.total_cmp(&b.quality) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => a.item_id < b.item_id,
            },
        },
    }
}

/// Index (into `remaining`) of the candidate with the best step score under
/// belief `d`, ties resolved per `cfg.tie_break`.
pub fn select_next(
    d: &IntentDistribution,
    remaining: &[Candidate],
    cfg: &DiversifierConfig,
) -> Result<usize> {
    cfg.validate()?;
    if remaining.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut best = 0usize;
    let mut best_score = step_score(d, &remaining[0], cfg.gamma)?;
    for (i, c) in remaining.iter().enumerate().skip(1) {
        let score = step_score(d, c, cfg.gamma)?;
        if prefer(cfg.tie_break, score, c, best_score, &remaining[best]) {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

/// Counterfactual belief revision after assuming the user rejected `c`.
///
/// When the denominator degenerates (`1 - marginal < epsilon`) the aligned
/// entries are zeroed; under `ExactBayes` the unaligned remainder is
/// renormalized to sum 1 when it carries any mass.
pub fn posterior_update(
    d: &IntentDistribution,
    c: &Candidate,
    mode: PosteriorMode,
    epsilon: f64,
) -> Result<IntentDistribution> {
    validate_epsilon(epsilon)?;
    let marginal = expected_satisfaction(d, c)?;
    let q = c.base_value;
    let mut probs = d.probs().to_vec();

    if 1.0 - marginal < epsilon {
        for &v in &c.aligned {
            probs[v as usize] = 0.0;
        }
        if mode == PosteriorMode::ExactBayes {
            let unaligned: f64 = probs.iter().sum();
            if unaligned > 0.0 {
                probs
                    .iter_mut()
                    .for_each(|p| *p = (*p / unaligned).min(1.0));
                return IntentDistribution::normalized(probs);
            }
            return IntentDistribution::subnormalized(probs);
        }
        return IntentDistribution::subnormalized(probs);
    }

    match mode {
        PosteriorMode::PaperLiteral => {
            let factor = (1.0 - q) / (1.0 - marginal);
            for &v in &c.aligned {
                probs[v as usize] *= factor;
            }
            IntentDistribution::subnormalized(probs)
        }
        PosteriorMode::Unnormalized => {
            let factor = 1.0 - q;
            for &v in &c.aligned {
                probs[v as usize] *= factor;
            }
            IntentDistribution::subnormalized(probs)
        }
        PosteriorMode::ExactBayes => {
            let denom = 1.0 - marginal;
            let aligned_factor = (1.0 - q) / denom;
            let unaligned_factor = 1.0 / denom;
            let mut is_aligned = vec![false; probs.len()];
            for &v in &c.aligned {
                is_aligned[v as usize] = true;
            }
            for (p, aligned) in probs.iter_mut().zip(&is_aligned) {
                let factor = if *aligned {
                    aligned_factor
                } else {
                    unaligned_factor
                };
                *p *= factor;
            }
            // A normalized belief stays normalized under this update; pin the
            // sum to 1 so rounding cannot compound through the 1/denom
            // amplification over long update chains.
            if d.is_normalized() {
                let sum: f64 = probs.iter().sum();
                if sum > 0.0 {
                    probs.iter_mut().for_each(|p| *p = (*p / sum).min(1.0));
                }
                IntentDistribution::normalized(probs)
            } else {
                probs.iter_mut().for_each(|p| *p = p.min(1.0));
                IntentDistribution::subnormalized(probs)
            }
        }
    }
}

fn validate_slate_input(prior: &IntentDistribution, candidates: &[Candidate]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if !prior.is_normalized() {
        return Err(Error::InvalidInput(
            "diversify requires a normalized prior".to_string(),
        ));
    }
    let mut ids: Vec<&str> = candidates.iter().map(|c| c.item_id.as_str()).collect();
    ids.sort_unstable();
    for pair in ids.windows(2) {
        if pair[0] == pair[1] {
            return Err(Error::DuplicateItem(pair[0].to_string()));
        }
    }
    for c in candidates {
        c.check_space(prior.len())?;
    }
    Ok(())
}

/// Runs the full greedy loop over all candidates and records the trace.
///
/// The returned order is a permutation of the input item ids; trace entry `m`
/// holds the score and expected satisfaction the item at position `m + 1` was
/// selected with, plus the belief state after its rejection update.
pub fn diversify(
    prior: &IntentDistribution,
    candidates: &[Candidate],
    cfg: &DiversifierConfig,
) -> Result<RankedSlate> {
    diversify_impl(prior, candidates, cfg, true)
}

/// As [`diversify`] but skips trace materialization; used by the simulation
/// harness where only the ordering is consumed. Selection is identical.
pub fn diversify_order(
    prior: &IntentDistribution,
    candidates: &[Candidate],
    cfg: &DiversifierConfig,
) -> Result<Vec<usize>> {
    let slate = diversify_impl(prior, candidates, cfg, false)?;
    let mut by_id: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (i, c) in candidates.iter().enumerate() {
        by_id.insert(c.item_id.as_str(), i);
    }
    Ok(slate.order.iter().map(|id| by_id[id.as_str()]).collect())
}

fn diversify_impl(
    prior: &IntentDistribution,
    candidates: &[Candidate],
    cfg: &DiversifierConfig,
    with_trace: bool,
) -> Result<RankedSlate> {
    cfg.validate()?;
    validate_slate_input(prior, candidates)?;

    let n = candidates.len();
    let dense_trace = prior.len() <= cfg.dense_trace_threshold;
    let mut state = SparseBelief::from_prior(prior);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(if with_trace { n } else { 0 });

    for _ in 0..n {
        let mut best_pos = 0usize;
        let mut best_score = {
            let c = &candidates[remaining[0]];
            score_from_parts(c.quality, state.expected_satisfaction(c), cfg.gamma)
        };
        for (pos, &idx) in remaining.iter().enumerate().skip(1) {
            let c = &candidates[idx];
            let score = score_from_parts(c.quality, state.expected_satisfaction(c), cfg.gamma);
            if prefer(
                cfg.tie_break,
                score,
                c,
                best_score,
                &candidates[remaining[best_pos]],
            ) {
                best_pos = pos;
                best_score = score;
            }
        }

        let chosen = &candidates[remaining.swap_remove(best_pos)];
        let marginal = state.expected_satisfaction(chosen);
        let folded = state.update(chosen, cfg.posterior_mode, cfg.epsilon);
        order.push(chosen.item_id.clone());

        if with_trace {
            let posterior = if dense_trace || folded {
                // After a scale fold the raw entries are the materialized
                // beliefs, so later deltas still compose.
                BeliefSnapshot::Dense(state.materialize())
            } else {
                BeliefSnapshot::Delta {
                    changed: state.raw_entries(&chosen.aligned),
                    scale: state.scale(),
                }
            };
            trace.push(TraceStep {
                item_id: chosen.item_id.clone(),
                step_score: best_score,
                marginal,
                posterior,
            });
        }
    }

    Ok(RankedSlate { order, trace })
}
