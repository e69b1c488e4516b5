//! Reference implementations used to verify the fast paths.
//!
//! Everything here favors obviousness over speed: the greedy loop is a dense
//! re-transcription with no shared state machinery, the cascade objective is
//! evaluated analytically per intent, and the slate optimizer enumerates
//! every ordered subset. Input sizes are guarded accordingly.

use crate::candidate::Candidate;
use crate::divers::{
    BeliefSnapshot, DiversifierConfig, PosteriorMode, RankedSlate, TieBreak, TraceStep,
};
use crate::error::{Error, Result};
use crate::intent::IntentDistribution;

/// Largest candidate set [`exhaustive_best_slate`] accepts.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Naive greedy diversification: same contract as [`crate::diversify`],
/// recomputed densely step by step. Trace snapshots are always dense.
pub fn reference_diversify(
    prior: &IntentDistribution,
    candidates: &[Candidate],
    cfg: &DiversifierConfig,
) -> Result<RankedSlate> {
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if !prior.is_normalized() {
        return Err(Error::InvalidInput(
            "reference_diversify requires a normalized prior".to_string(),
        ));
    }
    for c in candidates {
        c.check_space(prior.len())?;
    }

    let n_intents = prior.len();
    let mut belief: Vec<f64> = prior.probs().to_vec();
    let mut remaining: Vec<&Candidate> = candidates.iter().collect();
    let mut order = Vec::with_capacity(candidates.len());
    let mut trace = Vec::with_capacity(candidates.len());

    while !remaining.is_empty() {
        // Score every remaining candidate under the current belief.
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (i, c) in remaining.iter().enumerate() {
            let mut aligned_mass = 0.0;
            for &v in &c.aligned {
                aligned_mass += belief[v as usize];
            }
            let es = c.base_value * aligned_mass;
            let score = if es == 0.0 {
                0.0
            } else {
                c.quality * es.powf(cfg.gamma)
            };
            let wins = if i == 0 {
                true
            } else {
                match score.total_cmp(&best_score) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => match cfg.tie_break {
                        TieBreak::LowestItemId => c.item_id < remaining[best].item_id,
                        TieBreak::HighestQuality => {
                            match c.quality.total_cmp(&remaining[best].quality) {
                                std::cmp::Ordering::Greater => true,
                                std::cmp::Ordering::Less => false,
                                std::cmp::Ordering::Equal => c.item_id < remaining[best].item_id,
                            }
                        }
                    },
                }
            };
            if wins {
                best = i;
                best_score = score;
            }
        }

        let chosen = remaining.remove(best);
        let q = chosen.base_value;
        let mut aligned_mass = 0.0;
        for &v in &chosen.aligned {
            aligned_mass += belief[v as usize];
        }
        let marginal = q * aligned_mass;

        let mut is_aligned = vec![false; n_intents];
        for &v in &chosen.aligned {
            is_aligned[v as usize] = true;
        }

        if 1.0 - marginal < cfg.epsilon {
            for (b, aligned) in belief.iter_mut().zip(&is_aligned) {
                if *aligned {
                    *b = 0.0;
                }
            }
            if cfg.posterior_mode == PosteriorMode::ExactBayes {
                let unaligned: f64 = belief.iter().sum();
                if unaligned > 0.0 {
                    belief.iter_mut().for_each(|b| *b /= unaligned);
                }
            }
        } else {
            match cfg.posterior_mode {
                PosteriorMode::PaperLiteral => {
                    let factor = (1.0 - q) / (1.0 - marginal);
                    for (b, aligned) in belief.iter_mut().zip(&is_aligned) {
                        if *aligned {
                            *b *= factor;
                        }
                    }
                }
                PosteriorMode::Unnormalized => {
                    for (b, aligned) in belief.iter_mut().zip(&is_aligned) {
                        if *aligned {
                            *b *= 1.0 - q;
                        }
                    }
                }
                PosteriorMode::ExactBayes => {
                    let denom = 1.0 - marginal;
                    let fa = (1.0 - q) / denom;
                    let fu = 1.0 / denom;
                    for (b, aligned) in belief.iter_mut().zip(&is_aligned) {
                        let factor = if *aligned { fa } else { fu };
                        *b *= factor;
                    }
                    // Same sum pinning as the fast path: the belief in this
                    // mode is a distribution and stays one.
                    let sum: f64 = belief.iter().sum();
                    if sum > 0.0 {
                        belief.iter_mut().for_each(|b| *b /= sum);
                    }
                }
            }
        }

        order.push(chosen.item_id.clone());
        trace.push(TraceStep {
            item_id: chosen.item_id.clone(),
            step_score: best_score,
            marginal,
            posterior: BeliefSnapshot::Dense(belief.clone()),
        });
    }

    Ok(RankedSlate { order, trace })
}

/// Exact probability that a cascade user consumes some item of `slate`.
///
/// The user draws an intent from `prior`, scans at most `patience` positions
/// top-down, consumes an aligned item with probability `base_value` (and
/// stops), and otherwise continues to the next position with probability
/// `continuation` or abandons the page.
pub fn slate_satisfaction(
    prior: &IntentDistribution,
    slate: &[Candidate],
    patience: usize,
    continuation: f64,
) -> f64 {
    let depth = slate.len().min(patience);
    let mut total = 0.0;
    for (v, &p_v) in prior.probs().iter().enumerate() {
        if p_v == 0.0 {
            continue;
        }
        let mut reach = 1.0; // probability of scanning the current position
        let mut consume_given_v = 0.0;
        for c in &slate[..depth] {
            let accept = if c.is_aligned(v as u32) {
                c.base_value
            } else {
                0.0
            };
            consume_given_v += reach * accept;
            reach *= (1.0 - accept) * continuation;
        }
        total += p_v * consume_given_v;
    }
    total
}

/// Enumerates every ordered `k`-subset of `candidates` and returns the one
/// maximizing [`slate_satisfaction`], ties resolved by the lexicographically
/// smallest item-id sequence. Guarded to at most [`EXHAUSTIVE_LIMIT`]
/// candidates.
pub fn exhaustive_best_slate(
    prior: &IntentDistribution,
    candidates: &[Candidate],
    k: usize,
    patience: usize,
    continuation: f64,
) -> Result<(Vec<String>, f64)> {
    if candidates.len() > EXHAUSTIVE_LIMIT {
        return Err(Error::InvalidInput(format!(
            "exhaustive search is capped at {EXHAUSTIVE_LIMIT} candidates, got {}",
            candidates.len()
        )));
    }
    if k == 0 || k > candidates.len() {
        return Err(Error::InvalidInput(format!(
            "k must lie in 1..={}, got {k}",
            candidates.len()
        )));
    }
    for c in candidates {
        c.check_space(prior.len())?;
    }

    let mut best_ids: Option<Vec<&str>> = None;
    let mut best_value = f64::NEG_INFINITY;
    let mut current: Vec<usize> = Vec::with_capacity(k);
    let mut used = vec![false; candidates.len()];
    let mut scratch: Vec<Candidate> = Vec::with_capacity(k);

    #[allow(clippy::too_many_arguments)]
    fn recurse<'a>(
        prior: &IntentDistribution,
        candidates: &'a [Candidate],
        k: usize,
        patience: usize,
        continuation: f64,
        current: &mut Vec<usize>,
        used: &mut Vec<bool>,
        scratch: &mut Vec<Candidate>,
        best_ids: &mut Option<Vec<&'a str>>,
        best_value: &mut f64,
    ) {
        if current.len() == k {
            scratch.clear();
            scratch.extend(current.iter().map(|&i| candidates[i].clone()));
            let value = slate_satisfaction(prior, scratch, patience, continuation);
            let ids: Vec<&str> = current
                .iter()
                .map(|&i| candidates[i].item_id.as_str())
                .collect();
            let better = match value.total_cmp(best_value) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => best_ids.as_ref().is_some_and(|b| ids < *b),
            };
            if better {
                *best_value = value;
                *best_ids = Some(ids);
            }
            return;
        }
        for i in 0..candidates.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            current.push(i);
            recurse(
                prior,
                candidates,
                k,
                patience,
                continuation,
                current,
                used,
                scratch,
                best_ids,
                best_value,
            );
            current.pop();
            used[i] = false;
        }
    }

    recurse(
        prior,
        candidates,
        k,
        patience,
        continuation,
        &mut current,
        &mut used,
        &mut scratch,
        &mut best_ids,
        &mut best_value,
    );

    let ids = best_ids
        .expect("k >= 1 and candidates non-empty imply at least one permutation")
        .into_iter()
        .map(str::to_string)
        .collect();
    Ok((ids, best_value))
}
