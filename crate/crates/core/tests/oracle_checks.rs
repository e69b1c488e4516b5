//! Cross-checks between the oracle, the fast diversifier and the simulator.

use rand::Rng;
use std::collections::BTreeSet;

use slatediv::divers::{diversify, DiversifierConfig, PosteriorMode, TieBreak};
use slatediv::oracle::{exhaustive_best_slate, reference_diversify, slate_satisfaction};
use slatediv::sim::{simulate_page_view, UserProfile};
use slatediv::{Candidate, IntentDistribution};

fn random_instance(
    rng: &mut impl Rng,
    m: usize,
    n_v: usize,
    uniform_quality: bool,
) -> (IntentDistribution, Vec<Candidate>) {
    let mut probs: Vec<f64> = (0..n_v).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let prior = IntentDistribution::normalized(probs).unwrap();
    let cands = (0..m)
        .map(|i| {
            let k = rng.random_range(1..=n_v.min(3));
            let mut aligned: Vec<u32> = (0..n_v as u32).collect();
            for j in (1..aligned.len()).rev() {
                aligned.swap(j, rng.random_range(0..=j));
            }
            aligned.truncate(k);
            let quality = if uniform_quality {
                1.0
            } else {
                rng.random_range(0.01..4.0)
            };
            Candidate::new(
                format!("c{i:03}"),
                quality,
                rng.random_range(0.05..0.85),
                aligned,
                false,
            )
            .unwrap()
        })
        .collect();
    (prior, cands)
}

#[test]
fn reference_and_fast_paths_agree_on_random_instances() {
    let mut rng = slatediv::rng::substream(808, &[1]);
    for mode in PosteriorMode::ALL {
        for _ in 0..150 {
            let m = rng.random_range(2..=20usize);
            let n_v = rng.random_range(2..=12usize);
            let (prior, cands) = random_instance(&mut rng, m, n_v, false);
            let cfg = DiversifierConfig {
                gamma: rng.random_range(0.01..2.5),
                posterior_mode: mode,
                ..Default::default()
            };
            let fast = diversify(&prior, &cands, &cfg).unwrap();
            let slow = reference_diversify(&prior, &cands, &cfg).unwrap();
            assert_eq!(fast.order, slow.order, "{mode:?}");
            for (a, b) in fast.trace.iter().zip(&slow.trace) {
                assert!((a.step_score - b.step_score).abs() < 1e-12);
                assert!((a.marginal - b.marginal).abs() < 1e-12);
            }
            let fast_posteriors = fast.materialized_posteriors(&prior);
            let slow_posteriors = slow.materialized_posteriors(&prior);
            for (pa, pb) in fast_posteriors.iter().zip(&slow_posteriors) {
                for (a, b) in pa.iter().zip(pb) {
                    assert!((a - b).abs() < 1e-12, "{mode:?}");
                }
            }
        }
    }
}

/// [`slate_satisfaction`] must equal the Monte-Carlo consumption frequency of
/// the cascade simulator on the same slate within 3 standard errors.
#[test]
fn analytic_satisfaction_matches_cascade_monte_carlo() {
    let mut rng = slatediv::rng::substream(77, &[2]);
    for case in 0..8 {
        let n_v = rng.random_range(2..4usize);
        let m = rng.random_range(1..6usize);
        let (prior, cands) = random_instance(&mut rng, m, n_v, false);
        let patience = rng.random_range(1..=6u32);
        let continuation = rng.random_range(0.4..1.0);

        // A profile whose intent draw at any fixed hour equals the prior.
        let profile = UserProfile {
            user_id: 0,
            base_logits: prior.probs().iter().map(|&p| p.ln()).collect(),
            hourly_amplitude: 0.0,
            phase: 0.0,
            patience,
            continuation_prob: continuation,
            return_propensity: 1.0,
            seen_creators: BTreeSet::new(),
            completion_mean: 0.5,
        };

        let analytic = slate_satisfaction(&prior, &cands, patience as usize, continuation);
        let trials = 60_000;
        let mut consumed = 0u32;
        for _ in 0..trials {
            let outcome = simulate_page_view(&profile, 12, &cands, &mut rng).unwrap();
            if outcome.consumed_position.is_some() {
                consumed += 1;
            }
        }
        let freq = consumed as f64 / trials as f64;
        let sigma = (analytic * (1.0 - analytic) / trials as f64)
            .sqrt()
            .max(1e-4);
        assert!(
            (freq - analytic).abs() < 3.0 * sigma,
            "case {case}: analytic {analytic} vs frequency {freq} (3 sigma {})",
            3.0 * sigma
        );
    }
}

/// In the unnormalized mode with uniform quality and gamma 1 the greedy step
/// score equals the marginal gain of the monotone submodular cascade
/// objective (full patience, no abandonment), so the classic approximation
/// bound applies.
#[test]
fn greedy_meets_submodular_guarantee_on_small_instances() {
    let mut rng = slatediv::rng::substream(31, &[3]);
    let bound = 1.0 - (-1.0f64).exp();
    for _ in 0..60 {
        let m = rng.random_range(3..=7usize);
        let k = rng.random_range(1..=m.min(5));
        let n_v = rng.random_range(2..=5usize);
        let (prior, cands) = random_instance(&mut rng, m, n_v, true);
        let cfg = DiversifierConfig {
            gamma: 1.0,
            posterior_mode: PosteriorMode::Unnormalized,
            tie_break: TieBreak::LowestItemId,
            ..Default::default()
        };
        let greedy = diversify(&prior, &cands, &cfg).unwrap();
        let greedy_slate: Vec<Candidate> = greedy
            .order
            .iter()
            .take(k)
            .map(|id| cands.iter().find(|c| &c.item_id == id).unwrap().clone())
            .collect();
        let greedy_value = slate_satisfaction(&prior, &greedy_slate, k, 1.0);
        let (_, best_value) = exhaustive_best_slate(&prior, &cands, k, k, 1.0).unwrap();
        assert!(
            greedy_value >= bound * best_value - 1e-12,
            "greedy {greedy_value} vs optimum {best_value}"
        );
    }
}

/// The exhaustive optimizer can never lose to the greedy ordering.
#[test]
fn exhaustive_dominates_greedy_in_every_mode() {
    let mut rng = slatediv::rng::substream(32, &[4]);
    for mode in PosteriorMode::ALL {
        for _ in 0..25 {
            let m = rng.random_range(3..=6usize);
            let k = rng.random_range(1..=m.min(4));
            let n_v = rng.random_range(2..=4usize);
            let (prior, cands) = random_instance(&mut rng, m, n_v, false);
            let patience = k;
            let continuation = rng.random_range(0.5..1.0);
            let cfg = DiversifierConfig {
                gamma: rng.random_range(0.2..1.5),
                posterior_mode: mode,
                ..Default::default()
            };
            let greedy = diversify(&prior, &cands, &cfg).unwrap();
            let greedy_slate: Vec<Candidate> = greedy
                .order
                .iter()
                .take(k)
                .map(|id| cands.iter().find(|c| &c.item_id == id).unwrap().clone())
                .collect();
            let greedy_value = slate_satisfaction(&prior, &greedy_slate, patience, continuation);
            let (_, best_value) =
                exhaustive_best_slate(&prior, &cands, k, patience, continuation).unwrap();
            assert!(best_value >= greedy_value - 1e-12);
        }
    }
}
