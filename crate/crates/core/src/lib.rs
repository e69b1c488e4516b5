//! Intent-aware slate diversification and an offline evaluation harness.
//!
//! The library has three pillars:
//!
//! * [`divers`] — the greedy diversifier. Starting from a prior belief over
//!   user intents, it fills a slate one position at a time, scoring each
//!   candidate by `quality * expected_satisfaction^gamma` and then applying a
//!   counterfactual rejection update to the belief before the next position.
//!   [`sparse`] provides the equivalent update over a raw-values-plus-scale
//!   belief state so that very large intent spaces stay cheap.
//! * [`model`] — a softmax regression intent predictor trained with
//!   cross-entropy on page-level consumption labels, plus calibration, AUC and
//!   feature-correlation diagnostics.
//! * [`sim`] / [`metrics`] — a seeded synthetic-user world (cascade page
//!   views, latent intent process, return-propensity dynamics) and the metric
//!   aggregation used to compare a diversified policy against a quality-only
//!   control.
//!
//! [`oracle`] holds deliberately naive reference implementations (a dense
//!   re-transcription of the greedy loop, an analytic cascade objective and an
//!   exhaustive slate optimizer) used to verify the fast paths.

pub mod candidate;
pub mod divers;
pub mod error;
pub mod intent;
pub mod io;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod sparse;

pub use candidate::Candidate;
pub use divers::{
    diversify, expected_satisfaction, intent_conditioned_value, posterior_update, select_next,
    step_score, BeliefSnapshot, DiversifierConfig, PosteriorMode, RankedSlate, TieBreak, TraceStep,
};
pub use error::{Error, Result};
pub use intent::{IntentDistribution, IntentSpace, Normalization};
pub use sparse::SparseBelief;
