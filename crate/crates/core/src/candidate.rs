//! Recommendation candidates as seen by the diversifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::IntentSpace;

/// Upper bound on `base_value`, keeping rejection-update denominators finite.
pub const MAX_BASE_VALUE: f64 = 1.0 - 1e-9;

/// One item eligible for a slate.
///
/// `quality` is the upstream ranker's score: non-negative, with no
/// probabilistic meaning. `base_value` is the probability the user enjoys the
/// item, independent of intent. `aligned` lists the dense indices of the
/// intents the item can satisfy; outside that set the item contributes zero
/// intent-conditioned value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub item_id: String,
    pub quality: f64,
    pub base_value: f64,
    pub aligned: Vec<u32>,
    pub novelty: bool,
}

impl Candidate {
    /// Builds a candidate from dense intent indices, validating ranges and
    /// sorting/deduplicating the aligned set.
    pub fn new(
        item_id: impl Into<String>,
        quality: f64,
        base_value: f64,
        aligned: impl IntoIterator<Item = u32>,
        novelty: bool,
    ) -> Result<Self> {
        let item_id = item_id.into();
        let invalid = |reason: &str| Error::InvalidCandidate {
            item_id: item_id.clone(),
            reason: reason.to_string(),
        };
        if !quality.is_finite() || quality < 0.0 {
            return Err(invalid("quality must be a finite non-negative real"));
        }
        if !base_value.is_finite() || !(0.0..=MAX_BASE_VALUE).contains(&base_value) {
            return Err(invalid("base_value must lie in [0, 1 - 1e-9]"));
        }
        let mut aligned: Vec<u32> = aligned.into_iter().collect();
        aligned.sort_unstable();
        aligned.dedup();
        if aligned.is_empty() {
            return Err(invalid("aligned intent set must be non-empty"));
        }
        Ok(Self {
            item_id,
            quality,
            base_value,
            aligned,
            novelty,
        })
    }

    /// Builds a candidate from intent names resolved against `space`.
    pub fn with_intent_names<'a>(
        item_id: impl Into<String>,
        quality: f64,
        base_value: f64,
        aligned: impl IntoIterator<Item = &'a str>,
        novelty: bool,
        space: &IntentSpace,
    ) -> Result<Self> {
        let indices = aligned
            .into_iter()
            .map(|id| space.require_index(id))
            .collect::<Result<Vec<u32>>>()?;
        let c = Self::new(item_id, quality, base_value, indices, novelty)?;
        c.check_space(space.len())?;
        Ok(c)
    }

    /// Verifies the aligned indices fit a space of `n_intents`.
    pub fn check_space(&self, n_intents: usize) -> Result<()> {
        match self.aligned.last() {
            Some(&max) if (max as usize) >= n_intents => Err(Error::InvalidCandidate {
                item_id: self.item_id.clone(),
                reason: format!("aligned intent index {max} outside space of size {n_intents}"),
            }),
            _ => Ok(()),
        }
    }

    /// Membership test against the sorted aligned set.
    #[inline]
    pub fn is_aligned(&self, intent: u32) -> bool {
        self.aligned.binary_search(&intent).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_quality() {
        assert!(Candidate::new("c1", -0.1, 0.5, [0], false).is_err());
    }

    #[test]
    fn rejects_base_value_at_one() {
        assert!(Candidate::new("c1", 1.0, 1.0, [0], false).is_err());
        assert!(Candidate::new("c1", 1.0, MAX_BASE_VALUE, [0], false).is_ok());
    }

    #[test]
    fn rejects_empty_alignment() {
        assert!(Candidate::new("c1", 1.0, 0.5, [], false).is_err());
    }

    #[test]
    fn sorts_and_dedups_alignment() {
        let c = Candidate::new("c1", 1.0, 0.5, [3, 1, 3, 2], false).unwrap();
        assert_eq!(c.aligned, vec![1, 2, 3]);
        assert!(c.is_aligned(2));
        assert!(!c.is_aligned(0));
    }

    #[test]
    fn resolves_intent_names() {
        let space = IntentSpace::new(["a", "b"]).unwrap();
        let c = Candidate::with_intent_names("c1", 1.0, 0.8, ["b"], true, &space).unwrap();
        assert_eq!(c.aligned, vec![1]);
        let err = Candidate::with_intent_names("c2", 1.0, 0.8, ["zz"], false, &space).unwrap_err();
        assert!(matches!(err, Error::UnknownIntent(_)));
    }

    #[test]
    fn check_space_catches_out_of_range() {
        let c = Candidate::new("c1", 1.0, 0.5, [5], false).unwrap();
        assert!(c.check_space(5).is_err());
        assert!(c.check_space(6).is_ok());
    }
}
