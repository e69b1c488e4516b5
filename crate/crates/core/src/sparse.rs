//! Belief state with sparse rejection updates.
//!
//! The greedy loop only ever rescales the entries aligned with the item it
//! just placed. Holding the belief as raw per-intent values times one global
//! scale factor makes each update O(|aligned|): the literal and unnormalized
//! update modes multiply the aligned raw entries, and the exact-Bayes mode
//! additionally folds its global `1/(1 - marginal)` renormalization into the
//! scale factor instead of touching every entry.
//!
//! The exact-Bayes recursion amplifies perturbations of the total mass by
//! `1/(1 - marginal)` per step, so both this path and the dense one pin the
//! post-update mass to its implied value `(S - marginal)/(1 - marginal)`
//! (with `S` the pre-update mass) instead of letting rounding drift compound.

use crate::candidate::Candidate;
use crate::divers::PosteriorMode;
use crate::intent::IntentDistribution;

/// Fold the scale factor back into the raw entries beyond this magnitude so
/// long exact-Bayes runs cannot overflow.
const SCALE_FOLD_LIMIT: f64 = 1e100;

/// Lazy belief state: materialized belief for intent `v` is `raw[v] * scale`.
#[derive(Debug, Clone)]
pub struct SparseBelief {
    raw: Vec<f64>,
    scale: f64,
    /// Maintained sum of `raw`, updated incrementally and recomputed exactly
    /// whenever it has decayed 16x past the last exact sum — incremental
    /// tracking alone loses all precision once the entries decay far below
    /// the magnitude the rounding errors were committed at.
    raw_mass: f64,
    rescan_floor: f64,
    /// The state represents a full distribution (mass 1); exact-Bayes updates
    /// keep it that way by renormalizing through the scale factor. Cleared by
    /// the mass-shedding modes.
    pinned: bool,
    entry_writes: usize,
    scale_writes: usize,
}

impl SparseBelief {
    pub fn from_prior(prior: &IntentDistribution) -> Self {
        let raw_mass: f64 = prior.probs().iter().sum();
        Self {
            raw: prior.probs().to_vec(),
            scale: 1.0,
            raw_mass,
            rescan_floor: raw_mass / 16.0,
            pinned: prior.is_normalized(),
            entry_writes: 0,
            scale_writes: 0,
        }
    }

    fn maybe_rescan(&mut self) {
        if self.raw_mass.is_nan() || self.raw_mass <= self.rescan_floor {
            self.raw_mass = self.raw.iter().sum();
            self.rescan_floor = self.raw_mass / 16.0;
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn materialized(&self, intent: u32) -> f64 {
        self.raw[intent as usize] * self.scale
    }

    pub fn materialize(&self) -> Vec<f64> {
        self.raw.iter().map(|&r| r * self.scale).collect()
    }

    pub fn mass(&self) -> f64 {
        self.raw_mass * self.scale
    }

    /// Number of raw-entry writes performed so far.
    pub fn entry_writes(&self) -> usize {
        self.entry_writes
    }

    /// Number of scale-factor writes performed so far.
    pub fn scale_writes(&self) -> usize {
        self.scale_writes
    }

    /// `base_value * (aligned belief mass)` under the current state.
    ///
    /// Entries are materialized before summing so the expression matches the
    /// dense operation term by term; with `scale == 1` (the literal and
    /// unnormalized modes) the two are bit-identical.
    #[inline]
    pub fn expected_satisfaction(&self, c: &Candidate) -> f64 {
        let mut aligned_mass = 0.0;
        for &v in &c.aligned {
            aligned_mass += self.raw[v as usize] * self.scale;
        }
        c.base_value * aligned_mass
    }

    /// Applies the counterfactual rejection update for a placed candidate,
    /// touching only the aligned entries (plus the scale factor for
    /// `ExactBayes`). Returns `true` if the scale factor was folded back into
    /// the raw entries, which rewrites the whole vector.
    pub fn update(&mut self, c: &Candidate, mode: PosteriorMode, epsilon: f64) -> bool {
        let q = c.base_value;
        let mut aligned_raw = 0.0;
        for &v in &c.aligned {
            aligned_raw += self.raw[v as usize];
        }
        let marginal = self.expected_satisfaction(c);

        if 1.0 - marginal < epsilon {
            for &v in &c.aligned {
                self.raw[v as usize] = 0.0;
                self.entry_writes += 1;
            }
            self.raw_mass -= aligned_raw;
            self.maybe_rescan();
            if mode == PosteriorMode::ExactBayes && self.raw_mass > 0.0 {
                // The unaligned remainder is renormalized to a distribution.
                self.scale = 1.0 / self.raw_mass;
                self.scale_writes += 1;
                self.pinned = true;
            } else {
                self.pinned = false;
            }
            return false;
        }

        match mode {
            PosteriorMode::PaperLiteral => {
                let factor = (1.0 - q) / (1.0 - marginal);
                self.apply_aligned(c, factor);
                self.pinned = false;
                false
            }
            PosteriorMode::Unnormalized => {
                self.apply_aligned(c, 1.0 - q);
                self.pinned = false;
                false
            }
            PosteriorMode::ExactBayes => {
                let denom = 1.0 - marginal;
                self.apply_aligned(c, 1.0 - q);
                if self.pinned && self.raw_mass > 0.0 {
                    // Renormalize to mass 1 through the scale factor — the
                    // sparse counterpart of the dense path's sum pinning.
                    self.scale = 1.0 / self.raw_mass;
                } else {
                    self.scale /= denom;
                }
                self.scale_writes += 1;
                if self.scale > SCALE_FOLD_LIMIT {
                    for r in &mut self.raw {
                        *r *= self.scale;
                    }
                    self.scale = 1.0;
                    self.raw_mass = self.raw.iter().sum();
                    self.rescan_floor = self.raw_mass / 16.0;
                    true
                } else {
                    false
                }
            }
        }
    }

    fn apply_aligned(&mut self, c: &Candidate, factor: f64) {
        for &v in &c.aligned {
            let old = self.raw[v as usize];
            let new = old * factor;
            self.raw[v as usize] = new;
            self.raw_mass += new - old;
            self.entry_writes += 1;
        }
        self.maybe_rescan();
    }

    /// Raw values of the aligned entries of `c`; used for trace deltas.
    pub fn raw_entries(&self, indices: &[u32]) -> Vec<(u32, f64)> {
        indices.iter().map(|&v| (v, self.raw[v as usize])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divers::posterior_update;
    use crate::intent::IntentDistribution;
    use rand::Rng;

    fn cand(q: f64, aligned: &[u32]) -> Candidate {
        Candidate::new("c", 1.0, q, aligned.iter().copied(), false).unwrap()
    }

    #[test]
    fn empty_update_sequence_is_identity() {
        let prior = IntentDistribution::normalized(vec![0.6, 0.4]).unwrap();
        let state = SparseBelief::from_prior(&prior);
        assert_eq!(state.materialize(), vec![0.6, 0.4]);
        assert_eq!(state.entry_writes(), 0);
        assert_eq!(state.scale_writes(), 0);
    }

    #[test]
    fn touches_exactly_aligned_entries_plus_scale() {
        let n = 10_000;
        let prior = IntentDistribution::uniform(n).unwrap();
        let c = cand(0.5, &[3, 40, 500, 6_000, 9_999]);

        let mut literal = SparseBelief::from_prior(&prior);
        literal.update(&c, PosteriorMode::PaperLiteral, 1e-12);
        assert_eq!(literal.entry_writes(), 5);
        assert_eq!(literal.scale_writes(), 0);

        let mut bayes = SparseBelief::from_prior(&prior);
        bayes.update(&c, PosteriorMode::ExactBayes, 1e-12);
        assert_eq!(bayes.entry_writes(), 5);
        assert_eq!(bayes.scale_writes(), 1);
    }

    #[test]
    fn matches_dense_updates_over_random_sequences() {
        let mut rng = crate::rng::substream(11, &[1]);
        for mode in [
            PosteriorMode::PaperLiteral,
            PosteriorMode::ExactBayes,
            PosteriorMode::Unnormalized,
        ] {
            for _ in 0..60 {
                let n = rng.random_range(2..12usize);
                let mut probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
                let total: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= total);
                let mut dense = IntentDistribution::normalized(probs.clone()).unwrap();
                let mut sparse = SparseBelief::from_prior(&dense);

                for _ in 0..30 {
                    let k = rng.random_range(1..=n.min(4));
                    let mut aligned: Vec<u32> = (0..n as u32).collect();
                    for i in (1..aligned.len()).rev() {
                        aligned.swap(i, rng.random_range(0..=i));
                    }
                    aligned.truncate(k);
                    let c = cand(rng.random_range(0.0..0.85), &aligned);
                    dense = posterior_update(&dense, &c, mode, 1e-12).unwrap();
                    sparse.update(&c, mode, 1e-12);
                    let got = sparse.materialize();
                    for (a, b) in got.iter().zip(dense.probs()) {
                        assert!((a - b).abs() < 1e-12, "{a} vs {b} under {mode:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn exact_bayes_mass_stays_pinned_over_long_runs() {
        let prior = IntentDistribution::normalized(vec![0.5, 0.3, 0.2]).unwrap();
        let mut state = SparseBelief::from_prior(&prior);
        let cands = [cand(0.8, &[0]), cand(0.8, &[1]), cand(0.8, &[2])];
        for t in 0..600 {
            state.update(&cands[t % 3], PosteriorMode::ExactBayes, 1e-12);
            let m = state.mass();
            assert!((m - 1.0).abs() < 1e-9, "mass drifted to {m} at step {t}");
        }
    }

    #[test]
    fn folds_scale_before_overflow() {
        // Alternating single-intent items at high base value keep the
        // marginal large forever, so the scale grows without bound and must
        // fold.
        let prior = IntentDistribution::normalized(vec![0.5, 0.5]).unwrap();
        let mut state = SparseBelief::from_prior(&prior);
        let items = [cand(0.9, &[0]), cand(0.9, &[1])];
        let mut folded = false;
        for t in 0..600 {
            folded |= state.update(&items[t % 2], PosteriorMode::ExactBayes, 1e-12);
            assert!(state.scale().is_finite());
            assert!(state.mass().is_finite());
        }
        assert!(folded, "long run should hit the fold path");
        let m = state.mass();
        assert!((m - 1.0).abs() < 1e-6, "exact-Bayes mass stays 1, got {m}");
    }
}
