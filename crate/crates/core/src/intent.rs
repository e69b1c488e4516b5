//! Intent spaces and belief distributions over them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum tolerance for normalized distributions.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// An ordered set of intent identifiers. The position of an id in the list is
/// its dense index; all belief vectors are indexed the same way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct IntentSpace {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl IntentSpace {
    pub fn new<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        if ids.is_empty() {
            return Err(Error::EmptyIntentSpace);
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i as u32).is_some() {
                return Err(Error::DuplicateIntent(id.clone()));
            }
        }
        Ok(Self { ids, index })
    }

    /// Dense space `0..n` with numeric ids, for synthetic and perf workloads.
    pub fn dense(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn require_index(&self, id: &str) -> Result<u32> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownIntent(id.to_string()))
    }

    pub fn id(&self, index: u32) -> Option<&str> {
        self.ids.get(index as usize).map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

impl TryFrom<Vec<String>> for IntentSpace {
    type Error = Error;
    fn try_from(ids: Vec<String>) -> Result<Self> {
        Self::new(ids)
    }
}

impl From<IntentSpace> for Vec<String> {
    fn from(space: IntentSpace) -> Self {
        space.ids
    }
}

/// Whether a belief vector is a proper distribution or has shed mass through
/// rejection updates that renormalize only the aligned entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Normalized,
    Subnormalized,
}

/// A belief vector over an intent space: `probs[v] = Pr(intent v)`.
///
/// `Normalized` vectors sum to 1 within [`NORMALIZATION_TOL`]; `Subnormalized`
/// vectors sum to at most `1 + NORMALIZATION_TOL`. Every entry lies in
/// `[0, 1]` in both cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDistribution {
    probs: Vec<f64>,
    normalization: Normalization,
}

impl IntentDistribution {
    pub fn normalized(probs: Vec<f64>) -> Result<Self> {
        Self::validated(probs, Normalization::Normalized)
    }

    pub fn subnormalized(probs: Vec<f64>) -> Result<Self> {
        Self::validated(probs, Normalization::Subnormalized)
    }

    fn validated(probs: Vec<f64>, normalization: Normalization) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyIntentSpace);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbabilityOutOfRange { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        let ok = match normalization {
            Normalization::Normalized => (sum - 1.0).abs() <= NORMALIZATION_TOL,
            Normalization::Subnormalized => sum <= 1.0 + NORMALIZATION_TOL,
        };
        if !ok {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self {
            probs,
            normalization,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyIntentSpace);
        }
        Self::normalized(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, index: u32) -> Option<f64> {
        self.probs.get(index as usize).copied()
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization == Normalization::Normalized
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }
}
