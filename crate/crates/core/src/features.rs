//! Feature extraction from run traces.
//!
//! A run's first `K` iterations are flattened into a fixed-length vector
//! under one of two parameter selections. The same runtime parameter counts
//! as a distinct feature per iteration; layout is iteration-major
//! (iteration 1's parameters first, then iteration 2's, ...).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{RunTrace, Stat};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("trace has {have} iterations, need {need}")]
    InsufficientIterations { have: usize, need: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Flattened feature values of one run.
pub type FeatureVector = Vec<f64>;

/// Which runtime parameters feed the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Set1,
    Set2,
}

impl FeatureSet {
    /// The selected parameters, in order. Set 1 has six, Set 2 seven.
    pub fn params(self) -> &'static [Stat] {
        match self {
            FeatureSet::Set1 => &[
                Stat::AllThreads,
                Stat::ConflictsPerSecond,
                Stat::BlockedRestarts,
                Stat::Restarts,
                Stat::PropsPerDecision,
                Stat::PropsPerConflict,
            ],
            FeatureSet::Set2 => &[
                Stat::AllThreads,
                Stat::ConflictsPerSecond,
                Stat::BlockedRestarts,
                Stat::Restarts,
                Stat::PropsPerDecision,
                Stat::LiteralsPerConflict,
                Stat::DecisionsPerConflict,
            ],
        }
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureSet::Set1 => "set1",
            FeatureSet::Set2 => "set2",
        })
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "set1" => Ok(FeatureSet::Set1),
            "set2" => Ok(FeatureSet::Set2),
            other => Err(format!("unknown feature set `{other}` (expected set1 or set2)")),
        }
    }
}

/// A feature selection plus how many leading iterations to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSetSpec {
    pub set_id: FeatureSet,
    /// Number of leading iterations, `K`.
    #[serde(rename = "K")]
    pub iterations: usize,
}

impl FeatureSetSpec {
    pub fn new(set_id: FeatureSet, iterations: usize) -> Self {
        assert!(iterations >= 1, "K must be at least 1");
        FeatureSetSpec { set_id, iterations }
    }

    /// Total feature count: parameters-per-iteration times K.
    /// 12 for (set1, K=2), 14 for (set2, K=2).
    pub fn feature_len(&self) -> usize {
        self.set_id.params().len() * self.iterations
    }
}

/// Flatten the first K iterations of a trace, iteration-major:
/// `out[(i-1)*P + j]` is parameter `j` of iteration `i`.
pub fn extract_features(trace: &RunTrace, spec: &FeatureSetSpec) -> Result<FeatureVector, FeatureError> {
    if trace.records.len() < spec.iterations {
        return Err(FeatureError::InsufficientIterations {
            have: trace.records.len(),
            need: spec.iterations,
        });
    }
    let params = spec.set_id.params();
    let mut out = Vec::with_capacity(spec.feature_len());
    for record in &trace.records[..spec.iterations] {
        for &stat in params {
            out.push(record.stat(stat));
        }
    }
    Ok(out)
}

/// Per-dimension z-score transform fitted on a training set.
///
/// Dimensions with zero variance carry the stddev sentinel 1 so that
/// applying the normalizer is always well defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// The do-nothing transform for `dim` dimensions.
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fit per-dimension mean and population standard deviation.
pub fn fit_normalizer(vectors: &[FeatureVector]) -> Result<Normalizer, FeatureError> {
    let first = vectors.first().ok_or(FeatureError::EmptyInput)?;
    let dim = first.len();
    for v in vectors {
        if v.len() != dim {
            return Err(FeatureError::LengthMismatch { expected: dim, got: v.len() });
        }
    }
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for v in vectors {
        for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
            let d = x - m;
            *s += d * d;
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 { sd } else { 1.0 }
        })
        .collect();
    Ok(Normalizer { mean, std })
}

/// Apply the transform: `out[d] = (v[d] - mean[d]) / std[d]`.
pub fn apply_normalizer(n: &Normalizer, v: &[f64]) -> Result<FeatureVector, FeatureError> {
    if v.len() != n.dim() {
        return Err(FeatureError::LengthMismatch { expected: n.dim(), got: v.len() });
    }
    Ok(v.iter()
        .zip(n.mean.iter().zip(&n.std))
        .map(|(x, (m, s))| (x - m) / s)
        .collect())
}
