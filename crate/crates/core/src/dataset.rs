//! Labeling, balancing, splitting, and persistence of training data.
//!
//! The protocol: label each finished run 1 (terminated within the time
//! limit) or 0, down-sample the majority class so both classes have equal
//! counts, and split stratified by label. Every randomized step is a pure
//! function of its seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{extract_features, FeatureError, FeatureSet, FeatureSetSpec, FeatureVector};
use crate::trace::{Outcome, RunTrace};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("run has not finished; label requires a final outcome")]
    RunStillInProgress,
    #[error("need at least one example of each class")]
    OneClassOnly,
    #[error("split would leave a class empty on one side")]
    DegenerateSplit,
    #[error("test fraction must be strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset header mismatch: {detail}")]
    HeaderMismatch { detail: String },
    #[error("line {line}: wrong number of fields")]
    RowArity { line: u64 },
    #[error("line {line}: label must be 0 or 1")]
    BadLabel { line: u64 },
    #[error("have {traces} traces but {labels} labels")]
    LabelCountMismatch { traces: usize, labels: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One feature vector tagged 1 (terminating) or 0 (not terminating).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: u8,
    pub run_id: String,
}

/// A set of labeled examples under one feature spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub spec: FeatureSetSpec,
    /// Whether the stored feature values are already z-scored.
    pub normalized: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let positives = self.examples.iter().filter(|e| e.label == 1).count();
        (self.examples.len() - positives, positives)
    }
}

/// Label a finished run: 1 iff it terminated within `time_limit` seconds.
pub fn label_run(trace: &RunTrace, time_limit: f64) -> Result<u8, DatasetError> {
    match trace.outcome {
        Outcome::Terminated { total_runtime } => Ok(u8::from(total_runtime <= time_limit)),
        Outcome::TimedOut { .. } => Ok(0),
        Outcome::StillRunning => Err(DatasetError::RunStillInProgress),
    }
}

/// Build a class-balanced dataset from labeled traces.
///
/// The majority class is down-sampled uniformly at random and the result is
/// shuffled; both draws come from `seed` only.
pub fn build_balanced(
    traces: &[RunTrace],
    labels: &[u8],
    spec: &FeatureSetSpec,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    if traces.len() != labels.len() {
        return Err(DatasetError::LabelCountMismatch {
            traces: traces.len(),
            labels: labels.len(),
        });
    }
    let mut examples = Vec::with_capacity(traces.len());
    for (trace, &label) in traces.iter().zip(labels) {
        examples.push(LabeledExample {
            features: extract_features(trace, spec)?,
            label,
            run_id: trace.run_id.clone(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut zeros, mut ones): (Vec<_>, Vec<_>) = examples.into_iter().partition(|e| e.label == 0);
    if zeros.is_empty() || ones.is_empty() {
        return Err(DatasetError::OneClassOnly);
    }
    let keep = zeros.len().min(ones.len());
    for class in [&mut zeros, &mut ones] {
        class.shuffle(&mut rng);
        class.truncate(keep);
    }
    let mut balanced: Vec<LabeledExample> = zeros.into_iter().chain(ones).collect();
    balanced.shuffle(&mut rng);
    Ok(Dataset {
        examples: balanced,
        spec: *spec,
        normalized: false,
    })
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Stratified train/test split.
///
/// Each class is split independently; its test share is
/// `round_half_up(test_fraction * class_size)`. Membership is drawn from
/// `seed`; within each side the original example order is preserved.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::BadFraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_indices = Vec::new();
    for class in [0u8, 1u8] {
        let mut indices: Vec<usize> = ds
            .examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == class)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            continue;
        }
        let take = round_half_up(test_fraction * indices.len() as f64);
        if take == 0 || take == indices.len() {
            return Err(DatasetError::DegenerateSplit);
        }
        indices.shuffle(&mut rng);
        test_indices.extend_from_slice(&indices[..take]);
    }
    if test_indices.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let in_test: std::collections::HashSet<usize> = test_indices.into_iter().collect();
    let mut train = Vec::with_capacity(ds.len() - in_test.len());
    let mut test = Vec::with_capacity(in_test.len());
    for (i, example) in ds.examples.iter().enumerate() {
        if in_test.contains(&i) {
            test.push(example.clone());
        } else {
            train.push(example.clone());
        }
    }
    let make = |examples| Dataset { examples, spec: ds.spec, normalized: ds.normalized };
    Ok((make(train), make(test)))
}

/// Serialize a dataset: a comment line carrying the spec metadata, then a
/// CSV table `run_id,label,f0,...,f{n-1}`.
pub fn dataset_to_csv(ds: &Dataset) -> Result<String, DatasetError> {
    if ds.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut out = format!(
        "# spec={};K={};normalized={}\n",
        ds.spec.set_id,
        ds.spec.iterations,
        u8::from(ds.normalized)
    );
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["run_id".to_string(), "label".to_string()];
    header.extend((0..ds.spec.feature_len()).map(|i| format!("f{i}")));
    writer.write_record(&header).expect("csv into memory");
    for example in &ds.examples {
        let mut row = vec![example.run_id.clone(), example.label.to_string()];
        row.extend(example.features.iter().map(|v| v.to_string()));
        writer.write_record(&row).expect("csv into memory");
    }
    out.push_str(
        &String::from_utf8(writer.into_inner().expect("csv into memory")).expect("csv is utf-8"),
    );
    Ok(out)
}

/// Parse the dataset CSV format produced by [`dataset_to_csv`].
pub fn dataset_from_csv(text: &str) -> Result<Dataset, DatasetError> {
    let (meta, body) = text.split_once('\n').ok_or(DatasetError::HeaderMismatch {
        detail: "missing `# spec=...` comment line".into(),
    })?;
    let meta = meta
        .strip_prefix("# ")
        .ok_or(DatasetError::HeaderMismatch { detail: "missing `# spec=...` comment line".into() })?;
    let mut set_id: Option<FeatureSet> = None;
    let mut iterations: Option<usize> = None;
    let mut normalized: Option<bool> = None;
    for part in meta.split(';') {
        let (key, value) = part.split_once('=').ok_or(DatasetError::HeaderMismatch {
            detail: format!("bad metadata entry `{part}`"),
        })?;
        match key.trim() {
            "spec" => {
                set_id = Some(value.trim().parse().map_err(|e: String| {
                    DatasetError::HeaderMismatch { detail: e }
                })?)
            }
            "K" => {
                iterations = Some(value.trim().parse().map_err(|_| {
                    DatasetError::HeaderMismatch { detail: format!("bad K `{value}`") }
                })?)
            }
            "normalized" => {
                normalized = Some(match value.trim() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(DatasetError::HeaderMismatch {
                            detail: format!("bad normalized flag `{other}`"),
                        })
                    }
                })
            }
            other => {
                return Err(DatasetError::HeaderMismatch {
                    detail: format!("unknown metadata key `{other}`"),
                })
            }
        }
    }
    let (set_id, iterations, normalized) = match (set_id, iterations, normalized) {
        (Some(s), Some(k), Some(n)) => (s, k, n),
        _ => {
            return Err(DatasetError::HeaderMismatch {
                detail: "metadata must carry spec, K, and normalized".into(),
            })
        }
    };
    let spec = FeatureSetSpec::new(set_id, iterations);
    let expected_len = spec.feature_len();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(body.as_bytes());
    {
        let header = reader
            .headers()
            .map_err(|e| DatasetError::HeaderMismatch { detail: e.to_string() })?;
        if header.len() != expected_len + 2
            || header.get(0) != Some("run_id")
            || header.get(1) != Some("label")
        {
            return Err(DatasetError::HeaderMismatch {
                detail: format!(
                    "expected run_id,label,f0..f{} for {} x K={}",
                    expected_len - 1,
                    set_id,
                    iterations
                ),
            });
        }
    }
    let mut examples = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, .. } => DatasetError::RowArity {
                line: pos.as_ref().map(|p| p.line()).unwrap_or(0) + 1,
            },
            _ => DatasetError::HeaderMismatch { detail: e.to_string() },
        })?;
        if !more {
            break;
        }
        // +1: the metadata comment line is outside the csv reader's view.
        let line = record.position().map(|p| p.line()).unwrap_or(0) + 1;
        if record.len() != expected_len + 2 {
            return Err(DatasetError::RowArity { line });
        }
        let label: u8 = match record.get(1).unwrap_or("").trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(DatasetError::BadLabel { line }),
        };
        let mut features = Vec::with_capacity(expected_len);
        for i in 0..expected_len {
            let value: f64 = record
                .get(i + 2)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| DatasetError::RowArity { line })?;
            features.push(value);
        }
        examples.push(LabeledExample {
            features,
            label,
            run_id: record.get(0).unwrap_or("").to_string(),
        });
    }
    if examples.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(Dataset { examples, spec, normalized })
}

/// Write a dataset to a CSV file.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<std::path::Path>) -> Result<(), DatasetError> {
    std::fs::write(path, dataset_to_csv(ds)?)?;
    Ok(())
}

/// Read a dataset from a CSV file.
pub fn load_dataset(path: impl AsRef<std::path::Path>) -> Result<Dataset, DatasetError> {
    dataset_from_csv(&std::fs::read_to_string(path)?)
}
