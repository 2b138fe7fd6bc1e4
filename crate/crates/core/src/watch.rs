//! One-shot early classification of a live solver run.
//!
//! Reads a stats stream incrementally and, as soon as the required number of
//! iteration blocks has closed, classifies the run and stops reading. The
//! verdict is exactly what [`crate::nn::predict`] would produce on the same
//! trace prefix.

use std::io::BufRead;

use thiserror::Error;

use crate::ingest::{lookup_adapter, IngestError, StreamParser};
use crate::nn::{predict, NnError, TrainedModel};

#[derive(Debug, Error)]
pub enum WatchError {
    #[error("insufficient-iterations: stream ended after {have} of {need}")]
    InsufficientIterations { have: usize, need: usize },
    #[error("watch window {flag} is shorter than the model's K={model_k}")]
    WindowTooShort { flag: usize, model_k: usize },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The early classification of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct WatchVerdict {
    pub class: u8,
    pub probability: f64,
    pub after_iteration: usize,
}

/// Watch a stats stream until `wait_iterations` blocks have closed (defaults
/// to the model's K), then classify the prefix. Reading stops at the verdict;
/// the rest of the stream is never consumed.
pub fn watch_stream<R: BufRead>(
    reader: R,
    tm: &TrainedModel,
    wait_iterations: Option<usize>,
    threshold: f64,
    adapter_id: &str,
    run_id: &str,
) -> Result<WatchVerdict, WatchError> {
    let need = wait_iterations.unwrap_or(tm.spec.iterations);
    if need < tm.spec.iterations {
        return Err(WatchError::WindowTooShort { flag: need, model_k: tm.spec.iterations });
    }
    let adapter = lookup_adapter(adapter_id)?;
    let mut parser = StreamParser::new(adapter, run_id, "");
    for line in reader.lines() {
        parser.push_line(&line?)?;
        if parser.completed_iterations() >= need {
            let prefix = parser.snapshot_trace()?;
            let (class, probability) = predict(tm, &prefix, threshold)?;
            return Ok(WatchVerdict { class, probability, after_iteration: need });
        }
    }
    Err(WatchError::InsufficientIterations {
        have: parser.completed_iterations(),
        need,
    })
}
