//! Hit-ratio evaluation of a trained model on a held-out dataset.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::features::apply_normalizer;
use crate::nn::{forward_masked, NnError, TrainedModel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("model/dataset spec mismatch: {detail}")]
    SpecMismatch { detail: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Confusion-matrix counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fneg: usize,
}

/// Evaluation summary: test hit ratio and the model's final training
/// accuracy, reported side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub dataset_id: String,
    /// Fraction of correctly classified test runs.
    pub hit_ratio: f64,
    pub confusion: Confusion,
    pub n_test: usize,
    /// Accuracy on the training set after the final epoch; absent for a
    /// model trained zero epochs.
    pub training_accuracy: Option<f64>,
}

/// Classify every test example in inference mode and tally the hits.
///
/// Feature values are passed through the model's stored normalizer unless
/// the dataset is already normalized.
pub fn evaluate(tm: &TrainedModel, test: &Dataset, threshold: f64) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if test.spec != tm.spec {
        return Err(EvalError::SpecMismatch {
            detail: format!(
                "model expects {} x K={}, dataset is {} x K={}",
                tm.spec.set_id, tm.spec.iterations, test.spec.set_id, test.spec.iterations
            ),
        });
    }
    let mut confusion = Confusion { tp: 0, fp: 0, tn: 0, fneg: 0 };
    for example in &test.examples {
        let x = if test.normalized {
            example.features.clone()
        } else {
            apply_normalizer(&tm.normalizer, &example.features).map_err(NnError::from)?
        };
        let p = forward_masked(&tm.model, &x, None)?;
        let predicted = u8::from(p >= threshold);
        match (predicted, example.label) {
            (1, 1) => confusion.tp += 1,
            (1, 0) => confusion.fp += 1,
            (0, 0) => confusion.tn += 1,
            (0, _) => confusion.fneg += 1,
            _ => unreachable!("labels are validated to 0/1"),
        }
    }
    let n_test = test.len();
    Ok(EvalReport {
        model_id: String::new(),
        dataset_id: String::new(),
        hit_ratio: (confusion.tp + confusion.tn) as f64 / n_test as f64,
        confusion,
        n_test,
        training_accuracy: tm.history.last().map(|h| h.train_acc),
    })
}

/// Output format for [`render_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

/// Render a report. JSON output round-trips through serde; text output
/// lists every field.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        ReportFormat::Text => {
            let training = report
                .training_accuracy
                .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
            format!(
                "model:             {}\n\
                 dataset:           {}\n\
                 n_test:            {}\n\
                 hit_ratio:         {:.4}\n\
                 training_accuracy: {}\n\
                 confusion:         tp={} fp={} tn={} fn={}\n",
                report.model_id,
                report.dataset_id,
                report.n_test,
                report.hit_ratio,
                training,
                report.confusion.tp,
                report.confusion.fp,
                report.confusion.tn,
                report.confusion.fneg,
            )
        }
    }
}
