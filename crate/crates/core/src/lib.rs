//! Early termination forecasts for CDCL SAT solver runs.
//!
//! A solver attacking a hard instance either races to an answer or burns
//! days without one, and which of the two is underway shows in the runtime
//! statistics it prints after its first couple of iterations. This crate
//! turns those statistics into a binary forecast:
//!
//! - [`ingest`] parses solver verbose output (live or logged) and a
//!   canonical CSV trace format,
//! - [`features`] flattens the first K iterations into fixed-length feature
//!   vectors under two parameter selections,
//! - [`dataset`] labels runs against a time limit, balances the classes,
//!   and splits train/test,
//! - [`nn`] trains three small dense classifiers from scratch,
//! - [`eval`] reports hit ratios and confusion counts,
//! - [`synth`] generates seeded synthetic corpora with a known Bayes-optimal
//!   accuracy to test the whole pipeline against,
//! - [`plot`] draws parameter evolution curves and scatterplot matrices as
//!   standalone SVG,
//! - [`watch`] classifies a live run the moment enough iterations are in.
//!
//! Everything randomized is a pure function of its seed.

pub mod cnf;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod nn;
pub mod plot;
pub mod synth;
pub mod trace;
pub mod watch;

pub use dataset::{build_balanced, label_run, load_dataset, save_dataset, split, Dataset};
pub use eval::{evaluate, render_report, EvalReport, ReportFormat};
pub use features::{
    apply_normalizer, extract_features, fit_normalizer, FeatureSet, FeatureSetSpec, FeatureVector,
    Normalizer,
};
pub use ingest::{
    lookup_adapter, parse_canonical_csv, parse_stats_stream, serialize_canonical_csv,
    serialize_stats_stream, IngestError, LineAdapter, StreamParser,
};
pub use nn::{
    bce_loss, build_model, forward, load_model, model_from_json, model_to_json, predict,
    save_model, train, ArchId, Mode, Model, TrainConfig, TrainedModel,
};
pub use plot::{evolution_series, evolution_svg, scatter_matrix, series_to_csv, SeriesPoint};
pub use synth::{bayes_accuracy, generate_corpus, generate_trace, BayesEstimate, GeneratorParams};
pub use trace::{IterationRecord, Outcome, RunTrace, Stat};
pub use watch::{watch_stream, WatchError, WatchVerdict};
