//! `runcast` — classify CDCL solver runs early from their runtime statistics.
//!
//! Exit codes: 0 success, 2 input/config error, 3 insufficient data.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use runcast_core::cnf::{instance_features, parse_dimacs};
use runcast_core::dataset::{
    build_balanced, dataset_from_csv, dataset_to_csv, label_run, split, Dataset, LabeledExample,
};
use runcast_core::eval::{evaluate, render_report, ReportFormat};
use runcast_core::features::{extract_features, FeatureSet, FeatureSetSpec};
use runcast_core::ingest::{parse_canonical_csv, parse_stats_stream, serialize_canonical_csv};
use runcast_core::nn::{
    build_model, load_model, model_to_json, predict, train, ArchId, TrainConfig, TrainedModel,
};
use runcast_core::plot::{evolution_series, evolution_svg, scatter_matrix, series_to_csv};
use runcast_core::synth::{generate_corpus, GeneratorParams};
use runcast_core::trace::{RunTrace, Stat};
use runcast_core::watch::{watch_stream, WatchError};

#[derive(Parser)]
#[command(name = "runcast", version, about = "Early termination forecasts for SAT solver runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse solver stats logs into the canonical trace CSV
    Ingest(IngestArgs),
    /// Print instance features of a DIMACS CNF file
    CnfStats(CnfStatsArgs),
    /// Generate a synthetic trace corpus with known class structure
    Synth(SynthArgs),
    /// Build a dataset, train a classifier, and save it as JSON
    Train(TrainArgs),
    /// Classify one recorded run with a trained model
    Predict(PredictArgs),
    /// Watch a live stats stream on stdin and emit one early verdict
    Watch(WatchArgs),
    /// Evaluate a trained model on labeled data
    Eval(EvalArgs),
    /// Emit diagnostic graphics (SVG) and series tables (CSV)
    #[command(subcommand)]
    Plot(PlotCommand),
}

#[derive(Args)]
struct IngestArgs {
    /// Solver log files (processed in sorted order)
    paths: Vec<PathBuf>,
    /// Stats line adapter
    #[arg(long, default_value = "canonical")]
    adapter: String,
    /// Instance id to record on every trace
    #[arg(long, default_value = "")]
    instance_id: String,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CnfStatsArgs {
    file: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Traces to generate per class
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the generator's noise scale
    #[arg(long)]
    noise_scale: Option<f64>,
    /// Override iterations per generated trace
    #[arg(long)]
    iterations: Option<usize>,
    /// Override the generator's timeout
    #[arg(long)]
    time_limit: Option<f64>,
    /// Generator parameters as JSON (embedded defaults when omitted)
    #[arg(long)]
    params: Option<PathBuf>,
    /// Print the effective generator parameters as JSON and exit
    #[arg(long)]
    emit_params: bool,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Canonical trace CSV or a prepared dataset CSV
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    arch: ArchId,
    /// Model output path
    #[arg(long)]
    out: PathBuf,
    /// Feature set (traces input only)
    #[arg(long)]
    set: Option<FeatureSet>,
    /// Leading iterations K (traces input only)
    #[arg(long)]
    iterations: Option<usize>,
    /// Labeling time limit in seconds (required for traces input)
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Dropout rate (architecture C only)
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hold out this fraction as a test split and evaluate on it
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Write the held-out split as a dataset CSV
    #[arg(long)]
    test_out: Option<PathBuf>,
    /// Write the held-out evaluation report as JSON
    #[arg(long)]
    eval_out: Option<PathBuf>,
    /// Skip z-score normalization
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PredictArgs {
    /// Stats log or canonical trace CSV
    file: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value = "canonical")]
    adapter: String,
    /// Select a run when the CSV holds several
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct WatchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Iteration blocks to wait for (default: the model's K)
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value = "canonical")]
    adapter: String,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset CSV or canonical trace CSV
    #[arg(long)]
    data: PathBuf,
    /// Labeling time limit (traces input only)
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Write the report as JSON
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum PlotCommand {
    /// Pairwise scatterplot matrix of a dataset's parameters
    Scatter(ScatterArgs),
    /// Evolution of one parameter over cumulative solver time
    Series(SeriesArgs),
}

#[derive(Args)]
struct ScatterArgs {
    /// Dataset CSV (labels give the colors)
    #[arg(long)]
    data: PathBuf,
    /// Which iteration's parameters to plot (1-based)
    #[arg(long, default_value_t = 1)]
    iteration: usize,
    /// SVG output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SeriesArgs {
    /// Canonical trace CSV
    #[arg(long)]
    data: PathBuf,
    /// Runtime parameter name, e.g. conflicts/second
    #[arg(long)]
    param: String,
    /// CSV output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render the curves as SVG to this path
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Logarithmic time axis
    #[arg(long)]
    log_x: bool,
}

enum CliError {
    /// Bad input or configuration; exit 2.
    Input(String),
    /// Stream or trace ended before enough iterations; exit 3.
    Insufficient(String),
}

impl CliError {
    fn input(err: impl std::fmt::Display) -> Self {
        CliError::Input(err.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Insufficient(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Insufficient(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::CnfStats(args) => cmd_cnf_stats(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Watch(args) => cmd_watch(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Plot(PlotCommand::Scatter(args)) => cmd_plot_scatter(args),
        Command::Plot(PlotCommand::Series(args)) => cmd_plot_series(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("runcast: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            // A closed pipe downstream is not an error.
            let _ = std::io::stdout().write_all(content.as_bytes());
            Ok(())
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn cmd_ingest(args: IngestArgs) -> Result<(), CliError> {
    if args.paths.is_empty() {
        return Err(CliError::Input("no inputs".into()));
    }
    let mut paths = args.paths;
    paths.sort();
    let mut traces = Vec::with_capacity(paths.len());
    for path in &paths {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let run_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let trace = parse_stats_stream(
            std::io::BufReader::new(file),
            &args.adapter,
            run_id,
            args.instance_id.clone(),
        )
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        traces.push(trace);
    }
    write_output(&args.out, &serialize_canonical_csv(&traces))
}

fn cmd_cnf_stats(args: CnfStatsArgs) -> Result<(), CliError> {
    let text = read_file(&args.file)?;
    let inst =
        parse_dimacs(&text).map_err(|e| CliError::Input(format!("{}: {e}", args.file.display())))?;
    let features = instance_features(&inst);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&features).expect("features serialize"));
    } else {
        let mut out = String::new();
        writeln!(out, "num_vars:                  {}", features.num_vars).unwrap();
        writeln!(out, "num_clauses:               {}", features.num_clauses).unwrap();
        writeln!(out, "density:                   {}", features.density).unwrap();
        writeln!(out, "clause_len_min:            {}", features.clause_len_min).unwrap();
        writeln!(out, "clause_len_q1:             {}", features.clause_len_q1).unwrap();
        writeln!(out, "clause_len_median:         {}", features.clause_len_median).unwrap();
        writeln!(out, "clause_len_q3:             {}", features.clause_len_q3).unwrap();
        writeln!(out, "clause_len_max:            {}", features.clause_len_max).unwrap();
        writeln!(out, "total_literal_occurrences: {}", features.total_literal_occurrences).unwrap();
        writeln!(out, "mean_literal_occurrence:   {}", features.mean_literal_occurrence).unwrap();
        let fractions: Vec<String> = features
            .clause_len_fractions
            .iter()
            .map(|(len, frac)| format!("{len}: {frac:.6}"))
            .collect();
        writeln!(out, "clause_len_fractions:      {{{}}}", fractions.join(", ")).unwrap();
        print!("{out}");
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let mut params = match &args.params {
        Some(path) => serde_json::from_str::<GeneratorParams>(&read_file(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => GeneratorParams::default(),
    };
    if let Some(noise) = args.noise_scale {
        params.noise_scale = noise;
    }
    if let Some(iterations) = args.iterations {
        params.iterations = iterations;
    }
    if let Some(limit) = args.time_limit {
        params.time_limit = limit;
    }
    if args.emit_params {
        let json = serde_json::to_string_pretty(&params).expect("params serialize");
        return write_output(&args.out, &format!("{json}\n"));
    }
    let n_per_class = args
        .n_per_class
        .ok_or_else(|| CliError::Input("--n-per-class is required to generate a corpus".into()))?;
    let (traces, _labels) =
        generate_corpus(n_per_class, &params, args.seed).map_err(CliError::input)?;
    write_output(&args.out, &serialize_canonical_csv(&traces))
}

fn looks_like_dataset_csv(text: &str) -> bool {
    text.starts_with("# spec=")
}

fn load_traces(path: &Path) -> Result<Vec<RunTrace>, CliError> {
    let text = read_file(path)?;
    parse_canonical_csv(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Featurize and label a trace corpus without balancing.
fn examples_from_traces(
    traces: &[RunTrace],
    spec: FeatureSetSpec,
    time_limit: f64,
) -> Result<Dataset, CliError> {
    let examples = traces
        .iter()
        .map(|t| {
            Ok(LabeledExample {
                features: extract_features(t, &spec).map_err(CliError::input)?,
                label: label_run(t, time_limit).map_err(CliError::input)?,
                run_id: t.run_id.clone(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Dataset { examples, spec, normalized: false })
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let text = read_file(&args.data)?;
    let ds = if looks_like_dataset_csv(&text) {
        if args.set.is_some() || args.iterations.is_some() {
            return Err(CliError::Input(
                "--set/--iterations apply to trace input; the dataset file already fixes them".into(),
            ));
        }
        dataset_from_csv(&text).map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?
    } else {
        let traces = parse_canonical_csv(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
        let time_limit = args
            .time_limit
            .ok_or_else(|| CliError::Input("--time-limit is required to label trace input".into()))?;
        let spec =
            FeatureSetSpec::new(args.set.unwrap_or(FeatureSet::Set1), args.iterations.unwrap_or(2));
        let labels = traces
            .iter()
            .map(|t| label_run(t, time_limit))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::input)?;
        build_balanced(&traces, &labels, &spec, args.seed).map_err(CliError::input)?
    };

    let (train_ds, test_ds) = match args.test_fraction {
        Some(fraction) => {
            let (tr, te) = split(&ds, fraction, args.seed).map_err(CliError::input)?;
            (tr, Some(te))
        }
        None => (ds, None),
    };

    let dropout = match (args.arch, args.dropout) {
        (ArchId::C, rate) => rate.unwrap_or(0.2),
        (_, Some(rate)) if rate != 0.0 => {
            return Err(CliError::Input(format!(
                "--dropout {rate} only applies to architecture C"
            )))
        }
        _ => 0.0,
    };
    let model = build_model(args.arch, train_ds.spec.feature_len(), dropout, args.seed)
        .map_err(CliError::input)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        seed: args.seed,
        normalize: !args.no_normalize,
    };
    let tm = train(&model, &train_ds, &cfg).map_err(CliError::input)?;
    std::fs::write(&args.out, model_to_json(&tm))
        .map_err(|e| CliError::Input(format!("{}: {e}", args.out.display())))?;

    let final_acc = tm.history.last().map(|h| h.train_acc);
    let report = match &test_ds {
        Some(te) => {
            let mut report = evaluate(&tm, te, args.threshold).map_err(CliError::input)?;
            report.model_id = args.out.display().to_string();
            report.dataset_id = args.data.display().to_string();
            Some(report)
        }
        None => None,
    };
    if let (Some(path), Some(te)) = (&args.test_out, &test_ds) {
        std::fs::write(path, dataset_to_csv(te).map_err(CliError::input)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    if let (Some(path), Some(report)) = (&args.eval_out, &report) {
        std::fs::write(path, render_report(report, ReportFormat::Json))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }

    if args.json {
        let summary = serde_json::json!({
            "model": args.out.display().to_string(),
            "arch": args.arch.to_string(),
            "examples": train_ds.len(),
            "epochs": args.epochs,
            "training_accuracy": final_acc,
            "test_report": report,
        });
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    } else {
        match final_acc {
            Some(acc) => println!(
                "trained {} on {} examples; final training accuracy {acc:.4}",
                args.arch,
                train_ds.len()
            ),
            None => println!("saved untrained model (0 epochs)"),
        }
        if let Some(report) = &report {
            print!("{}", render_report(report, ReportFormat::Text));
        }
    }
    Ok(())
}

fn load_trained_model(path: &Path) -> Result<TrainedModel, CliError> {
    load_model(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let tm = load_trained_model(&args.model)?;
    let text = read_file(&args.file)?;
    let trace = if text.starts_with("run_id,") {
        let traces = parse_canonical_csv(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", args.file.display())))?;
        match &args.run_id {
            Some(id) => traces
                .into_iter()
                .find(|t| &t.run_id == id)
                .ok_or_else(|| CliError::Input(format!("run `{id}` not found")))?,
            None if traces.len() == 1 => traces.into_iter().next().unwrap(),
            None => {
                return Err(CliError::Input(format!(
                    "file holds {} runs; pick one with --run-id",
                    traces.len()
                )))
            }
        }
    } else {
        let run_id = args.run_id.clone().unwrap_or_else(|| {
            args.file
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
        });
        parse_stats_stream(text.as_bytes(), &args.adapter, run_id, "")
            .map_err(|e| CliError::Input(format!("{}: {e}", args.file.display())))?
    };
    let (class, probability) = predict(&tm, &trace, args.threshold).map_err(|e| match e {
        runcast_core::nn::NnError::Feature(
            runcast_core::features::FeatureError::InsufficientIterations { have, need },
        ) => CliError::Insufficient(format!(
            "insufficient-iterations: trace has {have}, need {need}"
        )),
        other => CliError::input(other),
    })?;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "run_id": trace.run_id,
                "verdict": class,
                "probability": probability,
            })
        );
    } else {
        println!("verdict={class} p={probability}");
    }
    Ok(())
}

fn cmd_watch(args: WatchArgs) -> Result<(), CliError> {
    let tm = load_trained_model(&args.model)?;
    let stdin = std::io::stdin();
    let verdict = watch_stream(
        stdin.lock(),
        &tm,
        args.iterations,
        args.threshold,
        &args.adapter,
        "stdin",
    )
    .map_err(|e| match e {
        WatchError::InsufficientIterations { .. } => CliError::Insufficient(e.to_string()),
        other => CliError::input(other),
    })?;
    println!(
        "verdict={} p={} after_iter={}",
        verdict.class, verdict.probability, verdict.after_iteration
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let tm = load_trained_model(&args.model)?;
    let text = read_file(&args.data)?;
    let ds = if looks_like_dataset_csv(&text) {
        dataset_from_csv(&text).map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?
    } else {
        let traces = parse_canonical_csv(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
        let time_limit = args
            .time_limit
            .ok_or_else(|| CliError::Input("--time-limit is required to label trace input".into()))?;
        examples_from_traces(&traces, tm.spec, time_limit)?
    };
    let mut report = evaluate(&tm, &ds, args.threshold).map_err(CliError::input)?;
    report.model_id = args.model.display().to_string();
    report.dataset_id = args.data.display().to_string();
    if let Some(path) = &args.out {
        std::fs::write(path, render_report(&report, ReportFormat::Json))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    let format = if args.json { ReportFormat::Json } else { ReportFormat::Text };
    println!("{}", render_report(&report, format));
    Ok(())
}

fn cmd_plot_scatter(args: ScatterArgs) -> Result<(), CliError> {
    let text = read_file(&args.data)?;
    if !looks_like_dataset_csv(&text) {
        return Err(CliError::Input(
            "scatter needs a dataset CSV (labels give the colors); build one with `train --test-out`"
                .into(),
        ));
    }
    let ds = dataset_from_csv(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
    let svg = scatter_matrix(&ds, args.iteration).map_err(CliError::input)?;
    write_output(&args.out, &svg)
}

fn cmd_plot_series(args: SeriesArgs) -> Result<(), CliError> {
    let stat: Stat = args.param.parse().map_err(CliError::input)?;
    let traces = load_traces(&args.data)?;
    let points = evolution_series(&traces, stat);
    write_output(&args.out, &series_to_csv(&points))?;
    if let Some(path) = &args.svg {
        std::fs::write(path, evolution_svg(&traces, stat, args.log_x))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
