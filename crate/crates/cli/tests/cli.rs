//! End-to-end tests of the `runcast` binary: exit codes, determinism, and
//! the watch/predict agreement contract.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use runcast_core::ingest::{parse_canonical_csv, serialize_stats_stream};

fn runcast() -> Command {
    Command::new(env!("CARGO_BIN_EXE_runcast"))
}

fn run(args: &[&str]) -> Output {
    runcast().args(args).output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace { dir: tempfile::tempdir().expect("tempdir") }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn path_str(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    /// Generate a corpus and train a model on it; returns (corpus, model).
    fn corpus_and_model(&self, arch: &str) -> (String, String) {
        let corpus = self.path_str("corpus.csv");
        let model = self.path_str("model.json");
        assert_success(&run(&[
            "synth", "--n-per-class", "12", "--seed", "5", "--iterations", "3", "--out", &corpus,
        ]));
        assert_success(&run(&[
            "train", "--data", &corpus, "--arch", arch, "--time-limit", "3600", "--epochs", "60",
            "--seed", "7", "--out", &model,
        ]));
        (corpus, model)
    }
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn ingest_round_trips_a_log_directory() {
    let ws = Workspace::new();
    let log = "c [iter 1]\n\
               c [stat] all-threads: 42.5\n\
               c [stat] conflicts/second: 3100\n\
               c [stat] blocked-restarts: 2\n\
               c [stat] restarts: 5\n\
               c [stat] props/decision: 100\n\
               c [stat] props/conflict: 50\n\
               c [stat] literals/conflict: 30\n\
               c [stat] decisions/conflict: 0.5\n\
               c [iter-end 1]\n\
               s SATISFIABLE\n\
               c [outcome] terminated 1234.5\n";
    std::fs::write(ws.path("run-a.log"), log).unwrap();
    let out_csv = ws.path_str("traces.csv");
    let out = run(&["ingest", &ws.path_str("run-a.log"), "--out", &out_csv]);
    assert_success(&out);
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let traces = parse_canonical_csv(&text).unwrap();
    assert_eq!(traces.len(), 1);
    assert_eq!(traces[0].run_id, "run-a");
    assert_eq!(traces[0].records.len(), 1);
}

#[test]
fn ingest_reports_malformed_line_with_location() {
    let ws = Workspace::new();
    std::fs::write(ws.path("bad.log"), "c [iter 1]\nc [stat] bogus: 1\n").unwrap();
    let out = run(&["ingest", &ws.path_str("bad.log"), "--out", &ws.path_str("x.csv")]);
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.log"), "stderr: {stderr}");
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn ingest_with_no_inputs_fails() {
    let out = run(&["ingest"]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no inputs"));
}

#[test]
fn train_on_traces_requires_time_limit() {
    let ws = Workspace::new();
    let corpus = ws.path_str("corpus.csv");
    assert_success(&run(&["synth", "--n-per-class", "3", "--out", &corpus]));
    let out = run(&["train", "--data", &corpus, "--arch", "A", "--out", &ws.path_str("m.json")]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--time-limit"));
}

#[test]
fn trained_set1_arch_b_has_paper_widths() {
    let ws = Workspace::new();
    let (_, model) = ws.corpus_and_model("B");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["input_dim"], 12);
    let layers = json["layers"].as_array().unwrap();
    assert_eq!(layers.len(), 2);
    assert_eq!(layers[0]["W"].as_array().unwrap().len(), 6);
    assert_eq!(layers[0]["W"][0].as_array().unwrap().len(), 12);
    assert_eq!(layers[1]["W"].as_array().unwrap().len(), 1);
}

#[test]
fn same_seed_gives_byte_identical_models() {
    let ws = Workspace::new();
    let corpus = ws.path_str("corpus.csv");
    assert_success(&run(&["synth", "--n-per-class", "10", "--seed", "3", "--out", &corpus]));
    for name in ["m1.json", "m2.json"] {
        assert_success(&run(&[
            "train", "--data", &corpus, "--arch", "C", "--time-limit", "3600", "--epochs", "40",
            "--seed", "7", "--out", &ws.path_str(name),
        ]));
    }
    let a = std::fs::read(ws.path("m1.json")).unwrap();
    let b = std::fs::read(ws.path("m2.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn watch_emits_one_verdict_and_agrees_with_predict() {
    let ws = Workspace::new();
    let (corpus, model) = ws.corpus_and_model("B");
    let traces = parse_canonical_csv(&std::fs::read_to_string(&corpus).unwrap()).unwrap();
    let trace = &traces[0];

    let mut child = runcast()
        .args(["watch", "--model", &model])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(serialize_stats_stream(trace).as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_success(&out);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let verdict_line = stdout.trim();
    assert!(verdict_line.contains("after_iter=2"), "line: {verdict_line}");

    // Batch predict on the same run must produce the identical probability.
    let predict_out = run(&["predict", &corpus, "--model", &model, "--run-id", &trace.run_id]);
    assert_success(&predict_out);
    let predict_line = String::from_utf8(predict_out.stdout).unwrap();
    let p_watch = verdict_line.split("p=").nth(1).unwrap().split(' ').next().unwrap();
    let p_predict = predict_line.trim().split("p=").nth(1).unwrap();
    assert_eq!(p_watch, p_predict);
}

#[test]
fn watch_with_too_few_iterations_exits_3() {
    let ws = Workspace::new();
    let (corpus, model) = ws.corpus_and_model("A");
    let traces = parse_canonical_csv(&std::fs::read_to_string(&corpus).unwrap()).unwrap();
    let mut one_block = traces[0].clone();
    one_block.records.truncate(1);

    let mut child = runcast()
        .args(["watch", "--model", &model])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(serialize_stats_stream(&one_block).as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient-iterations"));
}

#[test]
fn predict_on_short_trace_exits_3() {
    let ws = Workspace::new();
    let (corpus, model) = ws.corpus_and_model("A");
    let traces = parse_canonical_csv(&std::fs::read_to_string(&corpus).unwrap()).unwrap();
    let mut short = traces[0].clone();
    short.records.truncate(1);
    std::fs::write(ws.path("short.log"), serialize_stats_stream(&short)).unwrap();
    let out = run(&["predict", &ws.path_str("short.log"), "--model", &model]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn cnf_stats_density_of_fixture() {
    let out = run(&["cnf-stats", &fixture("tiny.cnf")]);
    assert_success(&out);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("density:                   1.5"), "stdout: {stdout}");

    let json_out = run(&["cnf-stats", &fixture("tiny.cnf"), "--json"]);
    assert_success(&json_out);
    let value: serde_json::Value =
        serde_json::from_slice(&json_out.stdout).expect("cnf-stats --json parses");
    assert_eq!(value["density"], 1.5);
    assert_eq!(value["total_literal_occurrences"], 5);
}

#[test]
fn eval_json_parses_as_report() {
    let ws = Workspace::new();
    let (corpus, model) = ws.corpus_and_model("B");
    let out = run(&[
        "eval", "--model", &model, "--data", &corpus, "--time-limit", "3600", "--json",
    ]);
    assert_success(&out);
    let report: runcast_core::eval::EvalReport =
        serde_json::from_slice(&out.stdout).expect("eval --json parses as a report");
    assert_eq!(report.n_test, 24);
    assert!(report.hit_ratio >= 0.0 && report.hit_ratio <= 1.0);
}

#[test]
fn synth_corpus_has_the_documented_size() {
    let ws = Workspace::new();
    let corpus = ws.path_str("c.csv");
    assert_success(&run(&["synth", "--n-per-class", "75", "--seed", "1", "--out", &corpus]));
    let traces = parse_canonical_csv(&std::fs::read_to_string(&corpus).unwrap()).unwrap();
    assert_eq!(traces.len(), 150);
}

#[test]
fn plot_scatter_and_series_outputs() {
    let ws = Workspace::new();
    let corpus = ws.path_str("corpus.csv");
    let model = ws.path_str("model.json");
    let test_csv = ws.path_str("test.csv");
    assert_success(&run(&[
        "synth", "--n-per-class", "12", "--seed", "5", "--out", &corpus,
    ]));
    assert_success(&run(&[
        "train", "--data", &corpus, "--arch", "B", "--time-limit", "3600", "--epochs", "10",
        "--test-fraction", "0.5", "--test-out", &test_csv, "--out", &model,
    ]));

    let svg_path = ws.path_str("scatter.svg");
    assert_success(&run(&["plot", "scatter", "--data", &test_csv, "--out", &svg_path]));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("<g class=\"panel\"").count(), 36);

    let series_csv = ws.path_str("series.csv");
    let series_svg = ws.path_str("series.svg");
    assert_success(&run(&[
        "plot", "series", "--data", &corpus, "--param", "conflicts/second", "--out", &series_csv,
        "--svg", &series_svg,
    ]));
    let text = std::fs::read_to_string(&series_csv).unwrap();
    assert!(text.starts_with("run_id,x,y"));
    assert!(std::fs::read_to_string(&series_svg).unwrap().contains("<polyline"));

    let bad = run(&["plot", "series", "--data", &corpus, "--param", "nonsense"]);
    assert_eq!(exit_code(&bad), 2);
}

#[test]
fn emit_params_round_trips_through_synth() {
    let ws = Workspace::new();
    let params = ws.path_str("params.json");
    assert_success(&run(&[
        "synth", "--emit-params", "--noise-scale", "0.5", "--out", &params,
    ]));
    let corpus = ws.path_str("corpus.csv");
    assert_success(&run(&[
        "synth", "--n-per-class", "2", "--params", &params, "--out", &corpus,
    ]));
    let traces = parse_canonical_csv(&std::fs::read_to_string(&corpus).unwrap()).unwrap();
    assert_eq!(traces.len(), 4);
}
