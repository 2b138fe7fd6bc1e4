//! Browser demo: explore the synthetic corpus, the diagnostic plots, and
//! in-browser training from a single static page.
//!
//! The `*_svg`/`*_json` functions are exported to JS; the `app` module holds
//! the plain-Rust implementations so native tests can drive them directly.

use wasm_bindgen::prelude::*;

pub mod app {
    use std::fmt::Write as _;

    use runcast_core::dataset::{split, Dataset, LabeledExample};
    use runcast_core::eval::evaluate;
    use runcast_core::features::{extract_features, FeatureSet, FeatureSetSpec};
    use runcast_core::nn::{build_model, train, ArchId, TrainConfig};
    use runcast_core::plot::{evolution_svg, scatter_matrix};
    use runcast_core::synth::{bayes_accuracy, generate_corpus, GeneratorParams};
    use runcast_core::trace::Stat;

    fn params_with_noise(noise_scale: f64) -> GeneratorParams {
        let mut params = GeneratorParams::default();
        params.noise_scale = noise_scale;
        params
    }

    fn parse_set(set: &str) -> Result<FeatureSet, String> {
        set.parse::<FeatureSet>()
    }

    fn corpus_dataset(
        seed: u64,
        noise_scale: f64,
        n_per_class: usize,
        set: FeatureSet,
    ) -> Result<Dataset, String> {
        let params = params_with_noise(noise_scale);
        let (traces, labels) =
            generate_corpus(n_per_class, &params, seed).map_err(|e| e.to_string())?;
        let spec = FeatureSetSpec::new(set, 2);
        let examples = traces
            .iter()
            .zip(&labels)
            .map(|(trace, &label)| {
                Ok(LabeledExample {
                    features: extract_features(trace, &spec).map_err(|e| e.to_string())?,
                    label,
                    run_id: trace.run_id.clone(),
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(Dataset { examples, spec, normalized: false })
    }

    /// Scatterplot matrix of a fresh synthetic corpus.
    pub fn scatter_svg(
        seed: u64,
        noise_scale: f64,
        n_per_class: usize,
        set: &str,
        iteration: usize,
    ) -> Result<String, String> {
        let ds = corpus_dataset(seed, noise_scale, n_per_class.clamp(1, 500), parse_set(set)?)?;
        scatter_matrix(&ds, iteration).map_err(|e| e.to_string())
    }

    /// Evolution curves of one runtime parameter for a fresh corpus.
    pub fn curves_svg(
        seed: u64,
        noise_scale: f64,
        n_per_class: usize,
        param: &str,
        iterations: usize,
        log_x: bool,
    ) -> Result<String, String> {
        let stat: Stat =
            param.parse().map_err(|e: runcast_core::trace::UnknownStat| e.to_string())?;
        let mut params = params_with_noise(noise_scale);
        params.iterations = iterations.clamp(2, 12);
        let (traces, _) =
            generate_corpus(n_per_class.clamp(1, 200), &params, seed).map_err(|e| e.to_string())?;
        Ok(evolution_svg(&traces, stat, log_x))
    }

    fn history_svg(history: &[runcast_core::nn::EpochStats]) -> String {
        let width = 420.0;
        let height = 130.0;
        let pad = 8.0;
        let mut svg = String::new();
        writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
        )
        .unwrap();
        if history.len() > 1 {
            let max_loss = history.iter().map(|h| h.loss).fold(f64::MIN, f64::max).max(1e-9);
            let n = history.len() as f64;
            let mut loss_pts = String::new();
            let mut acc_pts = String::new();
            for (i, h) in history.iter().enumerate() {
                let x = pad + i as f64 / (n - 1.0) * (width - 2.0 * pad);
                let y_loss = height - pad - (h.loss / max_loss) * (height - 2.0 * pad);
                let y_acc = height - pad - h.train_acc * (height - 2.0 * pad);
                let _ = write!(loss_pts, "{x:.1},{y_loss:.1} ");
                let _ = write!(acc_pts, "{x:.1},{y_acc:.1} ");
            }
            writeln!(
                svg,
                r##"<polyline points="{}" fill="none" stroke="#b2182b" stroke-width="1.5"/>"##,
                loss_pts.trim()
            )
            .unwrap();
            writeln!(
                svg,
                r##"<polyline points="{}" fill="none" stroke="#2166ac" stroke-width="1.5"/>"##,
                acc_pts.trim()
            )
            .unwrap();
            writeln!(
                svg,
                r##"<text x="{pad}" y="12" fill="#b2182b">loss</text><text x="44" y="12" fill="#2166ac">training accuracy</text>"##
            )
            .unwrap();
        }
        writeln!(svg, "</svg>").unwrap();
        svg
    }

    /// Run the full protocol in the browser: corpus, stratified split,
    /// train, evaluate on the held-out third, and report next to the
    /// Monte-Carlo oracle for the same noise level.
    #[allow(clippy::too_many_arguments)]
    pub fn train_eval_json(
        seed: u64,
        noise_scale: f64,
        n_per_class: usize,
        set: &str,
        arch: &str,
        epochs: usize,
        learning_rate: f64,
        dropout: f64,
    ) -> Result<String, String> {
        let arch: ArchId = arch.parse()?;
        let ds = corpus_dataset(seed, noise_scale, n_per_class.clamp(2, 500), parse_set(set)?)?;
        let (train_ds, test_ds) = split(&ds, 1.0 / 3.0, seed).map_err(|e| e.to_string())?;
        let dropout = if arch == ArchId::C { dropout } else { 0.0 };
        let model = build_model(arch, train_ds.spec.feature_len(), dropout, seed)
            .map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            epochs: epochs.clamp(1, 5000),
            batch_size: 8.min(train_ds.len()),
            learning_rate,
            seed,
            normalize: true,
        };
        let tm = train(&model, &train_ds, &cfg).map_err(|e| e.to_string())?;
        let report = evaluate(&tm, &test_ds, 0.5).map_err(|e| e.to_string())?;
        let oracle = bayes_accuracy(&params_with_noise(noise_scale), 20_000, 2026)
            .map_err(|e| e.to_string())?;
        let summary = serde_json::json!({
            "n_train": train_ds.len(),
            "n_test": test_ds.len(),
            "hit_ratio": report.hit_ratio,
            "training_accuracy": report.training_accuracy,
            "confusion": report.confusion,
            "oracle_accuracy": oracle.accuracy,
            "oracle_std_error": oracle.std_error,
            "history_svg": history_svg(&tm.history),
        });
        serde_json::to_string(&summary).map_err(|e| e.to_string())
    }

    /// Wire names of the eight runtime parameters, as a JSON array.
    pub fn stat_names_json() -> String {
        let names: Vec<&str> = Stat::ALL.iter().map(|s| s.wire_name()).collect();
        serde_json::to_string(&names).expect("names serialize")
    }
}

#[wasm_bindgen]
pub fn scatter_svg(
    seed: u64,
    noise_scale: f64,
    n_per_class: usize,
    set: &str,
    iteration: usize,
) -> Result<String, JsValue> {
    app::scatter_svg(seed, noise_scale, n_per_class, set, iteration)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn curves_svg(
    seed: u64,
    noise_scale: f64,
    n_per_class: usize,
    param: &str,
    iterations: usize,
    log_x: bool,
) -> Result<String, JsValue> {
    app::curves_svg(seed, noise_scale, n_per_class, param, iterations, log_x)
        .map_err(|e| JsValue::from_str(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn train_eval_json(
    seed: u64,
    noise_scale: f64,
    n_per_class: usize,
    set: &str,
    arch: &str,
    epochs: usize,
    learning_rate: f64,
    dropout: f64,
) -> Result<String, JsValue> {
    app::train_eval_json(seed, noise_scale, n_per_class, set, arch, epochs, learning_rate, dropout)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn stat_names() -> String {
    app::stat_names_json()
}

#[cfg(test)]
mod tests {
    use super::app;

    #[test]
    fn scatter_svg_renders_both_sets() {
        let svg = app::scatter_svg(1, 1.0, 5, "set1", 1).unwrap();
        assert_eq!(svg.matches("<g class=\"panel\"").count(), 36);
        let svg2 = app::scatter_svg(1, 1.0, 5, "set2", 2).unwrap();
        assert_eq!(svg2.matches("<g class=\"panel\"").count(), 49);
        assert!(app::scatter_svg(1, 1.0, 5, "set3", 1).is_err());
    }

    #[test]
    fn curves_svg_renders() {
        let svg = app::curves_svg(2, 1.0, 4, "conflicts/second", 3, false).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 8);
        assert!(app::curves_svg(2, 1.0, 4, "bogus", 3, false).is_err());
    }

    #[test]
    fn train_eval_reports_metrics() {
        let json = app::train_eval_json(3, 1.0, 30, "set1", "B", 60, 0.05, 0.0).unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["n_train"], 40);
        assert_eq!(value["n_test"], 20);
        let hit = value["hit_ratio"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&hit));
        assert!(value["history_svg"].as_str().unwrap().contains("polyline"));
    }

    #[test]
    fn stat_names_lists_all_eight() {
        let names: Vec<String> = serde_json::from_str(&app::stat_names_json()).unwrap();
        assert_eq!(names.len(), 8);
        assert!(names.contains(&"conflicts/second".to_string()));
    }
}
