//! Diagnostic graphics: per-run parameter evolution curves and pairwise
//! scatterplot matrices, emitted as standalone SVG (no external renderer)
//! and CSV.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::trace::{Outcome, RunTrace, Stat};

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("unknown runtime parameter `{0}`")]
    UnknownParameter(String),
    #[error("iteration {iteration} out of range 1..={max}")]
    IterationOutOfRange { iteration: usize, max: usize },
}

/// One point of a parameter evolution curve: x is the cumulative
/// all-threads solver time at the end of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub run_id: String,
    pub x: f64,
    pub y: f64,
}

/// Evolution of one runtime parameter across all traces; one point per
/// iteration per run, x strictly increasing within a run.
pub fn evolution_series(traces: &[RunTrace], stat: Stat) -> Vec<SeriesPoint> {
    let mut points = Vec::new();
    for trace in traces {
        let mut elapsed = 0.0;
        for record in &trace.records {
            elapsed += record.all_threads_time;
            points.push(SeriesPoint {
                run_id: trace.run_id.clone(),
                x: elapsed,
                y: record.stat(stat),
            });
        }
    }
    points
}

/// CSV rendering of an evolution series (`run_id,x,y`).
pub fn series_to_csv(points: &[SeriesPoint]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["run_id", "x", "y"]).expect("csv into memory");
    for point in points {
        writer
            .write_record([point.run_id.as_str(), &point.x.to_string(), &point.y.to_string()])
            .expect("csv into memory");
    }
    String::from_utf8(writer.into_inner().expect("csv into memory")).expect("csv is utf-8")
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const CLASS1_COLOR: &str = "#2166ac";
const CLASS0_COLOR: &str = "#b2182b";
const NEUTRAL_COLOR: &str = "#888888";

fn outcome_color(outcome: &Outcome) -> &'static str {
    match outcome {
        Outcome::Terminated { .. } => CLASS1_COLOR,
        Outcome::TimedOut { .. } => CLASS0_COLOR,
        Outcome::StillRunning => NEUTRAL_COLOR,
    }
}

struct Range {
    min: f64,
    max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() {
            min = 0.0;
            max = 1.0;
        }
        Range { min, max }
    }

    /// Map a value into [lo, hi]; a degenerate range maps to the middle.
    fn scale(&self, v: f64, lo: f64, hi: f64) -> f64 {
        if self.max > self.min {
            lo + (v - self.min) / (self.max - self.min) * (hi - lo)
        } else {
            (lo + hi) / 2.0
        }
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 10000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else if v.abs() >= 10.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Pairwise scatterplot matrix of the dataset's parameters at the chosen
/// iteration (1-based). One panel per parameter pair, every example one
/// point per panel, colored by label.
pub fn scatter_matrix(ds: &Dataset, iteration: usize) -> Result<String, PlotError> {
    let k = ds.spec.iterations;
    if iteration < 1 || iteration > k {
        return Err(PlotError::IterationOutOfRange { iteration, max: k });
    }
    let params = ds.spec.set_id.params();
    let p = params.len();
    let offset = (iteration - 1) * p;

    let cell = 140.0;
    let gap = 8.0;
    let pad = 6.0;
    let margin_left = 96.0;
    let margin_top = 24.0;
    let margin_right = 24.0;
    let margin_bottom = 96.0;
    let grid = p as f64 * cell + (p as f64 - 1.0) * gap;
    let width = margin_left + grid + margin_right;
    let height = margin_top + grid + margin_bottom + 28.0;

    let ranges: Vec<Range> = (0..p)
        .map(|j| Range::of(ds.examples.iter().map(|e| e.features[offset + j])))
        .collect();

    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();

    for row in 0..p {
        for col in 0..p {
            let x0 = margin_left + col as f64 * (cell + gap);
            let y0 = margin_top + row as f64 * (cell + gap);
            writeln!(
                svg,
                r#"<g class="panel" data-x="{}" data-y="{}" transform="translate({x0},{y0})">"#,
                xml_escape(params[col].wire_name()),
                xml_escape(params[row].wire_name()),
            )
            .unwrap();
            writeln!(
                svg,
                r##"<rect width="{cell}" height="{cell}" fill="none" stroke="#444444" stroke-width="0.8"/>"##
            )
            .unwrap();
            for example in &ds.examples {
                let vx = example.features[offset + col];
                let vy = example.features[offset + row];
                let cx = ranges[col].scale(vx, pad, cell - pad);
                // SVG y grows downward.
                let cy = cell - ranges[row].scale(vy, pad, cell - pad);
                let color = if example.label == 1 { CLASS1_COLOR } else { CLASS0_COLOR };
                writeln!(
                    svg,
                    r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.2" fill="{color}" fill-opacity="0.7"/>"#
                )
                .unwrap();
            }
            writeln!(svg, "</g>").unwrap();
        }
    }

    // Parameter names along the bottom and left edges.
    for (j, stat) in params.iter().enumerate() {
        let center = margin_left + j as f64 * (cell + gap) + cell / 2.0;
        let ty = margin_top + grid + 14.0;
        writeln!(
            svg,
            r#"<text x="{center:.1}" y="{ty:.1}" text-anchor="end" transform="rotate(-35 {center:.1} {ty:.1})">{}</text>"#,
            xml_escape(stat.wire_name())
        )
        .unwrap();
        let middle = margin_top + j as f64 * (cell + gap) + cell / 2.0;
        let tx = margin_left - 8.0;
        writeln!(
            svg,
            r#"<text x="{tx:.1}" y="{middle:.1}" text-anchor="middle" transform="rotate(-90 {tx:.1} {middle:.1})">{}</text>"#,
            xml_escape(stat.wire_name())
        )
        .unwrap();
    }

    // Legend.
    let ly = height - 16.0;
    writeln!(svg, r#"<circle cx="{margin_left}" cy="{ly}" r="3.5" fill="{CLASS1_COLOR}"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}">terminating (1)</text>"#,
        margin_left + 8.0,
        ly + 4.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<circle cx="{:.1}" cy="{ly}" r="3.5" fill="{CLASS0_COLOR}"/>"#,
        margin_left + 130.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}">not terminating (0)</text>"#,
        margin_left + 138.0,
        ly + 4.0
    )
    .unwrap();
    writeln!(svg, "</svg>").unwrap();
    Ok(svg)
}

/// Evolution curves of one parameter for a set of runs, colored by outcome.
/// Iteration ends carry circular markers. `log_x` plots against log10 of
/// cumulative solver time.
pub fn evolution_svg(traces: &[RunTrace], stat: Stat, log_x: bool) -> String {
    let points = evolution_series(traces, stat);
    let transform_x = |x: f64| if log_x { x.log10() } else { x };

    let width = 760.0;
    let height = 440.0;
    let margin_left = 70.0;
    let margin_top = 20.0;
    let margin_right = 20.0;
    let margin_bottom = 58.0;
    let plot_w = width - margin_left - margin_right;
    let plot_h = height - margin_top - margin_bottom;

    let xr = Range::of(points.iter().map(|pt| transform_x(pt.x)));
    let yr = Range::of(points.iter().map(|pt| pt.y));

    let sx = |x: f64| margin_left + xr.scale(transform_x(x), 0.0, plot_w);
    let sy = |y: f64| margin_top + plot_h - yr.scale(y, 0.0, plot_h);

    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r##"<rect x="{margin_left}" y="{margin_top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444444" stroke-width="0.8"/>"##
    )
    .unwrap();

    // A few ticks on each axis.
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let raw_x = xr.min + f * (xr.max - xr.min);
        let label_x = if log_x { format_tick(10f64.powf(raw_x)) } else { format_tick(raw_x) };
        let px = margin_left + f * plot_w;
        writeln!(
            svg,
            r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#444444" stroke-width="0.8"/>"##,
            margin_top + plot_h,
            margin_top + plot_h + 5.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            margin_top + plot_h + 18.0,
            xml_escape(&label_x)
        )
        .unwrap();

        let raw_y = yr.min + f * (yr.max - yr.min);
        let py = margin_top + plot_h - f * plot_h;
        writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{margin_left}" y2="{py:.1}" stroke="#444444" stroke-width="0.8"/>"##,
            margin_left - 5.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            margin_left - 8.0,
            py + 4.0,
            xml_escape(&format_tick(raw_y))
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">cumulative all-threads time [s]{}</text>"#,
        margin_left + plot_w / 2.0,
        height - 18.0,
        if log_x { " (log)" } else { "" }
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        margin_top + plot_h / 2.0,
        margin_top + plot_h / 2.0,
        xml_escape(stat.wire_name())
    )
    .unwrap();

    for trace in traces {
        if trace.records.is_empty() {
            continue;
        }
        let color = outcome_color(&trace.outcome);
        let mut elapsed = 0.0;
        let mut coords = Vec::with_capacity(trace.records.len());
        for record in &trace.records {
            elapsed += record.all_threads_time;
            coords.push((sx(elapsed), sy(record.stat(stat))));
        }
        let path: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.4" stroke-opacity="0.85"/>"#,
            path.join(" ")
        )
        .unwrap();
        for (x, y) in coords {
            writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.4" fill="{color}"/>"#).unwrap();
        }
    }
    writeln!(svg, "</svg>").unwrap();
    svg
}
