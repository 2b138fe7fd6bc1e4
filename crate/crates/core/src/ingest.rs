//! Parsing of solver verbose output and the canonical CSV trace format.
//!
//! The normative input is the canonical line grammar below; solver-version
//! specific formats are translated to it through a [`LineAdapter`]. One
//! iteration block looks like:
//!
//! ```text
//! c [iter 1]
//! c [stat] all-threads: 42.5
//! c [stat] conflicts/second: 3100
//! ...six more stat lines...
//! c [iter-end 1]
//! ```
//!
//! followed optionally by `s SATISFIABLE` / `s UNSATISFIABLE` and an outcome
//! marker `c [outcome] terminated <seconds>` or `c [outcome] timeout
//! <seconds>`. Lines that do not start with `c [` or `s ` are ignored.
//!
//! Parsing is single-pass and incremental: [`StreamParser`] accepts one line
//! at a time, so a live solver run can be classified while it is still
//! writing (see [`crate::watch`]). A stream truncated mid-block yields a
//! trace with only the fully closed blocks.

use std::io::BufRead;

use thiserror::Error;

use crate::trace::{IterationRecord, Outcome, RunTrace, Stat};

/// Errors from stream or CSV ingestion.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed stats line")]
    MalformedLine { line: u64 },
    #[error("iteration {iteration} closed without field `{field}`")]
    MissingField { iteration: u32, field: String },
    #[error("expected iteration {expected}, got {got}")]
    NonConsecutiveIteration { expected: u32, got: u32 },
    #[error("iteration {iteration}: invalid value for `{field}`")]
    InvalidValue { iteration: u32, field: String },
    #[error("invalid outcome: {detail}")]
    InvalidOutcome { detail: String },
    #[error("csv header mismatch: {detail}")]
    HeaderMismatch { detail: String },
    #[error("line {line}: wrong number of fields")]
    RowArity { line: u64 },
    #[error("unknown adapter `{id}`")]
    UnknownAdapter { id: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One solver-output line reduced to canonical meaning.
#[derive(Debug, Clone, PartialEq)]
pub enum LineEvent {
    /// Not a stats line; skip.
    Ignored,
    /// `c [iter <k>]`
    IterStart(u32),
    /// `c [stat] <name>: <value>`
    StatValue(Stat, f64),
    /// `c [iter-end <k>]`
    IterEnd(u32),
    /// `s SATISFIABLE` / `s UNSATISFIABLE`
    StatusLine,
    /// `c [outcome] terminated <s>` / `c [outcome] timeout <s>`
    OutcomeMarker(Outcome),
}

/// Marker returned by adapters for a line that matches the adapter's prefix
/// but cannot be parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Malformed;

/// Translates one native solver-output line into a canonical [`LineEvent`].
///
/// Implement this to support a concrete solver version's verbose format;
/// the `canonical` adapter (the grammar above) is always registered.
pub trait LineAdapter: Send + Sync {
    fn id(&self) -> &'static str;
    fn parse_line(&self, line: &str) -> Result<LineEvent, Malformed>;
}

/// Adapter for the canonical grammar itself.
#[derive(Debug, Default, Clone, Copy)]
pub struct CanonicalAdapter;

impl LineAdapter for CanonicalAdapter {
    fn id(&self) -> &'static str {
        "canonical"
    }

    fn parse_line(&self, line: &str) -> Result<LineEvent, Malformed> {
        let line = line.trim_end();
        if let Some(rest) = line.strip_prefix("s ") {
            return match rest.trim() {
                "SATISFIABLE" | "UNSATISFIABLE" => Ok(LineEvent::StatusLine),
                _ => Err(Malformed),
            };
        }
        if !line.starts_with("c [") {
            return Ok(LineEvent::Ignored);
        }
        // `iter-end` before `iter`: the former is a prefix of the latter.
        if let Some(rest) = line.strip_prefix("c [iter-end ") {
            let k = rest.strip_suffix(']').ok_or(Malformed)?;
            return k.trim().parse().map(LineEvent::IterEnd).map_err(|_| Malformed);
        }
        if let Some(rest) = line.strip_prefix("c [iter ") {
            let k = rest.strip_suffix(']').ok_or(Malformed)?;
            return k.trim().parse().map(LineEvent::IterStart).map_err(|_| Malformed);
        }
        if let Some(rest) = line.strip_prefix("c [stat] ") {
            let (name, value) = rest.rsplit_once(':').ok_or(Malformed)?;
            let stat: Stat = name.trim().parse().map_err(|_| Malformed)?;
            let value: f64 = value.trim().parse().map_err(|_| Malformed)?;
            return Ok(LineEvent::StatValue(stat, value));
        }
        if let Some(rest) = line.strip_prefix("c [outcome] ") {
            let (kind, secs) = rest.split_once(' ').ok_or(Malformed)?;
            let secs: f64 = secs.trim().parse().map_err(|_| Malformed)?;
            return match kind {
                "terminated" => Ok(LineEvent::OutcomeMarker(Outcome::Terminated {
                    total_runtime: secs,
                })),
                "timeout" => Ok(LineEvent::OutcomeMarker(Outcome::TimedOut { limit: secs })),
                _ => Err(Malformed),
            };
        }
        Err(Malformed)
    }
}

/// Look up a registered adapter by id. `canonical` is always available.
pub fn lookup_adapter(id: &str) -> Result<Box<dyn LineAdapter>, IngestError> {
    match id {
        "canonical" => Ok(Box::new(CanonicalAdapter)),
        _ => Err(IngestError::UnknownAdapter { id: id.to_string() }),
    }
}

/// Something the parser learned from one pushed line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamEvent {
    /// An iteration block closed; its record is now available.
    IterationClosed(u32),
    /// An end-of-run marker set the trace outcome.
    OutcomeRecorded,
}

struct OpenBlock {
    index: u32,
    values: [Option<f64>; 8],
    opened_at_line: u64,
}

/// Incremental single-pass parser for one stats stream.
///
/// Memory stays proportional to one open block plus the accumulated records.
pub struct StreamParser {
    adapter: Box<dyn LineAdapter>,
    run_id: String,
    instance_id: String,
    line_no: u64,
    open: Option<OpenBlock>,
    records: Vec<IterationRecord>,
    outcome: Outcome,
    saw_terminal_marker: bool,
}

impl StreamParser {
    pub fn new(
        adapter: Box<dyn LineAdapter>,
        run_id: impl Into<String>,
        instance_id: impl Into<String>,
    ) -> Self {
        StreamParser {
            adapter,
            run_id: run_id.into(),
            instance_id: instance_id.into(),
            line_no: 0,
            open: None,
            records: Vec::new(),
            outcome: Outcome::StillRunning,
            saw_terminal_marker: false,
        }
    }

    /// Records of all fully closed iteration blocks so far.
    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn completed_iterations(&self) -> usize {
        self.records.len()
    }

    /// Feed one line. Returns what, if anything, the line completed.
    pub fn push_line(&mut self, line: &str) -> Result<Option<StreamEvent>, IngestError> {
        self.line_no += 1;
        let line_no = self.line_no;
        let event = self
            .adapter
            .parse_line(line)
            .map_err(|Malformed| IngestError::MalformedLine { line: line_no })?;
        match event {
            LineEvent::Ignored => Ok(None),
            LineEvent::IterStart(k) => {
                if self.open.is_some() || self.saw_terminal_marker {
                    return Err(IngestError::MalformedLine { line: line_no });
                }
                let expected = self.records.len() as u32 + 1;
                if k != expected {
                    return Err(IngestError::NonConsecutiveIteration { expected, got: k });
                }
                self.open = Some(OpenBlock {
                    index: k,
                    values: [None; 8],
                    opened_at_line: line_no,
                });
                Ok(None)
            }
            LineEvent::StatValue(stat, value) => {
                let block = self
                    .open
                    .as_mut()
                    .ok_or(IngestError::MalformedLine { line: line_no })?;
                let slot = &mut block.values[stat.index()];
                if slot.is_some() {
                    // Duplicate stat within a block: rejected, not overwritten.
                    return Err(IngestError::MalformedLine { line: line_no });
                }
                *slot = Some(value);
                Ok(None)
            }
            LineEvent::IterEnd(k) => {
                let block = self
                    .open
                    .take()
                    .ok_or(IngestError::MalformedLine { line: line_no })?;
                if block.index != k {
                    return Err(IngestError::MalformedLine { line: line_no });
                }
                let mut values = [0.0; 8];
                for stat in Stat::ALL {
                    match block.values[stat.index()] {
                        Some(v) => values[stat.index()] = v,
                        None => {
                            return Err(IngestError::MissingField {
                                iteration: k,
                                field: stat.wire_name().to_string(),
                            })
                        }
                    }
                }
                let record = IterationRecord::from_stats(k, values).map_err(|_| {
                    // An out-of-range value was accepted at its stat line's
                    // grammar level; report the block instead.
                    IngestError::MalformedLine {
                        line: block.opened_at_line,
                    }
                })?;
                self.records.push(record);
                Ok(Some(StreamEvent::IterationClosed(k)))
            }
            LineEvent::StatusLine => {
                if self.open.is_some() {
                    return Err(IngestError::MalformedLine { line: line_no });
                }
                self.saw_terminal_marker = true;
                Ok(None)
            }
            LineEvent::OutcomeMarker(outcome) => {
                if self.open.is_some() || self.outcome.is_final() {
                    return Err(IngestError::MalformedLine { line: line_no });
                }
                self.saw_terminal_marker = true;
                self.outcome = outcome;
                Ok(Some(StreamEvent::OutcomeRecorded))
            }
        }
    }

    /// Finish parsing; a partial open block is dropped so that truncated
    /// streams still yield every fully closed iteration.
    pub fn into_trace(self) -> Result<RunTrace, IngestError> {
        RunTrace::new(self.run_id, self.instance_id, self.records, self.outcome)
    }

    /// Trace of everything closed so far, without consuming the parser.
    pub fn snapshot_trace(&self) -> Result<RunTrace, IngestError> {
        RunTrace::new(
            self.run_id.clone(),
            self.instance_id.clone(),
            self.records.clone(),
            self.outcome.clone(),
        )
    }
}

/// Parse a whole stats stream with the given registered adapter.
pub fn parse_stats_stream<R: BufRead>(
    reader: R,
    adapter_id: &str,
    run_id: impl Into<String>,
    instance_id: impl Into<String>,
) -> Result<RunTrace, IngestError> {
    let adapter = lookup_adapter(adapter_id)?;
    let mut parser = StreamParser::new(adapter, run_id, instance_id);
    for line in reader.lines() {
        parser.push_line(&line?)?;
    }
    parser.into_trace()
}

/// Render a trace back into canonical stream format (one block per record
/// plus outcome markers). Inverse of [`parse_stats_stream`].
pub fn serialize_stats_stream(trace: &RunTrace) -> String {
    let mut out = String::new();
    for rec in &trace.records {
        out.push_str(&format!("c [iter {}]\n", rec.iteration_index));
        for stat in Stat::ALL {
            out.push_str(&format!("c [stat] {}: {}\n", stat.wire_name(), rec.stat(stat)));
        }
        out.push_str(&format!("c [iter-end {}]\n", rec.iteration_index));
    }
    match &trace.outcome {
        Outcome::Terminated { total_runtime } => {
            out.push_str("s SATISFIABLE\n");
            out.push_str(&format!("c [outcome] terminated {total_runtime}\n"));
        }
        Outcome::TimedOut { limit } => {
            out.push_str(&format!("c [outcome] timeout {limit}\n"));
        }
        Outcome::StillRunning => {}
    }
    out
}

const CSV_HEADER: [&str; 13] = [
    "run_id",
    "instance_id",
    "iteration_index",
    "all_threads",
    "conflicts_per_sec",
    "blocked_restarts",
    "restarts",
    "props_per_decision",
    "props_per_conflict",
    "literals_per_conflict",
    "decisions_per_conflict",
    "outcome",
    "outcome_seconds",
];

fn outcome_columns(outcome: &Outcome) -> (&'static str, String) {
    match outcome {
        Outcome::Terminated { total_runtime } => ("terminated", total_runtime.to_string()),
        Outcome::TimedOut { limit } => ("timeout", limit.to_string()),
        Outcome::StillRunning => ("still_running", String::new()),
    }
}

/// Serialize traces to the canonical CSV format, one row per iteration.
pub fn serialize_canonical_csv(traces: &[RunTrace]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("csv into memory");
    for trace in traces {
        let (kind, seconds) = outcome_columns(&trace.outcome);
        for rec in &trace.records {
            let mut row: Vec<String> = Vec::with_capacity(13);
            row.push(trace.run_id.clone());
            row.push(trace.instance_id.clone());
            row.push(rec.iteration_index.to_string());
            for stat in Stat::ALL {
                row.push(rec.stat(stat).to_string());
            }
            row.push(kind.to_string());
            row.push(seconds.clone());
            writer.write_record(&row).expect("csv into memory");
        }
    }
    String::from_utf8(writer.into_inner().expect("csv into memory")).expect("csv is utf-8")
}

/// Parse the canonical CSV format. Rows of one run must be contiguous with
/// iteration indices 1, 2, 3, ...; a row with index 1 starts a new trace.
pub fn parse_canonical_csv(text: &str) -> Result<Vec<RunTrace>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    {
        let header = reader
            .headers()
            .map_err(|e| IngestError::HeaderMismatch { detail: e.to_string() })?;
        let got: Vec<&str> = header.iter().collect();
        if got != CSV_HEADER {
            return Err(IngestError::HeaderMismatch {
                detail: format!("expected `{}`", CSV_HEADER.join(",")),
            });
        }
    }

    struct Pending {
        run_id: String,
        instance_id: String,
        records: Vec<IterationRecord>,
        outcome: Outcome,
    }

    impl Pending {
        fn finish(self) -> Result<RunTrace, IngestError> {
            RunTrace::new(self.run_id, self.instance_id, self.records, self.outcome)
        }
    }

    let mut traces = Vec::new();
    let mut current: Option<Pending> = None;
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader
            .read_record(&mut record)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::UnequalLengths { pos, .. } => IngestError::RowArity {
                    line: pos.as_ref().map(|p| p.line()).unwrap_or(0),
                },
                _ => IngestError::HeaderMismatch { detail: e.to_string() },
            })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != CSV_HEADER.len() {
            return Err(IngestError::RowArity { line });
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_f64 = |i: usize| -> Result<f64, IngestError> {
            field(i)
                .trim()
                .parse::<f64>()
                .map_err(|_| IngestError::MalformedLine { line })
        };
        let iteration_index: u32 = field(2)
            .trim()
            .parse()
            .map_err(|_| IngestError::MalformedLine { line })?;
        let mut values = [0.0; 8];
        for (slot, col) in values.iter_mut().zip(3..11) {
            *slot = parse_f64(col)?;
        }
        let iter_record = IterationRecord::from_stats(iteration_index, values)
            .map_err(|_| IngestError::MalformedLine { line })?;
        let outcome = match field(11) {
            "terminated" => Outcome::Terminated { total_runtime: parse_f64(12)? },
            "timeout" => Outcome::TimedOut { limit: parse_f64(12)? },
            "still_running" if field(12).is_empty() => Outcome::StillRunning,
            _ => return Err(IngestError::MalformedLine { line }),
        };

        if iteration_index == 1 {
            if let Some(done) = current.take() {
                traces.push(done.finish()?);
            }
            current = Some(Pending {
                run_id: field(0).to_string(),
                instance_id: field(1).to_string(),
                records: vec![iter_record],
                outcome,
            });
        } else {
            let pending = current
                .as_mut()
                .ok_or(IngestError::NonConsecutiveIteration { expected: 1, got: iteration_index })?;
            let expected = pending.records.len() as u32 + 1;
            if iteration_index != expected {
                return Err(IngestError::NonConsecutiveIteration { expected, got: iteration_index });
            }
            // Denormalized columns must agree across the rows of one run.
            if pending.run_id != field(0)
                || pending.instance_id != field(1)
                || pending.outcome != outcome
            {
                return Err(IngestError::MalformedLine { line });
            }
            pending.records.push(iter_record);
        }
    }
    if let Some(done) = current.take() {
        traces.push(done.finish()?);
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(k: u32, conflicts: f64) -> String {
        format!(
            "c [iter {k}]\n\
             c [stat] all-threads: 42.5\n\
             c [stat] conflicts/second: {conflicts}\n\
             c [stat] blocked-restarts: 2\n\
             c [stat] restarts: 5\n\
             c [stat] props/decision: 100.5\n\
             c [stat] props/conflict: 51.25\n\
             c [stat] literals/conflict: 30\n\
             c [stat] decisions/conflict: 0.5\n\
             c [iter-end {k}]\n"
        )
    }

    fn parse(text: &str) -> Result<RunTrace, IngestError> {
        parse_stats_stream(text.as_bytes(), "canonical", "run", "inst")
    }

    #[test]
    fn minimal_block_still_running() {
        let trace = parse(&block(1, 3000.0)).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.outcome, Outcome::StillRunning);
        assert_eq!(trace.records[0].conflicts_per_second, 3000.0);
        assert_eq!(trace.records[0].all_threads_time, 42.5);
    }

    #[test]
    fn outcome_marker_sets_terminated() {
        let text = format!("{}s SATISFIABLE\nc [outcome] terminated 1234.5\n", block(1, 3000.0));
        let trace = parse(&text).unwrap();
        assert_eq!(trace.outcome, Outcome::Terminated { total_runtime: 1234.5 });
    }

    #[test]
    fn timeout_marker() {
        let text = format!("{}c [outcome] timeout 3600\n", block(1, 3000.0));
        let trace = parse(&text).unwrap();
        assert_eq!(trace.outcome, Outcome::TimedOut { limit: 3600.0 });
    }

    #[test]
    fn missing_stat_line_is_rejected() {
        let text = block(1, 3000.0).replace("c [stat] restarts: 5\n", "");
        let err = parse(&text).unwrap_err();
        match err {
            IngestError::MissingField { iteration, field } => {
                assert_eq!(iteration, 1);
                assert_eq!(field, "restarts");
            }
            other => panic!("expected MissingField, got {other:?}"),
        }
    }

    #[test]
    fn non_consecutive_blocks_rejected() {
        let text = block(2, 3000.0);
        let err = parse(&text).unwrap_err();
        assert!(matches!(
            err,
            IngestError::NonConsecutiveIteration { expected: 1, got: 2 }
        ));
    }

    #[test]
    fn malformed_stat_line_names_its_line_number() {
        let text = "c [iter 1]\nc [stat] bogus-name: 5\n";
        match parse(text).unwrap_err() {
            IngestError::MalformedLine { line } => assert_eq!(line, 2),
            other => panic!("expected MalformedLine, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_stat_line_rejected() {
        let text = "c [iter 1]\nc [stat] restarts: 5\nc [stat] restarts: 6\n";
        assert!(matches!(
            parse(text).unwrap_err(),
            IngestError::MalformedLine { line: 3 }
        ));
    }

    #[test]
    fn unrelated_lines_ignored() {
        let text = format!(
            "c CryptoMiniSat version banner\nv 1 -2 0\n{}garbage that is ignored\n",
            block(1, 3000.0)
        );
        let trace = parse(&text).unwrap();
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn truncated_stream_keeps_closed_blocks() {
        let text = format!("{}c [iter 2]\nc [stat] restarts: 9\n", block(1, 3000.0));
        let trace = parse(&text).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.outcome, Outcome::StillRunning);
    }

    #[test]
    fn unknown_adapter_rejected() {
        let err = parse_stats_stream("".as_bytes(), "cms-5.8", "r", "i").unwrap_err();
        assert!(matches!(err, IngestError::UnknownAdapter { .. }));
    }

    #[test]
    fn stream_round_trip() {
        let text = format!("{}{}c [outcome] timeout 100\n", block(1, 10.0), block(2, 20.5));
        let trace = parse(&text).unwrap();
        let rendered = serialize_stats_stream(&trace);
        let reparsed = parse(&rendered).unwrap();
        assert_eq!(trace, reparsed);
    }

    #[test]
    fn csv_round_trip_small() {
        let trace = parse(&format!(
            "{}{}s SATISFIABLE\nc [outcome] terminated 99.5\n",
            block(1, 10.0),
            block(2, 20.5)
        ))
        .unwrap();
        let csv = serialize_canonical_csv(&[trace.clone()]);
        let parsed = parse_canonical_csv(&csv).unwrap();
        assert_eq!(parsed, vec![trace]);
    }

    #[test]
    fn csv_empty_file_with_header_is_empty_list() {
        let csv = serialize_canonical_csv(&[]);
        assert_eq!(csv.lines().count(), 1);
        assert!(parse_canonical_csv(&csv).unwrap().is_empty());
    }

    #[test]
    fn csv_header_mismatch() {
        let err = parse_canonical_csv("run_id,foo\nx,y\n").unwrap_err();
        assert!(matches!(err, IngestError::HeaderMismatch { .. }));
    }

    #[test]
    fn csv_gap_in_iterations() {
        let trace = parse(&format!("{}{}", block(1, 10.0), block(2, 20.0))).unwrap();
        let csv = serialize_canonical_csv(&[trace]);
        // Drop the row for iteration 2 and splice in iteration 3 instead.
        let broken = csv.replace(",2,", ",3,");
        let err = parse_canonical_csv(&broken).unwrap_err();
        assert!(matches!(
            err,
            IngestError::NonConsecutiveIteration { expected: 2, got: 3 }
        ));
    }

    #[test]
    fn csv_row_arity() {
        let csv = format!("{}\nr,i,1,2\n", CSV_HEADER.join(","));
        let err = parse_canonical_csv(&csv).unwrap_err();
        assert!(matches!(err, IngestError::RowArity { .. }));
    }
}
