//! Per-iteration solver statistics and whole-run traces.
//!
//! A CDCL solver in verbose mode reports a block of runtime statistics at the
//! end of every iteration. [`IterationRecord`] is one such block,
//! [`RunTrace`] the ordered sequence of blocks for one solving attempt.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::ingest::IngestError;

/// The eight runtime statistics a solver reports per iteration.
///
/// Wire names (as they appear in stats lines) are the solver's own spellings:
/// `all-threads`, `conflicts/second`, `blocked-restarts`, `restarts`,
/// `props/decision`, `props/conflict`, `literals/conflict`,
/// `decisions/conflict`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stat {
    AllThreads,
    ConflictsPerSecond,
    BlockedRestarts,
    Restarts,
    PropsPerDecision,
    PropsPerConflict,
    LiteralsPerConflict,
    DecisionsPerConflict,
}

impl Stat {
    /// All stats, in canonical reporting order.
    pub const ALL: [Stat; 8] = [
        Stat::AllThreads,
        Stat::ConflictsPerSecond,
        Stat::BlockedRestarts,
        Stat::Restarts,
        Stat::PropsPerDecision,
        Stat::PropsPerConflict,
        Stat::LiteralsPerConflict,
        Stat::DecisionsPerConflict,
    ];

    /// Name used in solver output lines.
    pub fn wire_name(self) -> &'static str {
        match self {
            Stat::AllThreads => "all-threads",
            Stat::ConflictsPerSecond => "conflicts/second",
            Stat::BlockedRestarts => "blocked-restarts",
            Stat::Restarts => "restarts",
            Stat::PropsPerDecision => "props/decision",
            Stat::PropsPerConflict => "props/conflict",
            Stat::LiteralsPerConflict => "literals/conflict",
            Stat::DecisionsPerConflict => "decisions/conflict",
        }
    }

    /// Column name used in the canonical CSV format.
    pub fn csv_name(self) -> &'static str {
        match self {
            Stat::AllThreads => "all_threads",
            Stat::ConflictsPerSecond => "conflicts_per_sec",
            Stat::BlockedRestarts => "blocked_restarts",
            Stat::Restarts => "restarts",
            Stat::PropsPerDecision => "props_per_decision",
            Stat::PropsPerConflict => "props_per_conflict",
            Stat::LiteralsPerConflict => "literals_per_conflict",
            Stat::DecisionsPerConflict => "decisions_per_conflict",
        }
    }

    pub(crate) fn index(self) -> usize {
        Stat::ALL.iter().position(|s| *s == self).unwrap()
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

impl FromStr for Stat {
    type Err = UnknownStat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stat::ALL
            .iter()
            .copied()
            .find(|stat| stat.wire_name() == s || stat.csv_name() == s)
            .ok_or_else(|| UnknownStat(s.to_string()))
    }
}

/// A stat name that is not one of the eight reported parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownStat(pub String);

impl fmt::Display for UnknownStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown runtime parameter `{}`", self.0)
    }
}

impl std::error::Error for UnknownStat {}

/// One iteration's statistics snapshot.
///
/// `all_threads_time` is the total time consumed by the iteration summed over
/// all solver threads and must be strictly positive; every other value is
/// non-negative. Counts (`blocked_restarts`, `restarts`) are stored as `f64`
/// because the wire format carries floats; they are kept exactly as reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration_index: u32,
    pub all_threads_time: f64,
    pub conflicts_per_second: f64,
    pub blocked_restarts: f64,
    pub restarts: f64,
    pub props_per_decision: f64,
    pub props_per_conflict: f64,
    pub literals_per_conflict: f64,
    pub decisions_per_conflict: f64,
}

impl IterationRecord {
    /// Value of one of the eight reported statistics.
    pub fn stat(&self, stat: Stat) -> f64 {
        match stat {
            Stat::AllThreads => self.all_threads_time,
            Stat::ConflictsPerSecond => self.conflicts_per_second,
            Stat::BlockedRestarts => self.blocked_restarts,
            Stat::Restarts => self.restarts,
            Stat::PropsPerDecision => self.props_per_decision,
            Stat::PropsPerConflict => self.props_per_conflict,
            Stat::LiteralsPerConflict => self.literals_per_conflict,
            Stat::DecisionsPerConflict => self.decisions_per_conflict,
        }
    }

    /// Build a record from an iteration index plus the eight stats in
    /// [`Stat::ALL`] order, validating every field.
    pub fn from_stats(iteration_index: u32, values: [f64; 8]) -> Result<Self, IngestError> {
        let rec = IterationRecord {
            iteration_index,
            all_threads_time: values[0],
            conflicts_per_second: values[1],
            blocked_restarts: values[2],
            restarts: values[3],
            props_per_decision: values[4],
            props_per_conflict: values[5],
            literals_per_conflict: values[6],
            decisions_per_conflict: values[7],
        };
        rec.validate()?;
        Ok(rec)
    }

    /// Check the per-record invariants: index >= 1, `all_threads_time` > 0,
    /// everything else finite and >= 0.
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.iteration_index < 1 {
            return Err(IngestError::InvalidValue {
                iteration: self.iteration_index,
                field: "iteration_index".into(),
            });
        }
        for stat in Stat::ALL {
            let v = self.stat(stat);
            let ok = v.is_finite() && if stat == Stat::AllThreads { v > 0.0 } else { v >= 0.0 };
            if !ok {
                return Err(IngestError::InvalidValue {
                    iteration: self.iteration_index,
                    field: stat.wire_name().into(),
                });
            }
        }
        Ok(())
    }
}

/// How a solving attempt ended, if it did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    /// The run found its answer after `total_runtime` seconds of wall time.
    Terminated { total_runtime: f64 },
    /// The run was cut off at the configured limit.
    TimedOut { limit: f64 },
    /// No end-of-run marker seen (live stream or truncated log).
    StillRunning,
}

impl Outcome {
    pub fn is_final(&self) -> bool {
        !matches!(self, Outcome::StillRunning)
    }
}

/// The ordered statistics snapshots of one solving attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run_id: String,
    pub instance_id: String,
    pub records: Vec<IterationRecord>,
    pub outcome: Outcome,
}

impl RunTrace {
    /// Build a trace, checking all invariants.
    pub fn new(
        run_id: impl Into<String>,
        instance_id: impl Into<String>,
        records: Vec<IterationRecord>,
        outcome: Outcome,
    ) -> Result<Self, IngestError> {
        let trace = RunTrace {
            run_id: run_id.into(),
            instance_id: instance_id.into(),
            records,
            outcome,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// Invariants: iteration indices are 1, 2, 3, ... without gaps; every
    /// record valid; final outcomes carry a positive duration.
    pub fn validate(&self) -> Result<(), IngestError> {
        for (i, rec) in self.records.iter().enumerate() {
            let expected = (i + 1) as u32;
            if rec.iteration_index != expected {
                return Err(IngestError::NonConsecutiveIteration {
                    expected,
                    got: rec.iteration_index,
                });
            }
            rec.validate()?;
        }
        match self.outcome {
            Outcome::Terminated { total_runtime } if !(total_runtime > 0.0 && total_runtime.is_finite()) => {
                Err(IngestError::InvalidOutcome {
                    detail: format!("terminated with non-positive runtime {total_runtime}"),
                })
            }
            Outcome::TimedOut { limit } if !(limit > 0.0 && limit.is_finite()) => {
                Err(IngestError::InvalidOutcome {
                    detail: format!("timeout with non-positive limit {limit}"),
                })
            }
            _ => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(index: u32) -> IterationRecord {
        IterationRecord::from_stats(index, [10.0, 3000.0, 2.0, 5.0, 100.0, 50.0, 30.0, 0.5]).unwrap()
    }

    #[test]
    fn stat_names_round_trip() {
        for stat in Stat::ALL {
            assert_eq!(stat.wire_name().parse::<Stat>().unwrap(), stat);
            assert_eq!(stat.csv_name().parse::<Stat>().unwrap(), stat);
        }
        assert!("conflicts".parse::<Stat>().is_err());
    }

    #[test]
    fn record_rejects_zero_all_threads_time() {
        let err = IterationRecord::from_stats(1, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(err, Err(IngestError::InvalidValue { .. })));
    }

    #[test]
    fn record_rejects_negative_stat() {
        let err = IterationRecord::from_stats(1, [1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(err, Err(IngestError::InvalidValue { .. })));
    }

    #[test]
    fn trace_requires_consecutive_indices() {
        let err = RunTrace::new("r", "i", vec![record(1), record(3)], Outcome::StillRunning);
        assert!(matches!(
            err,
            Err(IngestError::NonConsecutiveIteration { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn trace_requires_positive_runtime() {
        let err = RunTrace::new(
            "r",
            "i",
            vec![record(1)],
            Outcome::Terminated { total_runtime: 0.0 },
        );
        assert!(matches!(err, Err(IngestError::InvalidOutcome { .. })));
    }
}
