//! DIMACS CNF parsing and instance feature extraction.
//!
//! The feature vector describes an instance by its size (`L` variables, `N`
//! clauses), density `N/L`, clause-length order statistics, and literal
//! occurrence counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CnfError {
    #[error("no `p cnf <vars> <clauses>` header found")]
    NoHeader,
    #[error("literal {0} out of range")]
    LiteralOutOfRange(i64),
    #[error("header declares {declared} clauses, file has {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("empty input")]
    EmptyInput,
}

/// A CNF formula: `num_vars` variables, clauses as nonzero literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfInstance {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i64>>,
}

impl CnfInstance {
    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }
}

/// Instance features: sizes, density, clause-length quartiles, occurrence
/// statistics, and the clause-length histogram as fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFeatures {
    pub num_vars: usize,
    pub num_clauses: usize,
    /// N / L.
    pub density: f64,
    pub clause_len_min: f64,
    pub clause_len_q1: f64,
    pub clause_len_median: f64,
    pub clause_len_q3: f64,
    pub clause_len_max: f64,
    /// Sum of clause lengths over the whole formula.
    pub total_literal_occurrences: usize,
    /// length -> fraction of clauses with that length; values sum to 1.
    pub clause_len_fractions: BTreeMap<usize, f64>,
    /// total occurrences averaged over the 2L signed literals.
    pub mean_literal_occurrence: f64,
}

/// Parse DIMACS CNF text: `c` comment lines, one `p cnf L N` header, then
/// clauses as 0-terminated literal sequences (free-form whitespace).
pub fn parse_dimacs(text: &str) -> Result<CnfInstance, CnfError> {
    let mut lines = text.lines().enumerate();
    let (num_vars, declared_clauses) = loop {
        let (line_no, line) = lines.next().ok_or(CnfError::NoHeader)?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p cnf") {
            let mut it = rest.split_whitespace();
            let vars: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(CnfError::NoHeader)?;
            let clauses: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(CnfError::NoHeader)?;
            if it.next().is_some() {
                return Err(CnfError::NoHeader);
            }
            break (vars, clauses);
        }
        return Err(CnfError::InvalidToken {
            line: line_no + 1,
            token: line.split_whitespace().next().unwrap_or("").to_string(),
        });
    };

    let mut clauses: Vec<Vec<i64>> = Vec::with_capacity(declared_clauses);
    let mut current: Vec<i64> = Vec::new();
    for (line_no, line) in lines {
        let line = line.trim();
        if line.starts_with('c') {
            continue;
        }
        for token in line.split_whitespace() {
            let lit: i64 = token.parse().map_err(|_| CnfError::InvalidToken {
                line: line_no + 1,
                token: token.to_string(),
            })?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(CnfError::EmptyClause(clauses.len() + 1));
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                if lit.unsigned_abs() as usize > num_vars {
                    return Err(CnfError::LiteralOutOfRange(lit));
                }
                current.push(lit);
            }
        }
    }
    // A trailing clause without its terminating 0 is accepted.
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != declared_clauses {
        return Err(CnfError::ClauseCountMismatch {
            declared: declared_clauses,
            found: clauses.len(),
        });
    }
    Ok(CnfInstance { num_vars, clauses })
}

/// Order statistics (min, q1, median, q3, max) with linear interpolation
/// between closest ranks (type-7 quantiles).
pub fn quartiles(values: &[f64]) -> Result<(f64, f64, f64, f64, f64), CnfError> {
    if values.is_empty() {
        return Err(CnfError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite quartile input"));
    let at = |p: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok((at(0.0), at(0.25), at(0.5), at(0.75), at(1.0)))
}

/// Compute the instance feature vector of a parsed formula.
pub fn instance_features(inst: &CnfInstance) -> InstanceFeatures {
    let num_clauses = inst.num_clauses();
    let lengths: Vec<f64> = inst.clauses.iter().map(|c| c.len() as f64).collect();
    let (min, q1, median, q3, max) =
        quartiles(&lengths).expect("CnfInstance invariant: at least notionally non-empty clauses");
    let total: usize = inst.clauses.iter().map(|c| c.len()).sum();

    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for clause in &inst.clauses {
        *histogram.entry(clause.len()).or_insert(0) += 1;
    }
    let clause_len_fractions = histogram
        .into_iter()
        .map(|(len, count)| (len, count as f64 / num_clauses as f64))
        .collect();

    InstanceFeatures {
        num_vars: inst.num_vars,
        num_clauses,
        density: num_clauses as f64 / inst.num_vars as f64,
        clause_len_min: min,
        clause_len_q1: q1,
        clause_len_median: median,
        clause_len_q3: q3,
        clause_len_max: max,
        total_literal_occurrences: total,
        clause_len_fractions,
        // Averaged over the 2L signed literals, positive and negative
        // occurrences counted separately.
        mean_literal_occurrence: total as f64 / (2.0 * inst.num_vars as f64),
    }
}
