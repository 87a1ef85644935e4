use thiserror::Error;

use crate::table::TableIssue;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability table: {}", join(.0))]
    InvalidTable(Vec<TableIssue>),

    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),

    /// No coefficient point is consistent with the observed table for at
    /// least one side/checking state.
    #[error("observations inconsistent with two-dimensional source assumption: {}", .0.join("; "))]
    Inconsistent(Vec<String>),

    #[error("phase intervals are mutually contradictory for every r in [0, 1]")]
    ContradictoryIntervals,

    #[error("no key events: p00 + p11 + p01 + p10 = 0")]
    NoKeyEvents,

    #[error("binary entropy argument {0} outside [0, 1]")]
    EntropyDomain(f64),

    #[error("overlap undefined: p00 or p11 is zero")]
    UndefinedOverlap,
}

fn join(issues: &[TableIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
