//! Shared data model: probability tables, coefficient points, checking
//! pairs and phase intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used whenever an inequality is compared against an observed
/// probability or an interval endpoint.
pub const EPS: f64 = 1e-9;

/// Search cap on checking-state amplitudes.
pub const A_MAX: f64 = 3.0;

/// Analysis mode: four checking pairs (reference-frame independent) or the
/// single `(2,2)` pair of the plain MDI protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rfi,
    NonRfi,
}

impl Mode {
    pub fn min_size(self) -> usize {
        match self {
            Mode::Rfi => 4,
            Mode::NonRfi => 3,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Rfi => "rfi",
            Mode::NonRfi => "nonrfi",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rfi" => Ok(Mode::Rfi),
            "nonrfi" | "non-rfi" => Ok(Mode::NonRfi),
            other => Err(format!("unknown mode `{other}` (expected rfi or nonrfi)")),
        }
    }
}

/// One validation finding.
#[derive(Clone, Debug, PartialEq)]
pub enum TableIssue {
    WrongSize { size: usize, required: &'static str },
    RaggedRow { row: usize, len: usize, size: usize },
    RowCount { rows: usize, size: usize },
    NonFinite { i: usize, j: usize },
    OutOfRange { i: usize, j: usize, value: f64 },
}

impl fmt::Display for TableIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableIssue::WrongSize { size, required } => {
                write!(f, "size must be {required} (got {size})")
            }
            TableIssue::RaggedRow { row, len, size } => {
                write!(f, "row {row} has {len} entries, expected {size}")
            }
            TableIssue::RowCount { rows, size } => {
                write!(f, "table has {rows} rows, expected {size}")
            }
            TableIssue::NonFinite { i, j } => write!(f, "entry ({i},{j}) is not finite"),
            TableIssue::OutOfRange { i, j, value } => {
                write!(f, "entry ({i},{j}) out of range: {value}")
            }
        }
    }
}

/// Conditional probabilities `p[i][j]` of Charlie announcing outcome 1 given
/// that Alice sent state `i` (row) and Bob sent state `j` (column).
///
/// Indices 0 and 1 are the encoding states, 2 and 3 the checking states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    size: usize,
    p: Vec<Vec<f64>>,
}

impl ProbabilityTable {
    /// Builds a table from row-major data without validating it.
    pub fn from_rows(p: Vec<Vec<f64>>) -> Self {
        Self { size: p.len(), p }
    }

    /// Builds and validates a table for `mode`.
    pub fn checked(p: Vec<Vec<f64>>, mode: Mode) -> Result<Self> {
        let t = Self::from_rows(p);
        let issues = validate_table(&t, mode);
        if issues.is_empty() {
            Ok(t)
        } else {
            Err(Error::InvalidTable(issues))
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.p
    }

    /// `p[i][j]`. Panics when out of bounds; validate first.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i][j]
    }

    pub fn transpose(&self) -> Self {
        let n = self.p.len();
        let p = (0..n)
            .map(|j| (0..n).map(|i| self.p[i][j]).collect())
            .collect();
        Self { size: self.size, p }
    }

    /// `p00 + p11 + p01 + p10`.
    pub fn key_mass(&self) -> f64 {
        self.get(0, 0) + self.get(1, 1) + self.get(0, 1) + self.get(1, 0)
    }
}

/// Returns every violation found in `table`; empty means valid.
pub fn validate_table(table: &ProbabilityTable, mode: Mode) -> Vec<TableIssue> {
    let mut issues = Vec::new();
    let size = table.size;
    match mode {
        Mode::Rfi if size != 4 => issues.push(TableIssue::WrongSize {
            size,
            required: "4",
        }),
        Mode::NonRfi if !(3..=4).contains(&size) => issues.push(TableIssue::WrongSize {
            size,
            required: "3 or 4",
        }),
        _ => {}
    }
    if table.p.len() != size {
        issues.push(TableIssue::RowCount {
            rows: table.p.len(),
            size,
        });
    }
    for (i, row) in table.p.iter().enumerate() {
        if row.len() != size {
            issues.push(TableIssue::RaggedRow {
                row: i,
                len: row.len(),
                size,
            });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                issues.push(TableIssue::NonFinite { i, j });
            } else if !(0.0..=1.0).contains(&v) {
                issues.push(TableIssue::OutOfRange { i, j, value: v });
            }
        }
    }
    issues
}

/// External table format: either probabilities or raw counts out of a fixed
/// number of shots per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableFile {
    Probabilities {
        size: usize,
        p: Vec<Vec<f64>>,
    },
    Counts {
        size: usize,
        shots: u64,
        counts: Vec<Vec<u64>>,
    },
}

impl TableFile {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialization is infallible")
    }

    /// Converts to a probability table; counts become `count / shots`.
    pub fn into_table(self) -> Result<ProbabilityTable> {
        match self {
            TableFile::Probabilities { size, p } => Ok(ProbabilityTable { size, p }),
            TableFile::Counts {
                size,
                shots,
                counts,
            } => {
                if shots == 0 {
                    return Err(Error::InvalidParams("shots must be positive".into()));
                }
                if let Some(c) = counts.iter().flatten().find(|&&c| c > shots) {
                    return Err(Error::InvalidParams(format!(
                        "count {c} exceeds shots {shots}"
                    )));
                }
                let p = counts
                    .iter()
                    .map(|row| row.iter().map(|&c| c as f64 / shots as f64).collect())
                    .collect();
                Ok(ProbabilityTable { size, p })
            }
        }
    }
}

impl From<&ProbabilityTable> for TableFile {
    fn from(t: &ProbabilityTable) -> Self {
        TableFile::Probabilities {
            size: t.size,
            p: t.p.clone(),
        }
    }
}

/// Amplitudes `(a0, a1)` of one checking state over one side's encoding
/// states. The relative phase is deliberately not stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPoint {
    pub a0: f64,
    pub a1: f64,
}

impl CoefficientPoint {
    pub fn new(a0: f64, a1: f64) -> Self {
        Self { a0, a1 }
    }

    /// `(a0 - a1)² <= 1 <= (a0 + a1)²` and both amplitudes in `[0, A_MAX]`.
    pub fn is_normalizable(&self, eps: f64) -> bool {
        let d = self.a0 - self.a1;
        let s = self.a0 + self.a1;
        (0.0..=A_MAX).contains(&self.a0)
            && (0.0..=A_MAX).contains(&self.a1)
            && d * d <= 1.0 + eps
            && s * s >= 1.0 - eps
    }
}

/// A (Alice checking index, Bob checking index) combination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CheckingPair {
    pub alice: usize,
    pub bob: usize,
}

impl CheckingPair {
    /// In composite-phase order `A, A+B, A+C, A+B+C`.
    pub const ALL: [CheckingPair; 4] = [
        CheckingPair { alice: 2, bob: 2 },
        CheckingPair { alice: 2, bob: 3 },
        CheckingPair { alice: 3, bob: 2 },
        CheckingPair { alice: 3, bob: 3 },
    ];

    pub const BASELINE: CheckingPair = CheckingPair { alice: 2, bob: 2 };

    /// Position in [`CheckingPair::ALL`].
    pub fn slot(self) -> usize {
        (self.alice - 2) * 2 + (self.bob - 2)
    }

    /// Name of the composite phase this pair constrains.
    pub fn composite(self) -> &'static str {
        ["A", "A+B", "A+C", "A+B+C"][self.slot()]
    }

    pub fn swapped(self) -> Self {
        Self {
            alice: self.bob,
            bob: self.alice,
        }
    }
}

impl fmt::Display for CheckingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.alice, self.bob)
    }
}

/// Bounds `[lower, upper]` on `Re[e^{iΦ}⟨Γ00|Γ11⟩]` for one checking pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseInterval {
    pub lower: f64,
    pub upper: f64,
}

impl PhaseInterval {
    /// Clamps both ends to `[-1, 1]`.
    pub fn clamped(lower: f64, upper: f64) -> Self {
        Self {
            lower: lower.clamp(-1.0, 1.0),
            upper: upper.clamp(-1.0, 1.0),
        }
    }

    pub fn point(x: f64) -> Self {
        Self { lower: x, upper: x }
    }

    pub fn full() -> Self {
        Self {
            lower: -1.0,
            upper: 1.0,
        }
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        self.lower - slack <= x && x <= self.upper + slack
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_superset_of(&self, other: &PhaseInterval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_quarter_table_is_valid() {
        let t = ProbabilityTable::from_rows(vec![vec![0.25; 4]; 4]);
        assert!(validate_table(&t, Mode::Rfi).is_empty());
    }

    #[test]
    fn negative_entry_is_reported() {
        let mut rows = vec![vec![0.25; 4]; 4];
        rows[0][0] = -0.1;
        let issues = validate_table(&ProbabilityTable::from_rows(rows), Mode::Rfi);
        assert_eq!(issues.len(), 1);
        assert!(issues[0].to_string().contains("out of range"));
    }

    #[test]
    fn rfi_requires_size_four() {
        let t = ProbabilityTable::from_rows(vec![vec![0.25; 2]; 2]);
        let issues = validate_table(&t, Mode::Rfi);
        assert!(issues
            .iter()
            .any(|i| i.to_string().contains("size must be 4")));
        let t3 = ProbabilityTable::from_rows(vec![vec![0.25; 3]; 3]);
        assert!(validate_table(&t3, Mode::NonRfi).is_empty());
        assert!(!validate_table(&t3, Mode::Rfi).is_empty());
    }

    #[test]
    fn all_findings_are_collected() {
        let t = ProbabilityTable::from_rows(vec![
            vec![f64::NAN, 2.0, 0.0, 0.0],
            vec![0.0; 3],
            vec![0.0; 4],
            vec![0.0; 4],
        ]);
        let issues = validate_table(&t, Mode::Rfi);
        assert_eq!(issues.len(), 3, "{issues:?}");
    }

    #[test]
    fn counts_are_converted() {
        let f = TableFile::from_json(r#"{"size":3,"shots":4,"counts":[[1,2,3],[0,4,1],[2,2,2]]}"#)
            .unwrap();
        let t = f.into_table().unwrap();
        assert_eq!(t.get(0, 1), 0.5);
        assert_eq!(t.get(1, 1), 1.0);
        let bad = TableFile::from_json(r#"{"size":1,"shots":4,"counts":[[5]]}"#).unwrap();
        assert!(bad.into_table().is_err());
    }

    #[test]
    fn pair_slots_follow_composite_order() {
        for (i, pair) in CheckingPair::ALL.iter().enumerate() {
            assert_eq!(pair.slot(), i);
        }
        assert_eq!(CheckingPair::ALL[1].swapped(), CheckingPair::ALL[2]);
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_identical(
            rows in proptest::collection::vec(proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 4), 4)
        ) {
            let t = ProbabilityTable::from_rows(rows);
            let text = TableFile::from(&t).to_json();
            let back = TableFile::from_json(&text).unwrap().into_table().unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert_eq!(t.get(i, j).to_bits(), back.get(i, j).to_bits());
                }
            }
        }
    }
}
