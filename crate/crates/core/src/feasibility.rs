//! Which checking-state amplitudes are consistent with an observed table.
//!
//! For Alice's checking state `k` and each of Bob's encoding states `n`,
//! linearity of Eve's outcome-1 operator gives
//!
//! ```text
//! √p_kn |Γ_kn⟩ = √p_0n a0 |Γ_0n⟩ + √p_1n a1 e^{iθ} |Γ_1n⟩
//! ```
//!
//! and taking norms with the unknown overlap free in `[-1, 1]` leaves
//!
//! ```text
//! (√p_0n a0 − √p_1n a1)² ≤ p_kn ≤ (√p_0n a0 + √p_1n a1)²
//! ```
//!
//! which is the same condition as `|p_kn − p_0n a0² − p_1n a1²| ≤ 2√(p_0n p_1n) a0 a1`.
//! Bob's side is the column analogue.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::table::{CoefficientPoint, ProbabilityTable, A_MAX, EPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Alice,
    Bob,
}

/// `(p_checking, p_via_encoding_0, p_via_encoding_1)` for one row/column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triple {
    pub checking: f64,
    pub via0: f64,
    pub via1: f64,
}

impl Triple {
    fn holds(&self, a0: f64, a1: f64, eps: f64) -> bool {
        let (s0, s1) = (self.via0.sqrt() * a0, self.via1.sqrt() * a1);
        let hi = (s0 + s1) * (s0 + s1);
        let lo = (s0 - s1) * (s0 - s1);
        lo - eps <= self.checking && self.checking <= hi + eps
    }

    fn may_hold(&self, a0: Interval, a1: Interval, eps: f64) -> bool {
        let s0 = a0.scale(self.via0.sqrt());
        let s1 = a1.scale(self.via1.sqrt());
        let hi = (s0 + s1).sqr();
        let lo = (s0 - s1).sqr();
        lo.lo - eps <= self.checking && self.checking <= hi.hi + eps
    }
}

/// The observed probabilities constraining one checking state of one side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SideRowSpec {
    pub side: Side,
    pub index: usize,
    pub rows: [Triple; 2],
}

impl SideRowSpec {
    /// Alice's checking state `k`: `(p_kn, p_0n, p_1n)` for `n = 0, 1`.
    pub fn alice(table: &ProbabilityTable, k: usize) -> Self {
        let t = |n| Triple {
            checking: table.get(k, n),
            via0: table.get(0, n),
            via1: table.get(1, n),
        };
        Self {
            side: Side::Alice,
            index: k,
            rows: [t(0), t(1)],
        }
    }

    /// Bob's checking state `l`: `(p_ml, p_m0, p_m1)` for `m = 0, 1`.
    pub fn bob(table: &ProbabilityTable, l: usize) -> Self {
        let t = |m| Triple {
            checking: table.get(m, l),
            via0: table.get(m, 0),
            via1: table.get(m, 1),
        };
        Self {
            side: Side::Bob,
            index: l,
            rows: [t(0), t(1)],
        }
    }

    pub fn label(&self) -> String {
        let who = match self.side {
            Side::Alice => "Alice",
            Side::Bob => "Bob",
        };
        format!("{who} checking state {}", self.index)
    }
}

pub fn is_feasible(point: CoefficientPoint, spec: &SideRowSpec) -> bool {
    is_feasible_with(point, spec, EPS)
}

pub fn is_feasible_with(point: CoefficientPoint, spec: &SideRowSpec, eps: f64) -> bool {
    point.is_normalizable(eps) && spec.rows.iter().all(|t| t.holds(point.a0, point.a1, eps))
}

/// False only if no point of the box `a0 × a1` can be feasible.
pub fn box_may_be_feasible(a0: Interval, a1: Interval, spec: &SideRowSpec, eps: f64) -> bool {
    if a0.hi < 0.0 || a1.hi < 0.0 || a0.lo > A_MAX || a1.lo > A_MAX {
        return false;
    }
    let diff = (a0 - a1).sqr();
    let sum = (a0 + a1).sqr();
    diff.lo <= 1.0 + eps && sum.hi >= 1.0 - eps && spec.rows.iter().all(|t| t.may_hold(a0, a1, eps))
}

/// Grid cells over `[0, A_MAX]²` that may contain a feasible point.
///
/// Every point is the centre of a cell of half-width `spacing / 2`; a point
/// is kept when the interval evaluation of the constraints over its cell
/// does not exclude it. This is the constraint tolerance inflated by the
/// local Lipschitz constant over the cell, so no feasible point is lost.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleSet {
    pub spacing: f64,
    pub points: Vec<CoefficientPoint>,
}

impl FeasibleSet {
    /// The cell `a0 × a1` around `point`, clipped to the search domain.
    pub fn cell(&self, point: CoefficientPoint) -> (Interval, Interval) {
        let h = 0.5 * self.spacing;
        (
            Interval::around(point.a0, h, 0.0, A_MAX),
            Interval::around(point.a1, h, 0.0, A_MAX),
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = (Interval, Interval)> + '_ {
        self.points.iter().map(|&p| self.cell(p))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Scans a `grid_n × grid_n` grid over `[0, A_MAX]²`.
pub fn enumerate_feasible(spec: &SideRowSpec, grid_n: usize) -> Result<FeasibleSet> {
    enumerate_feasible_with(spec, grid_n, EPS)
}

pub fn enumerate_feasible_with(spec: &SideRowSpec, grid_n: usize, eps: f64) -> Result<FeasibleSet> {
    let grid_n = grid_n.max(2);
    let spacing = A_MAX / (grid_n - 1) as f64;
    let h = 0.5 * spacing;
    let mut points = Vec::new();
    for i in 0..grid_n {
        let a0 = i as f64 * spacing;
        let x0 = Interval::around(a0, h, 0.0, A_MAX);
        for j in 0..grid_n {
            let a1 = j as f64 * spacing;
            let x1 = Interval::around(a1, h, 0.0, A_MAX);
            if box_may_be_feasible(x0, x1, spec, eps) {
                points.push(CoefficientPoint::new(a0, a1));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Inconsistent(vec![format!(
            "{}: no amplitudes reproduce the observed probabilities",
            spec.label()
        )]));
    }
    Ok(FeasibleSet { spacing, points })
}

/// Feasible sets for Alice's and Bob's checking states, indexed by
/// `checking index - 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SideSets {
    pub alice: Vec<FeasibleSet>,
    pub bob: Vec<FeasibleSet>,
}

/// Checks that every checking state of both sides admits amplitudes; on
/// success returns the feasible sets for later use.
pub fn consistency_check(table: &ProbabilityTable, grid_n: usize) -> Result<SideSets> {
    consistency_check_with(table, grid_n, EPS)
}

pub fn consistency_check_with(
    table: &ProbabilityTable,
    grid_n: usize,
    eps: f64,
) -> Result<SideSets> {
    let checking: Vec<usize> = (2..table.size()).collect();
    let mut failures = Vec::new();
    let mut alice = Vec::new();
    let mut bob = Vec::new();
    for &k in &checking {
        for (spec, out) in [
            (SideRowSpec::alice(table, k), &mut alice),
            (SideRowSpec::bob(table, k), &mut bob),
        ] {
            match enumerate_feasible_with(&spec, grid_n, eps) {
                Ok(set) => out.push(set),
                Err(Error::Inconsistent(mut f)) => failures.append(&mut f),
                Err(e) => return Err(e),
            }
        }
    }
    if failures.is_empty() {
        Ok(SideSets { alice, bob })
    } else {
        Err(Error::Inconsistent(failures))
    }
}
