use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::table::EPS;

/// How the minimum inner-product modulus is searched for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseSolver {
    /// Exact arc arithmetic on the circle for each `r` cell.
    Arcs,
    /// Uniform angle grid with Lipschitz slack.
    Grid,
}

impl fmt::Display for PhaseSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseSolver::Arcs => "arcs",
            PhaseSolver::Grid => "grid",
        })
    }
}

impl FromStr for PhaseSolver {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "arcs" => Ok(PhaseSolver::Arcs),
            "grid" => Ok(PhaseSolver::Grid),
            other => Err(format!("unknown solver `{other}` (expected arcs or grid)")),
        }
    }
}

/// Tunables for the coefficient optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Points per axis of the coefficient grid over `[0, A_MAX]`.
    pub grid_n: usize,
    /// Feasibility slack on the side constraints.
    pub eps: f64,
    /// Stop once the certified bound is within this of the best feasible value.
    pub tolerance: f64,
    /// Box budget per extremization; the bound stays certified when hit.
    pub max_boxes: usize,
    /// Boxes narrower than this are not split further.
    pub min_width: f64,
    /// Pattern-search iterations used to polish the incumbent.
    pub pattern_iterations: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            grid_n: 301,
            eps: EPS,
            tolerance: 1e-7,
            max_boxes: 200_000,
            min_width: 1e-9,
            pattern_iterations: 50,
        }
    }
}

/// Tunables for the inner-product search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusSettings {
    pub r_step: f64,
    pub angle_step_deg: f64,
    pub solver: PhaseSolver,
}

impl Default for ModulusSettings {
    fn default() -> Self {
        Self {
            r_step: 1e-3,
            angle_step_deg: 1.0,
            solver: PhaseSolver::Arcs,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub optimizer: OptimizerSettings,
    pub modulus: ModulusSettings,
}
