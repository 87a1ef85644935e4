//! Key rate over a grid of rotation angles and bit error rates.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ideal_table, ChannelParams};
use crate::error::Result;
use crate::rate::analyze;
use crate::settings::Settings;
use crate::table::{CheckingPair, Mode, PhaseInterval};

/// One grid point. Interval columns are empty for pairs the mode skips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub e_b: f64,
    pub omega: f64,
    pub e_bit: f64,
    pub e_phase: f64,
    pub rate: f64,
    #[serde(rename = "L22")]
    pub l22: Option<f64>,
    #[serde(rename = "U22")]
    pub u22: Option<f64>,
    #[serde(rename = "L23")]
    pub l23: Option<f64>,
    #[serde(rename = "U23")]
    pub u23: Option<f64>,
    #[serde(rename = "L32")]
    pub l32: Option<f64>,
    #[serde(rename = "U32")]
    pub u32: Option<f64>,
    #[serde(rename = "L33")]
    pub l33: Option<f64>,
    #[serde(rename = "U33")]
    pub u33: Option<f64>,
}

impl SweepRow {
    fn new(theta: f64, e_b: f64, intervals: [Option<PhaseInterval>; 4]) -> Self {
        let lo = |s: usize| intervals[s].map(|i| i.lower);
        let hi = |s: usize| intervals[s].map(|i| i.upper);
        Self {
            theta,
            e_b,
            omega: 0.0,
            e_bit: 0.0,
            e_phase: 0.0,
            rate: 0.0,
            l22: lo(0),
            u22: hi(0),
            l23: lo(1),
            u23: hi(1),
            l32: lo(2),
            u32: hi(2),
            l33: lo(3),
            u33: hi(3),
        }
    }

    pub fn interval(&self, pair: CheckingPair) -> Option<PhaseInterval> {
        let (l, u) = match pair.slot() {
            0 => (self.l22, self.u22),
            1 => (self.l23, self.u23),
            2 => (self.l32, self.u32),
            _ => (self.l33, self.u33),
        };
        Some(PhaseInterval {
            lower: l?,
            upper: u?,
        })
    }

    /// The row for `2π − θ`: Alice and Bob trade roles, which swaps the
    /// mixed pairs and leaves everything else unchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            theta: TAU - self.theta,
            l23: self.l32,
            u23: self.u32,
            l32: self.l23,
            u32: self.u23,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub e_b_values: Vec<f64>,
    /// Number of angles spanning `[0, π]` inclusive; at least 2.
    pub theta_steps: usize,
    pub full_circle: bool,
    pub mode: Mode,
    pub settings: Settings,
}

impl SweepSpec {
    pub fn thetas(&self) -> Vec<f64> {
        let n = self.theta_steps;
        (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect()
    }
}

pub fn analyze_point(theta: f64, e_b: f64, mode: Mode, settings: &Settings) -> Result<SweepRow> {
    let table = ideal_table(ChannelParams::new(e_b, theta)?)?;
    let report = analyze(&table, mode, settings)?;
    Ok(SweepRow {
        omega: report.omega,
        e_bit: report.e_bit,
        e_phase: report.e_phase,
        rate: report.rate,
        ..SweepRow::new(theta, e_b, report.intervals)
    })
}

/// Rows ordered theta outer, `e_b` inner. With `full_circle` the angles in
/// `(π, 2π)` follow, mirrored from the computed half.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.theta_steps < 2 {
        return Err(crate::error::Error::InvalidParams(
            "theta steps must be at least 2".into(),
        ));
    }
    let grid: Vec<(f64, f64)> = spec
        .thetas()
        .into_iter()
        .flat_map(|t| spec.e_b_values.iter().map(move |&e| (t, e)))
        .collect();
    let mut rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&(t, e)| analyze_point(t, e, spec.mode, &spec.settings))
        .collect::<Result<_>>()?;
    if spec.full_circle {
        let per_theta = spec.e_b_values.len();
        let mirrored: Vec<SweepRow> = (1..spec.theta_steps - 1)
            .rev()
            .flat_map(|i| {
                rows[i * per_theta..(i + 1) * per_theta]
                    .iter()
                    .map(SweepRow::mirrored)
            })
            .collect();
        rows.extend(mirrored);
    }
    Ok(rows)
}

/// Writes a header followed by one record per row.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record([
        "theta", "e_b", "omega", "e_bit", "e_phase", "rate", "L22", "U22", "L23", "U23", "L32",
        "U32", "L33", "U33",
    ])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
