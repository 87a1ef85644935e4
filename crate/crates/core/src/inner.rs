//! Lower bound on `r = |⟨Γ00|Γ11⟩|` from the phase intervals.
//!
//! With `⟨Γ00|Γ11⟩ = r e^{iδ}` the four checking pairs constrain
//! `r cos u`, `r cos v`, `r cos w` and `r cos(v + w − u)` where `u = A`,
//! `v = A + B`, `w = A + C`. The certified bound is the smallest `r` for
//! which some `(u, v, w)` satisfies all four interval constraints.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::settings::{ModulusSettings, PhaseSolver};
use crate::table::{PhaseInterval, EPS};

/// The four intervals in composite order `A, A+B, A+C, A+B+C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSystem {
    pub intervals: [PhaseInterval; 4],
}

impl PhaseSystem {
    pub fn new(intervals: [PhaseInterval; 4]) -> Self {
        Self { intervals }
    }

    /// Exchanges the `(2,3)` and `(3,2)` constraints (`B ↔ C`).
    pub fn swapped(&self) -> Self {
        let [a, b, c, d] = self.intervals;
        Self::new([a, c, b, d])
    }
}

/// A feasible `(r, A, B, C)`; angles in `(-π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Witness {
    fn from_uvw(r: f64, u: f64, v: f64, w: f64) -> Self {
        Self {
            r,
            a: wrap(u),
            b: wrap(v - u),
            c: wrap(w - u),
        }
    }

    pub fn angles(&self) -> [f64; 3] {
        let u = self.a;
        [u, u + self.b, u + self.c]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerProductBound {
    /// Certified lower bound on `r`.
    pub omega: f64,
    pub witness: Option<Witness>,
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// True iff all four `r cos(·)` values lie in their intervals widened by
/// `slack`.
pub fn feasible_at(r: f64, u: f64, v: f64, w: f64, system: &PhaseSystem, slack: f64) -> bool {
    let angles = [u, v, w, v + w - u];
    angles
        .iter()
        .zip(&system.intervals)
        .all(|(&phi, iv)| iv.contains(r * phi.cos(), slack))
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Arc {
    lo: f64,
    hi: f64,
}

/// Angles `φ` (mod 2π) with `cos φ ∈ [c_lo, c_hi]`: `±[acos c_hi, acos c_lo]`.
fn cos_preimage(c_lo: f64, c_hi: f64) -> [Arc; 2] {
    let near = c_hi.clamp(-1.0, 1.0).acos();
    let far = c_lo.clamp(-1.0, 1.0).acos();
    [
        Arc { lo: near, hi: far },
        Arc {
            lo: -far,
            hi: -near,
        },
    ]
}

/// Range of `cos φ` such that `r cos φ ∈ [lo, hi]` for some `r ∈ [r1, r2]`.
fn cos_range(lo: f64, hi: f64, r1: f64, r2: f64) -> Option<(f64, f64)> {
    if r2 <= 0.0 {
        return (lo <= 0.0 && 0.0 <= hi).then_some((-1.0, 1.0));
    }
    let c_lo = if lo > 0.0 {
        lo / r2
    } else if r1 > 0.0 {
        lo / r1
    } else {
        -1.0
    };
    let c_hi = if hi < 0.0 {
        hi / r2
    } else if r1 > 0.0 {
        hi / r1
    } else {
        1.0
    };
    let (c_lo, c_hi) = (c_lo.max(-1.0), c_hi.min(1.0));
    (c_lo <= c_hi).then_some((c_lo, c_hi))
}

/// Point in `arc ∩ (target + 2πk)` for some `k`, if any.
fn meet(arc: Arc, target: Arc) -> Option<f64> {
    const TOL: f64 = 1e-12;
    if arc.hi - arc.lo >= TAU {
        return Some(target.lo);
    }
    let k_min = ((arc.lo - target.hi) / TAU).floor() as i64;
    let k_max = ((arc.hi - target.lo) / TAU).ceil() as i64;
    (k_min..=k_max).find_map(|k| {
        let shift = k as f64 * TAU;
        let lo = arc.lo.max(target.lo + shift);
        let hi = arc.hi.min(target.hi + shift);
        (lo <= hi + TOL).then_some(0.5 * (lo + hi.max(lo)))
    })
}

/// Exact check whether some `(u, v, w)` satisfies the relaxed system for
/// `r ∈ [r1, r2]` (each constraint may pick its own `r`). Returns angles
/// when `r1 == r2`, which makes the check exact.
fn cell_feasible(system: &PhaseSystem, r1: f64, r2: f64, slack: f64) -> Option<(f64, f64, f64)> {
    let mut sets = [[Arc { lo: 0.0, hi: 0.0 }; 2]; 4];
    for (set, iv) in sets.iter_mut().zip(&system.intervals) {
        let (c_lo, c_hi) = cos_range(iv.lower - slack, iv.upper + slack, r1, r2)?;
        *set = cos_preimage(c_lo, c_hi);
    }
    let [s1, s2, s3, s4] = sets;
    for a1 in s1 {
        for a2 in s2 {
            for a3 in s3 {
                // v + w − u ranges over this arc.
                let sum = Arc {
                    lo: a2.lo + a3.lo - a1.hi,
                    hi: a2.hi + a3.hi - a1.lo,
                };
                for a4 in s4 {
                    if let Some(target) = meet(sum, a4) {
                        // Walk u down and v, w up in proportion to hit `target`.
                        let span = sum.hi - sum.lo;
                        let t = if span > 0.0 {
                            ((target - sum.lo) / span).clamp(0.0, 1.0)
                        } else {
                            0.0
                        };
                        let u = a1.hi - t * (a1.hi - a1.lo);
                        let v = a2.lo + t * (a2.hi - a2.lo);
                        let w = a3.lo + t * (a3.hi - a3.lo);
                        return Some((u, v, w));
                    }
                }
            }
        }
    }
    None
}

fn r_grid(step: f64) -> Vec<f64> {
    let step = step.clamp(1e-9, 1.0);
    let n = (1.0 / step).ceil() as usize;
    (0..=n).map(|k| (k as f64 * step).min(1.0)).collect()
}

/// Searches for a witness at or above `from`, refining inside each cell.
fn find_witness(system: &PhaseSystem, grid: &[f64], from: usize, slack: f64) -> Option<Witness> {
    const SUBDIVISIONS: usize = 16;
    for k in from..grid.len() {
        let lo = if k == 0 { 0.0 } else { grid[k - 1] };
        let hi = grid[k];
        for s in 0..=SUBDIVISIONS {
            let r = lo + (hi - lo) * s as f64 / SUBDIVISIONS as f64;
            if let Some((u, v, w)) = cell_feasible(system, r, r, slack) {
                if feasible_at(r, u, v, w, system, slack + 1e-12) {
                    return Some(Witness::from_uvw(r, u, v, w));
                }
            }
        }
    }
    None
}

/// Certified lower bound on `r` for the full four-pair system.
pub fn min_modulus_rfi(
    system: &PhaseSystem,
    settings: &ModulusSettings,
) -> Result<InnerProductBound> {
    match settings.solver {
        PhaseSolver::Arcs => min_modulus_arcs(system, settings.r_step),
        PhaseSolver::Grid => min_modulus_grid(system, settings.r_step, settings.angle_step_deg),
    }
}

/// Sweeps `r` upward in cells `[r_{k-1}, r_k]` and returns the lower end of
/// the first cell whose relaxed system is feasible. No smaller `r` can be
/// feasible because every earlier cell was excluded exactly.
pub fn min_modulus_arcs(system: &PhaseSystem, r_step: f64) -> Result<InnerProductBound> {
    let grid = r_grid(r_step);
    let slack = EPS;
    if cell_feasible(system, 0.0, 0.0, slack).is_some() {
        return Ok(InnerProductBound {
            omega: 0.0,
            witness: Some(Witness::from_uvw(0.0, 0.0, 0.0, 0.0)),
        });
    }
    for k in 1..grid.len() {
        if cell_feasible(system, grid[k - 1], grid[k], slack).is_some() {
            return Ok(InnerProductBound {
                omega: grid[k - 1],
                witness: find_witness(system, &grid, k, slack),
            });
        }
    }
    Err(Error::ContradictoryIntervals)
}

/// Grid search over `u, v, w` with Lipschitz slack: `r·Δ/2` on the three
/// direct angles, `3r·Δ/2` on the composite, plus `r_step` for the gap
/// between `r` samples. Reports `first feasible r − r_step`.
pub fn min_modulus_grid(
    system: &PhaseSystem,
    r_step: f64,
    angle_step_deg: f64,
) -> Result<InnerProductBound> {
    let n = (360.0 / angle_step_deg.clamp(1e-3, 360.0)).round().max(1.0) as usize;
    let step = TAU / n as f64;
    let grid = r_grid(r_step);
    let angle = |i: usize| i as f64 * step;
    for (k, &r) in grid.iter().enumerate() {
        let r_slack = if k == 0 { 0.0 } else { r_step };
        let direct = r * step / 2.0 + r_slack + EPS;
        let composite = 3.0 * r * step / 2.0 + r_slack + EPS;
        let allowed = |iv: &PhaseInterval, slack: f64| -> Vec<bool> {
            (0..n)
                .map(|i| iv.contains(r * angle(i).cos(), slack))
                .collect()
        };
        let [i1, i2, i3, i4] = system.intervals;
        let (s1, s2, s3, s4) = (
            allowed(&i1, direct),
            allowed(&i2, direct),
            allowed(&i3, direct),
            allowed(&i4, composite),
        );
        // Reachable (v + w) mod n.
        let mut sums = vec![false; n];
        for v in (0..n).filter(|&v| s2[v]) {
            for w in (0..n).filter(|&w| s3[w]) {
                sums[(v + w) % n] = true;
            }
        }
        let hit = (0..n).filter(|&u| s1[u]).find_map(|u| {
            (0..n)
                .find(|&d| sums[d] && s4[(d + n - u) % n])
                .map(|d| (u, d))
        });
        if let Some((u, d)) = hit {
            let (v, w) = (0..n)
                .filter(|&v| s2[v])
                .find_map(|v| {
                    let w = (d + n - v) % n;
                    s3[w].then_some((v, w))
                })
                .expect("sum was reachable");
            let omega = (r - r_step).max(0.0);
            return Ok(InnerProductBound {
                omega: if k == 0 { 0.0 } else { omega },
                witness: Some(Witness::from_uvw(r, angle(u), angle(v), angle(w))),
            });
        }
    }
    Err(Error::ContradictoryIntervals)
}

/// Single-pair bound: `r ≥ |Re[e^{iΦ}⟨Γ00|Γ11⟩]|`, so any interval that
/// excludes zero bounds `r` by its distance from zero.
pub fn min_modulus_baseline(interval22: &PhaseInterval) -> InnerProductBound {
    let omega = 0.0f64
        .max(interval22.lower)
        .max(-interval22.upper)
        .clamp(0.0, 1.0);
    let a = if interval22.upper < 0.0 { PI } else { 0.0 };
    InnerProductBound {
        omega,
        witness: Some(Witness {
            r: omega,
            a,
            b: 0.0,
            c: 0.0,
        }),
    }
}
