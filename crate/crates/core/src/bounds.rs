//! Bounds on `Re[e^{iΦ_kl}⟨Γ00|Γ11⟩]` for one checking pair `(k, l)`.
//!
//! Writing the checking-pair state as a superposition of the four encoding
//! pairs and isolating the `(0,0)` and `(1,1)` terms, the triangle inequality
//! and its reverse bound the norm of
//! `√p00 a0 b0 |Γ00⟩ + √p11 a1 b1 e^{iΦ} |Γ11⟩` by
//! `√p_kl ± (√p01 a0 b1 + √p10 a1 b0)`. Expanding the squared norm gives the
//! point bounds below. They are then extremized over every pair of
//! amplitude points compatible with the observed table.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{
    box_may_be_feasible, consistency_check_with, is_feasible_with, FeasibleSet, SideRowSpec,
    SideSets,
};
use crate::interval::Interval;
use crate::settings::OptimizerSettings;
use crate::table::{CheckingPair, CoefficientPoint, PhaseInterval, ProbabilityTable, A_MAX};

/// Below this normalizer the bounds carry no information.
pub const EPS_N: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairBoundInput {
    pub p_kl: f64,
    pub p00: f64,
    pub p11: f64,
    pub p01: f64,
    pub p10: f64,
    /// Alice's amplitudes for checking state `k`.
    pub a: CoefficientPoint,
    /// Bob's amplitudes for checking state `l`.
    pub b: CoefficientPoint,
}

impl PairBoundInput {
    pub fn from_table(
        table: &ProbabilityTable,
        pair: CheckingPair,
        a: CoefficientPoint,
        b: CoefficientPoint,
    ) -> Self {
        Self {
            p_kl: table.get(pair.alice, pair.bob),
            p00: table.get(0, 0),
            p11: table.get(1, 1),
            p01: table.get(0, 1),
            p10: table.get(1, 0),
            a,
            b,
        }
    }

    fn constants(&self) -> PairConstants {
        PairConstants::new(self.p_kl, self.p00, self.p11, self.p01, self.p10)
    }
}

/// Unclamped upper formula, `None` when the normalizer is degenerate.
pub fn upper_bound_raw(input: &PairBoundInput) -> Option<f64> {
    input.constants().upper_raw(input.a, input.b)
}

/// Unclamped lower formula, `None` when the normalizer is degenerate.
pub fn lower_bound_raw(input: &PairBoundInput) -> Option<f64> {
    input.constants().lower_raw(input.a, input.b)
}

/// Triangle-inequality upper bound clamped to `[-1, 1]`; `+1` if degenerate.
pub fn upper_bound_at(input: &PairBoundInput) -> f64 {
    upper_bound_raw(input).map_or(1.0, clamp_unit)
}

/// Reverse-triangle lower bound clamped to `[-1, 1]`; `-1` if degenerate.
pub fn lower_bound_at(input: &PairBoundInput) -> f64 {
    lower_bound_raw(input).map_or(-1.0, clamp_unit)
}

// |Re⟨Γ00|Γ11⟩| <= 1 for normalized states, so clamping on both sides keeps
// each bound valid and preserves lower <= upper.
fn clamp_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

#[derive(Clone, Copy, Debug)]
struct PairConstants {
    s: f64,
    alpha: f64,
    beta: f64,
    p00: f64,
    p11: f64,
    root: f64,
}

impl PairConstants {
    fn new(p_kl: f64, p00: f64, p11: f64, p01: f64, p10: f64) -> Self {
        Self {
            s: p_kl.max(0.0).sqrt(),
            alpha: p01.max(0.0).sqrt(),
            beta: p10.max(0.0).sqrt(),
            p00,
            p11,
            root: (p00 * p11).max(0.0).sqrt(),
        }
    }

    fn normalizer(&self, a: CoefficientPoint, b: CoefficientPoint) -> f64 {
        2.0 * self.root * a.a0 * a.a1 * b.a0 * b.a1
    }

    fn diagonal(&self, a: CoefficientPoint, b: CoefficientPoint) -> f64 {
        let x = a.a0 * b.a0;
        let y = a.a1 * b.a1;
        self.p00 * x * x + self.p11 * y * y
    }

    fn cross(&self, a: CoefficientPoint, b: CoefficientPoint) -> f64 {
        self.alpha * a.a0 * b.a1 + self.beta * a.a1 * b.a0
    }

    fn upper_raw(&self, a: CoefficientPoint, b: CoefficientPoint) -> Option<f64> {
        let n = self.normalizer(a, b);
        if n <= EPS_N {
            return None;
        }
        let t = self.s + self.cross(a, b);
        Some((t * t - self.diagonal(a, b)) / n)
    }

    fn lower_raw(&self, a: CoefficientPoint, b: CoefficientPoint) -> Option<f64> {
        let n = self.normalizer(a, b);
        if n <= EPS_N {
            return None;
        }
        let t = (self.s - self.cross(a, b)).max(0.0);
        Some((t * t - self.diagonal(a, b)) / n)
    }

    /// Upper end of an enclosure of the clamped upper bound over a box.
    fn upper_over(&self, b: &Box4) -> f64 {
        let (x, y, u, v) = b.products();
        let n = (x * y).scale(2.0 * self.root);
        if n.lo <= EPS_N {
            return 1.0;
        }
        let t = u.scale(self.alpha) + v.scale(self.beta) + self.s;
        let num = t.sqr() - x.sqr().scale(self.p00) - y.sqr().scale(self.p11);
        let hi = if num.hi >= 0.0 {
            num.hi / n.lo
        } else {
            num.hi / n.hi
        };
        let (lead, cross, diag) = self.ratio_form(b);
        let alt = (lead.hi + cross.hi).powi(2) - diag.lo;
        clamp_unit(hi.min(alt))
    }

    /// Enclosures of the three terms in
    /// `bound = (lead ± cross)² − diag` where, with `m = a0 a1 b0 b1`,
    /// `ρ = (a0 b1) / (a1 b0)` and `q = (a0 b0) / (a1 b1)`:
    /// `lead = s / √(2 R m)`, `cross = (α √ρ + β / √ρ) / √(2R)` and
    /// `diag = (p00 q + p11 / q) / (2R)`. Each term is monotone or convex in a
    /// single quantity, so the enclosures are exact. Requires positive boxes.
    fn ratio_form(&self, b: &Box4) -> (Interval, Interval, Interval) {
        let [a0, a1, b0, b1] = b.0;
        let two_r = 2.0 * self.root;
        let m = a0 * a1 * b0 * b1;
        let lead = Interval::new(
            self.s / (two_r * m.hi).sqrt(),
            self.s / (two_r * m.lo).sqrt(),
        );
        let rho = Interval::new(
            (a0.lo * b1.lo) / (a1.hi * b0.hi),
            (a0.hi * b1.hi) / (a1.lo * b0.lo),
        );
        let w = Interval::new(rho.lo.sqrt(), rho.hi.sqrt());
        let cross = convex_sum(self.alpha, self.beta, w).scale(1.0 / two_r.sqrt());
        let q = Interval::new(
            (a0.lo * b0.lo) / (a1.hi * b1.hi),
            (a0.hi * b0.hi) / (a1.lo * b1.lo),
        );
        let diag = convex_sum(self.p00, self.p11, q).scale(1.0 / two_r);
        (lead, cross, diag)
    }

    /// Lower end of an enclosure of the clamped lower bound over a box.
    fn lower_over(&self, b: &Box4) -> f64 {
        let (x, y, u, v) = b.products();
        let n = (x * y).scale(2.0 * self.root);
        if n.lo <= EPS_N {
            return -1.0;
        }
        let t = (u.scale(-self.alpha) + v.scale(-self.beta) + self.s).relu();
        let num = t.sqr() - x.sqr().scale(self.p00) - y.sqr().scale(self.p11);
        let lo = if num.lo <= 0.0 {
            num.lo / n.lo
        } else {
            num.lo / n.hi
        };
        let (lead, cross, diag) = self.ratio_form(b);
        let alt = (lead.lo - cross.hi).max(0.0).powi(2) - diag.hi;
        clamp_unit(lo.max(alt))
    }
}

/// Range of `c1 w + c2 / w` over `w`, for `c1, c2 ≥ 0` and `w.lo > 0`.
fn convex_sum(c1: f64, c2: f64, w: Interval) -> Interval {
    let f = |x: f64| c1 * x + c2 / x;
    let hi = f(w.lo).max(f(w.hi));
    let stationary = if c1 > 0.0 {
        (c2 / c1).sqrt()
    } else {
        f64::INFINITY
    };
    let lo = if w.contains(stationary) {
        2.0 * (c1 * c2).sqrt()
    } else {
        f(w.lo).min(f(w.hi))
    };
    Interval::new(lo.min(hi), hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upper,
    Lower,
}

/// Box in `(a0, a1, b0, b1)`.
#[derive(Clone, Copy, Debug)]
struct Box4([Interval; 4]);

impl Box4 {
    fn products(&self) -> (Interval, Interval, Interval, Interval) {
        let [a0, a1, b0, b1] = self.0;
        (a0 * b0, a1 * b1, a0 * b1, a1 * b0)
    }

    fn widest(&self) -> (usize, f64) {
        self.0
            .iter()
            .enumerate()
            .map(|(i, x)| (i, x.width()))
            .fold(
                (0, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
    }

    fn center(&self) -> [f64; 4] {
        self.0.map(|x| x.mid())
    }
}

struct Node {
    bound: f64,
    bx: Box4,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound.total_cmp(&other.bound) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound)
    }
}

/// Result of one extremization (maximum of the upper bound or minimum of
/// the lower bound), reported in the bound's own sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub direction: Direction,
    /// Certified extremum, clamped to `[-1, 1]`.
    pub bound: f64,
    /// Best value attained at a strictly feasible point, if one was found.
    pub attained: Option<f64>,
    /// Unclamped formula value at the attaining point.
    pub raw_attained: Option<f64>,
    pub alice: Option<CoefficientPoint>,
    pub bob: Option<CoefficientPoint>,
    pub boxes: usize,
    /// True when the box budget stopped the search before convergence.
    pub budget_exhausted: bool,
    /// True when the attaining point sits on the amplitude cap.
    pub on_cap: bool,
}

impl Extremum {
    /// Distance between the certified bound and the attained value.
    pub fn gap(&self) -> Option<f64> {
        self.attained.map(|v| (self.bound - v).abs())
    }
}

struct Problem<'a> {
    consts: PairConstants,
    alice: &'a SideRowSpec,
    bob: &'a SideRowSpec,
    direction: Direction,
    settings: &'a OptimizerSettings,
}

impl Problem<'_> {
    /// Objective in maximization form.
    fn value(&self, p: [f64; 4]) -> Option<f64> {
        let (a, b) = split(p);
        if !is_feasible_with(a, self.alice, self.settings.eps)
            || !is_feasible_with(b, self.bob, self.settings.eps)
        {
            return None;
        }
        Some(match self.direction {
            Direction::Upper => self.consts.upper_raw(a, b).map_or(1.0, clamp_unit),
            Direction::Lower => -self.consts.lower_raw(a, b).map_or(-1.0, clamp_unit),
        })
    }

    fn raw(&self, p: [f64; 4]) -> Option<f64> {
        let (a, b) = split(p);
        match self.direction {
            Direction::Upper => self.consts.upper_raw(a, b),
            Direction::Lower => self.consts.lower_raw(a, b),
        }
    }

    fn box_bound(&self, bx: &Box4) -> Option<f64> {
        let [a0, a1, b0, b1] = bx.0;
        let eps = self.settings.eps;
        if !box_may_be_feasible(a0, a1, self.alice, eps)
            || !box_may_be_feasible(b0, b1, self.bob, eps)
        {
            return None;
        }
        Some(match self.direction {
            Direction::Upper => self.consts.upper_over(bx),
            Direction::Lower => -self.consts.lower_over(bx),
        })
    }

    fn pattern_search(&self, start: [f64; 4], start_value: f64, step: f64) -> ([f64; 4], f64) {
        let (mut best, mut best_value, mut step) = (start, start_value, step);
        for _ in 0..self.settings.pattern_iterations {
            let mut improved = false;
            for dim in 0..4 {
                for sign in [1.0, -1.0] {
                    let mut trial = best;
                    trial[dim] = (trial[dim] + sign * step).clamp(0.0, A_MAX);
                    if let Some(v) = self.value(trial) {
                        if v > best_value {
                            best = trial;
                            best_value = v;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (best, best_value)
    }
}

fn split(p: [f64; 4]) -> (CoefficientPoint, CoefficientPoint) {
    (
        CoefficientPoint::new(p[0], p[1]),
        CoefficientPoint::new(p[2], p[3]),
    )
}

/// Evenly spaced strictly feasible grid points, at most `limit` of them.
fn seeds(set: &FeasibleSet, spec: &SideRowSpec, eps: f64, limit: usize) -> Vec<CoefficientPoint> {
    let strict: Vec<_> = set
        .points
        .iter()
        .copied()
        .filter(|&p| is_feasible_with(p, spec, eps))
        .collect();
    let stride = strict.len().div_ceil(limit).max(1);
    strict.into_iter().step_by(stride).collect()
}

const SEEDS_PER_SIDE: usize = 48;

fn extremize(
    table: &ProbabilityTable,
    pair: CheckingPair,
    alice: (&SideRowSpec, &FeasibleSet),
    bob: (&SideRowSpec, &FeasibleSet),
    direction: Direction,
    settings: &OptimizerSettings,
) -> Result<Extremum> {
    let consts = PairConstants::new(
        table.get(pair.alice, pair.bob),
        table.get(0, 0),
        table.get(1, 1),
        table.get(0, 1),
        table.get(1, 0),
    );
    let problem = Problem {
        consts,
        alice: alice.0,
        bob: bob.0,
        direction,
        settings,
    };

    // Incumbent: best strictly feasible grid pair, polished by pattern search.
    let mut incumbent = f64::NEG_INFINITY;
    let mut arg: Option<[f64; 4]> = None;
    let sa = seeds(alice.1, alice.0, settings.eps, SEEDS_PER_SIDE);
    let sb = seeds(bob.1, bob.0, settings.eps, SEEDS_PER_SIDE);
    for a in &sa {
        for b in &sb {
            let p = [a.a0, a.a1, b.a0, b.a1];
            if let Some(v) = problem.value(p) {
                if v > incumbent {
                    incumbent = v;
                    arg = Some(p);
                }
            }
        }
    }
    if let Some(p) = arg {
        let (q, v) = problem.pattern_search(p, incumbent, alice.1.spacing);
        arg = Some(q);
        incumbent = v;
    }

    let root = Box4([Interval::new(0.0, A_MAX); 4]);
    let mut heap = BinaryHeap::new();
    if let Some(bound) = problem.box_bound(&root) {
        heap.push(Node { bound, bx: root });
    }
    let mut finals = f64::NEG_INFINITY;
    let mut boxes = 0usize;
    let mut budget_exhausted = false;
    let mut frontier = f64::NEG_INFINITY;

    while let Some(node) = heap.pop() {
        if node.bound <= incumbent + settings.tolerance {
            frontier = node.bound;
            break;
        }
        if boxes >= settings.max_boxes {
            budget_exhausted = true;
            frontier = node.bound;
            break;
        }
        boxes += 1;
        let (dim, width) = node.bx.widest();
        if width < settings.min_width {
            finals = finals.max(node.bound);
            continue;
        }
        let (lo, hi) = node.bx.0[dim].split();
        for half in [lo, hi] {
            let mut child = node.bx;
            child.0[dim] = half;
            let Some(bound) = problem.box_bound(&child) else {
                continue;
            };
            let c = child.center();
            if let Some(v) = problem.value(c) {
                if v > incumbent {
                    incumbent = v;
                    arg = Some(c);
                }
            }
            if bound > incumbent {
                heap.push(Node { bound, bx: child });
            }
        }
    }

    let best = incumbent.max(finals).max(frontier);
    if best == f64::NEG_INFINITY {
        return Err(Error::Inconsistent(vec![format!(
            "pair {pair}: no amplitude pair survives refinement"
        )]));
    }
    let sign = match direction {
        Direction::Upper => 1.0,
        Direction::Lower => -1.0,
    };
    let (a, b) = arg.map(split).unzip();
    let near_cap = |p: CoefficientPoint| p.a0.max(p.a1) >= A_MAX - alice.1.spacing;
    Ok(Extremum {
        direction,
        bound: (sign * best).clamp(-1.0, 1.0),
        attained: arg.map(|_| sign * incumbent),
        raw_attained: arg.and_then(|p| problem.raw(p)),
        alice: a,
        bob: b,
        boxes,
        budget_exhausted,
        on_cap: a.is_some_and(near_cap) || b.is_some_and(near_cap),
    })
}

/// Conservative interval for one pair plus the optimizer evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairInterval {
    pub pair: CheckingPair,
    pub interval: PhaseInterval,
    pub upper: Extremum,
    pub lower: Extremum,
}

/// Certified `[min lower_bound_at, max upper_bound_at]` over all amplitude
/// points consistent with `table`.
pub fn conservative_interval(
    table: &ProbabilityTable,
    pair: CheckingPair,
    settings: &OptimizerSettings,
) -> Result<PairInterval> {
    let sets = consistency_check_with(table, settings.grid_n, settings.eps)?;
    conservative_interval_with(table, pair, &sets, settings)
}

/// As [`conservative_interval`], reusing precomputed feasible sets.
pub fn conservative_interval_with(
    table: &ProbabilityTable,
    pair: CheckingPair,
    sets: &SideSets,
    settings: &OptimizerSettings,
) -> Result<PairInterval> {
    let alice_spec = SideRowSpec::alice(table, pair.alice);
    let bob_spec = SideRowSpec::bob(table, pair.bob);
    let alice = (&alice_spec, &sets.alice[pair.alice - 2]);
    let bob = (&bob_spec, &sets.bob[pair.bob - 2]);
    let upper = extremize(table, pair, alice, bob, Direction::Upper, settings)?;
    let lower = extremize(table, pair, alice, bob, Direction::Lower, settings)?;
    Ok(PairInterval {
        pair,
        interval: PhaseInterval::clamped(lower.bound, upper.bound),
        upper,
        lower,
    })
}
