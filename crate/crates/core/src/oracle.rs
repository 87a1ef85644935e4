//! Explicit attack instances used as ground truth.
//!
//! Eve's ancilla, unitary and announcement are collapsed into a single
//! outcome-1 operator `K` on the joint two-qubit space, with
//! `√p_ij |Γ_ij⟩ = K |φ_i⟩|φ'_j⟩`. Only `K†K ≤ 1` matters for the
//! statistics, so a contraction is enough.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};

use nalgebra::{Complex, Matrix4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::{is_feasible, SideRowSpec};
use crate::rate::analyze;
use crate::settings::Settings;
use crate::table::{CheckingPair, CoefficientPoint, Mode, ProbabilityTable};

pub type C64 = Complex<f64>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackConfig {
    /// Largest `|⟨φ0|φ1⟩|` drawn for either side's encoding states.
    pub max_overlap: f64,
    /// `K` is divided by its largest singular value times a factor drawn
    /// uniformly from `[1, max_shrink]`.
    pub max_shrink: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            max_overlap: 0.8,
            max_shrink: 2.0,
        }
    }
}

/// The states one side sends: two encoding states and two checking states
/// `|φ_k⟩ = a0|φ0⟩ + a1 e^{iθ_k}|φ1⟩` (up to a global phase).
#[derive(Clone, Debug, PartialEq)]
pub struct SideStates {
    pub states: [Vector2<C64>; 4],
    /// Amplitudes for checking states 2 and 3.
    pub coefficients: [CoefficientPoint; 2],
    /// Relative phases `θ_2, θ_3`.
    pub phases: [f64; 2],
}

impl SideStates {
    /// Builds checking states from encoding states and `(a0, a1, θ)`. The
    /// amplitudes must already normalize the superposition.
    fn new(e0: Vector2<C64>, e1: Vector2<C64>, checks: [(CoefficientPoint, f64, C64); 2]) -> Self {
        let make = |(p, theta, global): (CoefficientPoint, f64, C64)| {
            (e0 * c(p.a0, 0.0) + e1 * (phase(theta) * p.a1)) * global
        };
        Self {
            states: [e0, e1, make(checks[0]), make(checks[1])],
            coefficients: [checks[0].0, checks[1].0],
            phases: [checks[0].1, checks[1].1],
        }
    }

    fn random(rng: &mut ChaCha8Rng, max_overlap: f64) -> Self {
        let s = rng.random_range(0.0..=max_overlap);
        let eta = rng.random_range(0.0..TAU);
        let e0 = Vector2::new(c(1.0, 0.0), c(0.0, 0.0));
        let e1 = Vector2::new(phase(eta) * s, c((1.0 - s * s).sqrt(), 0.0));
        let overlap = e0.dotc(&e1);
        let mut check = || {
            let chi = rng.random_range(0.05..(FRAC_PI_2 - 0.05));
            let theta = rng.random_range(0.0..TAU);
            let (x0, x1) = (chi.cos(), chi.sin());
            // ‖x0 e0 + x1 e^{iθ} e1‖² = 1 + 2 x0 x1 Re[e^{iθ}⟨e0|e1⟩]
            let norm = (1.0 + 2.0 * x0 * x1 * (phase(theta) * overlap).re).sqrt();
            (
                CoefficientPoint::new(x0 / norm, x1 / norm),
                theta,
                c(1.0, 0.0),
            )
        };
        let checks = [check(), check()];
        Self::new(e0, e1, checks)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackInstance {
    pub alice: SideStates,
    pub bob: SideStates,
    /// Outcome-1 operator on `alice ⊗ bob`.
    pub kraus: Matrix4<C64>,
}

fn kron(a: &Vector2<C64>, b: &Vector2<C64>) -> Vector4<C64> {
    Vector4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
}

impl AttackInstance {
    /// `K |φ_i⟩|φ'_j⟩`, i.e. `√p_ij |Γ_ij⟩`.
    pub fn output(&self, i: usize, j: usize) -> Vector4<C64> {
        self.kraus * kron(&self.alice.states[i], &self.bob.states[j])
    }

    /// The noiseless reference configuration with Bob's qubit rotated by
    /// `theta` about z and `K` the projector onto the singlet.
    pub fn ideal(theta: f64) -> Self {
        let zero = Vector2::new(c(1.0, 0.0), c(0.0, 0.0));
        let one = Vector2::new(c(0.0, 0.0), c(1.0, 0.0));
        let h = CoefficientPoint::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        // Alice: |0>, |1>, |Φ=0>, |Φ=π/2>.
        let alice = SideStates::new(
            zero,
            one,
            [(h, 0.0, c(1.0, 0.0)), (h, FRAC_PI_2, c(1.0, 0.0))],
        );
        // Bob: |1>, |0>, |Φ=π> = -(|1> - |0>)/√2, |Φ=3π/2> = -i(|1> + i|0>)/√2.
        let bob = SideStates::new(
            one,
            zero,
            [(h, PI, c(-1.0, 0.0)), (h, FRAC_PI_2, c(0.0, -1.0))],
        );
        let rot = Matrix4::from_diagonal(&Vector4::new(
            c(1.0, 0.0),
            phase(theta),
            c(1.0, 0.0),
            phase(theta),
        ));
        let singlet = Vector4::new(
            c(0.0, 0.0),
            c(FRAC_1_SQRT_2, 0.0),
            c(-FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
        );
        let projector = singlet * singlet.adjoint();
        Self {
            alice,
            bob,
            kraus: projector * rot,
        }
    }

    pub fn with_kraus(mut self, kraus: Matrix4<C64>) -> Self {
        self.kraus = kraus;
        self
    }

    pub fn largest_singular_value(&self) -> f64 {
        self.kraus.singular_values().max()
    }

    /// Truth quantities `Re[e^{i(θ_k + θ'_l)} ⟨Γ00|Γ11⟩]` in composite order.
    pub fn true_phase_quantities(&self) -> Result<[f64; 4]> {
        let overlap = true_overlap(self)?;
        Ok(CheckingPair::ALL.map(|pair| {
            let phi = self.alice.phases[pair.alice - 2] + self.bob.phases[pair.bob - 2];
            (phase(phi) * overlap).re
        }))
    }
}

/// Samples encoding states, checking amplitudes and phases, and a random
/// contraction, all from ChaCha8 seeded with `seed`.
pub fn random_attack(seed: u64, config: &AttackConfig) -> AttackInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alice = SideStates::random(&mut rng, config.max_overlap);
    let bob = SideStates::random(&mut rng, config.max_overlap);
    let raw = Matrix4::from_fn(|_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let sigma = raw.singular_values().max();
    let shrink = rng.random_range(1.0..=config.max_shrink.max(1.0));
    AttackInstance {
        alice,
        bob,
        kraus: raw.unscale(sigma * shrink),
    }
}

/// The ideal attack at a random rotation with `strength` times a standard
/// complex Gaussian added to `K`, rescaled to a contraction when needed.
/// Keeps `⟨Γ00|Γ11⟩` large, so the modulus bound is exercised away from 0.
pub fn near_ideal_attack(seed: u64, strength: f64) -> AttackInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = rng.random_range(0.0..TAU);
    let ideal = AttackInstance::ideal(theta);
    let noise = Matrix4::from_fn(|_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let k = ideal.kraus + noise * c(strength, 0.0);
    let sigma = k.singular_values().max();
    ideal.with_kraus(if sigma > 1.0 { k.unscale(sigma) } else { k })
}

/// `p_ij = ‖K |φ_i⟩|φ'_j⟩‖²`.
pub fn induced_table(attack: &AttackInstance) -> ProbabilityTable {
    let rows = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| attack.output(i, j).norm_squared().min(1.0))
                .collect()
        })
        .collect();
    ProbabilityTable::from_rows(rows)
}

/// `⟨Γ00|Γ11⟩ = ⟨φ0φ'0|K†K|φ1φ'1⟩ / √(p00 p11)`.
pub fn true_overlap(attack: &AttackInstance) -> Result<C64> {
    let g00 = attack.output(0, 0);
    let g11 = attack.output(1, 1);
    let (p00, p11) = (g00.norm_squared(), g11.norm_squared());
    if p00 <= 0.0 || p11 <= 0.0 {
        return Err(Error::UndefinedOverlap);
    }
    Ok(g00.dotc(&g11) / (p00 * p11).sqrt())
}

/// Below this, `p00` or `p11` is treated as zero and the instance skipped.
pub const DEGENERATE_P: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SoundnessSummary {
    pub omega: f64,
    pub true_r: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SoundnessOutcome {
    Pass(SoundnessSummary),
    Degenerate(String),
    Violation(String),
}

/// Runs the full analysis on the induced table and checks every computed
/// bound against the instance's true values.
pub fn soundness_check(attack: &AttackInstance, settings: &Settings) -> SoundnessOutcome {
    let table = induced_table(attack);
    if table.get(0, 0) < DEGENERATE_P || table.get(1, 1) < DEGENERATE_P {
        return SoundnessOutcome::Degenerate("p00 or p11 vanishes".into());
    }
    let dump = || format!("instance: {attack:?}\ntable: {:?}", table.rows());
    let mut violations = Vec::new();

    for k in 0..2 {
        let a = attack.alice.coefficients[k];
        if !is_feasible(a, &SideRowSpec::alice(&table, k + 2)) {
            violations.push(format!(
                "Alice true amplitudes {a:?} for state {} infeasible",
                k + 2
            ));
        }
        let b = attack.bob.coefficients[k];
        if !is_feasible(b, &SideRowSpec::bob(&table, k + 2)) {
            violations.push(format!(
                "Bob true amplitudes {b:?} for state {} infeasible",
                k + 2
            ));
        }
    }

    let overlap = match true_overlap(attack) {
        Ok(o) => o,
        Err(e) => return SoundnessOutcome::Degenerate(e.to_string()),
    };
    let truth = attack
        .true_phase_quantities()
        .expect("overlap already computed");
    let [pa2, pa3] = attack.alice.phases;
    let [pb2, pb3] = attack.bob.phases;
    let identity = (pa2 + pb2) + (pa3 + pb3) - (pa2 + pb3) - (pa3 + pb2);
    if identity.abs() > 1e-9 {
        violations.push(format!("composite phase identity off by {identity}"));
    }

    let report = match analyze(&table, Mode::Rfi, settings) {
        Ok(r) => r,
        Err(e) => {
            violations.push(format!("analysis failed: {e}"));
            return SoundnessOutcome::Violation(format!("{}\n{}", violations.join("\n"), dump()));
        }
    };
    for (pair, (iv, t)) in CheckingPair::ALL
        .iter()
        .zip(report.intervals.iter().zip(truth))
    {
        let iv = iv.expect("rfi computes every pair");
        if !iv.contains(t, crate::table::EPS) {
            violations.push(format!("pair {pair}: true value {t} outside {iv:?}"));
        }
    }
    let r = overlap.norm();
    if r < report.omega - 1e-6 {
        violations.push(format!("true r = {r} below omega = {}", report.omega));
    }

    if violations.is_empty() {
        SoundnessOutcome::Pass(SoundnessSummary {
            omega: report.omega,
            true_r: r,
            rate: report.rate,
        })
    } else {
        SoundnessOutcome::Violation(format!("{}\n{}", violations.join("\n"), dump()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifySummary {
    pub passed: usize,
    pub degenerate: usize,
    pub violations: Vec<(u64, String)>,
    /// Per-seed outcome, in seed order.
    pub outcomes: Vec<(u64, SoundnessOutcome)>,
}

/// Checks seeds `first_seed .. first_seed + instances` in parallel.
pub fn verify_batch(
    instances: usize,
    first_seed: u64,
    config: &AttackConfig,
    settings: &Settings,
) -> VerifySummary {
    let outcomes: Vec<(u64, SoundnessOutcome)> = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let seed = first_seed.wrapping_add(i);
            (
                seed,
                soundness_check(&random_attack(seed, config), settings),
            )
        })
        .collect();
    let mut summary = VerifySummary::default();
    for (seed, o) in &outcomes {
        match o {
            SoundnessOutcome::Pass(_) => summary.passed += 1,
            SoundnessOutcome::Degenerate(_) => summary.degenerate += 1,
            SoundnessOutcome::Violation(msg) => summary.violations.push((*seed, msg.clone())),
        }
    }
    summary.outcomes = outcomes;
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ideal_table, ChannelParams};
    use crate::feasibility::consistency_check;
    use crate::table::{validate_table, Mode};

    #[test]
    fn ideal_instance_matches_channel_table() {
        for theta in [0.0, 0.3, FRAC_PI_2, 2.0, PI, 5.0] {
            let induced = induced_table(&AttackInstance::ideal(theta));
            let model = ideal_table(ChannelParams::new(0.0, theta).unwrap()).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert!(
                        (induced.get(i, j) - model.get(i, j)).abs() < 1e-12,
                        "theta {theta} ({i},{j}): {} vs {}",
                        induced.get(i, j),
                        model.get(i, j)
                    );
                }
            }
        }
        let t = induced_table(&AttackInstance::ideal(0.0));
        assert!((t.get(0, 0) - 0.5).abs() < 1e-15);
        assert!(t.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn ideal_overlap_has_unit_modulus() {
        let o = true_overlap(&AttackInstance::ideal(0.7)).unwrap();
        assert!((o.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_truth_matches_noiseless_cosines() {
        let t = 0.4;
        let q = AttackInstance::ideal(t).true_phase_quantities().unwrap();
        let expect = [
            t.cos(),
            (FRAC_PI_2 + t).cos(),
            (FRAC_PI_2 - t).cos(),
            t.cos(),
        ];
        for (a, b) in q.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{q:?} vs {expect:?}");
        }
    }

    #[test]
    fn identity_kraus_gives_unit_table() {
        let inst = AttackInstance::ideal(0.0).with_kraus(Matrix4::identity());
        let t = induced_table(&inst);
        for row in t.rows() {
            for &p in row {
                assert!((p - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_kraus_is_degenerate() {
        let inst = AttackInstance::ideal(0.0).with_kraus(Matrix4::zeros());
        assert!(induced_table(&inst)
            .rows()
            .iter()
            .flatten()
            .all(|&p| p == 0.0));
        assert_eq!(true_overlap(&inst), Err(Error::UndefinedOverlap));
        assert!(matches!(
            soundness_check(&inst, &Settings::default()),
            SoundnessOutcome::Degenerate(_)
        ));
    }

    #[test]
    fn orthogonal_images_have_zero_overlap() {
        // K maps |φ0φ'0> and |φ1φ'1> (here |01> and |10>) to orthogonal vectors.
        let mut k = Matrix4::zeros();
        k[(0, 1)] = c(1.0, 0.0);
        k[(3, 2)] = c(1.0, 0.0);
        let inst = AttackInstance::ideal(0.0).with_kraus(k);
        assert!(true_overlap(&inst).unwrap().norm() < 1e-15);
    }

    #[test]
    fn random_instances_are_well_formed() {
        let config = AttackConfig::default();
        for seed in 0..100 {
            let inst = random_attack(seed, &config);
            assert!(inst.largest_singular_value() <= 1.0 + 1e-12);
            for side in [&inst.alice, &inst.bob] {
                for s in &side.states {
                    assert!((s.norm() - 1.0).abs() < 1e-12);
                }
            }
            let t = induced_table(&inst);
            assert!(validate_table(&t, Mode::Rfi).is_empty());
            assert!(consistency_check(&t, 301).is_ok(), "seed {seed}");
            assert!(true_overlap(&inst).unwrap().norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn pair_states_decompose_over_encoding_pairs() {
        // √p_kl|Γ_kl> = Σ_mn a_m b_n e^{i(θ_m + θ'_n)} √p_mn|Γ_mn> (global
        // phases are 1 for random instances).
        let config = AttackConfig::default();
        for seed in 0..50 {
            let inst = random_attack(seed, &config);
            for pair in CheckingPair::ALL {
                let (ka, kb) = (pair.alice - 2, pair.bob - 2);
                let a = inst.alice.coefficients[ka];
                let b = inst.bob.coefficients[kb];
                let (ta, tb) = (inst.alice.phases[ka], inst.bob.phases[kb]);
                let amp_a = [c(a.a0, 0.0), phase(ta) * a.a1];
                let amp_b = [c(b.a0, 0.0), phase(tb) * b.a1];
                let mut sum = Vector4::zeros();
                for (m, x) in amp_a.iter().enumerate() {
                    for (n, y) in amp_b.iter().enumerate() {
                        sum += inst.output(m, n) * (x * y);
                    }
                }
                let diff = (inst.output(pair.alice, pair.bob) - sum).norm();
                assert!(diff < 1e-10, "seed {seed} pair {pair}: {diff}");
            }
        }
    }

    #[test]
    fn ideal_instance_is_sound_with_unit_modulus() {
        match soundness_check(
            &AttackInstance::ideal(std::f64::consts::FRAC_PI_4),
            &Settings::default(),
        ) {
            SoundnessOutcome::Pass(s) => assert!(s.omega >= 0.997, "{s:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn near_ideal_attacks_are_sound_with_large_modulus() {
        let settings = Settings::default();
        let outcomes: Vec<SoundnessOutcome> = (0..200)
            .into_par_iter()
            .map(|seed| soundness_check(&near_ideal_attack(seed, 0.02), &settings))
            .collect();
        let mut informative = 0;
        for (seed, o) in outcomes.iter().enumerate() {
            match o {
                SoundnessOutcome::Pass(s) => informative += usize::from(s.omega > 0.5),
                other => panic!("seed {seed}: {other:?}"),
            }
        }
        assert!(
            informative >= 100,
            "only {informative} instances with omega > 0.5"
        );
    }

    #[test]
    fn golden_seed_seven() {
        let inst = random_attack(7, &AttackConfig::default());
        let t = induced_table(&inst);
        let o = true_overlap(&inst).unwrap();
        let golden = golden::SEED7_TABLE;
        for (i, row) in golden.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                assert!((t.get(i, j) - g).abs() < 1e-12, "{:?}", t.rows());
            }
        }
        assert!((o.re - golden::SEED7_OVERLAP.0).abs() < 1e-12, "{o}");
        assert!((o.im - golden::SEED7_OVERLAP.1).abs() < 1e-12, "{o}");
    }

    mod golden {
        pub const SEED7_TABLE: [[f64; 4]; 4] = [
            [
                0.14587333772603694,
                0.21558695508243678,
                0.2212470674955661,
                0.111708568909986,
            ],
            [
                0.3070947210996967,
                0.42239240190586624,
                0.24813319218418994,
                0.2988313287469416,
            ],
            [
                0.27584102577732994,
                0.4206069765621433,
                0.27051405805532286,
                0.2314531899914804,
            ],
            [
                0.26275928139070887,
                0.3507613691633102,
                0.2826565505530147,
                0.22830005565702405,
            ],
        ];
        pub const SEED7_OVERLAP: (f64, f64) = (-0.6430611767565202, -0.35032813973315563);
    }
}
