//! Error rates and the final key rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{conservative_interval_with, PairInterval};
use crate::error::{Error, Result};
use crate::feasibility::consistency_check_with;
use crate::inner::{min_modulus_baseline, min_modulus_rfi, InnerProductBound, PhaseSystem};
use crate::settings::Settings;
use crate::table::{validate_table, CheckingPair, Mode, PhaseInterval, ProbabilityTable};

/// Binary Shannon entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::EntropyDomain(x));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    // Evaluate on the smaller argument so H(x) and H(1 - x) agree bit for bit
    // whenever 1 - x is exact.
    let m = if x > 0.5 { 1.0 - x } else { x };
    Ok(term(m) + term(1.0 - m))
}

/// `(p01 + p10) / (p00 + p11 + p01 + p10)`.
pub fn bit_error_rate(table: &ProbabilityTable) -> Result<f64> {
    let total = table.key_mass();
    if total <= 0.0 {
        return Err(Error::NoKeyEvents);
    }
    Ok((table.get(0, 1) + table.get(1, 0)) / total)
}

/// Upper bound on `Σ_q |√p00 γ00 − e^{iα} √p11 γ11|²` once the phase `α` is
/// chosen to align with `⟨Γ00|Γ11⟩`.
pub fn delta_bound(p00: f64, p11: f64, omega: f64) -> f64 {
    p00 + p11 - 2.0 * (p00 * p11).sqrt() * omega
}

pub fn phase_error_rate(e_bit: f64, delta: f64, s_total: f64) -> f64 {
    (e_bit + delta / (2.0 * s_total)).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub e_bit: f64,
    pub e_phase: f64,
    pub delta_bound: f64,
    pub s_total: f64,
}

impl ErrorRates {
    pub fn from_table(table: &ProbabilityTable, omega: f64) -> Result<Self> {
        let e_bit = bit_error_rate(table)?;
        let s_total = table.key_mass();
        let delta = delta_bound(table.get(0, 0), table.get(1, 1), omega.clamp(0.0, 1.0));
        Ok(Self {
            e_bit,
            e_phase: phase_error_rate(e_bit, delta, s_total),
            delta_bound: delta,
            s_total,
        })
    }

    /// `1 − H(e_bit) − H(e_phase)`, not clamped.
    pub fn raw_rate(&self) -> Result<f64> {
        Ok(1.0 - binary_entropy(self.e_bit)? - binary_entropy(self.e_phase)?)
    }
}

/// Everything the analysis computed on the way to the rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub raw_rate: f64,
    pub pairs: Vec<PairInterval>,
    pub witness: Option<crate::inner::Witness>,
    pub settings: Settings,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub mode: Mode,
    pub e_bit: f64,
    pub e_phase: f64,
    pub omega: f64,
    /// In composite order; `None` for pairs not used by the mode.
    pub intervals: [Option<PhaseInterval>; 4],
    pub rate: f64,
    pub diagnostics: Diagnostics,
}

impl KeyRateReport {
    pub fn interval(&self, pair: CheckingPair) -> Option<PhaseInterval> {
        self.intervals[pair.slot()]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Runs the whole pipeline on one table.
pub fn analyze(table: &ProbabilityTable, mode: Mode, settings: &Settings) -> Result<KeyRateReport> {
    let issues = validate_table(table, mode);
    if !issues.is_empty() {
        return Err(Error::InvalidTable(issues));
    }
    // Fail early so a table without key events does not cost an optimization.
    bit_error_rate(table)?;

    let sets = consistency_check_with(table, settings.optimizer.grid_n, settings.optimizer.eps)?;
    let pairs: Vec<CheckingPair> = match mode {
        Mode::Rfi => CheckingPair::ALL.to_vec(),
        Mode::NonRfi => vec![CheckingPair::BASELINE],
    };
    let computed: Vec<PairInterval> = pairs
        .par_iter()
        .map(|&pair| conservative_interval_with(table, pair, &sets, &settings.optimizer))
        .collect::<Result<_>>()?;

    let mut intervals = [None; 4];
    for p in &computed {
        intervals[p.pair.slot()] = Some(p.interval);
    }

    let mut notes = Vec::new();
    let bound: InnerProductBound = match mode {
        Mode::Rfi => {
            let system = PhaseSystem::new(intervals.map(|i| i.expect("all pairs computed")));
            min_modulus_rfi(&system, &settings.modulus)?
        }
        Mode::NonRfi => {
            let iv = computed[0].interval;
            if iv.lower > 0.0 {
                notes.push(
                    "symmetric extension of the single-pair argument (lower bound > 0)".into(),
                );
            }
            min_modulus_baseline(&iv)
        }
    };

    if table.get(0, 0) * table.get(1, 1) == 0.0 {
        notes.push("p00·p11 = 0: phase-error bound does not depend on omega".into());
    }
    for p in &computed {
        for ext in [&p.upper, &p.lower] {
            if ext.on_cap {
                notes.push(format!(
                    "pair {}: extremal amplitudes on the cap; consider raising it",
                    p.pair
                ));
            }
            if ext.budget_exhausted {
                notes.push(format!(
                    "pair {}: box budget exhausted, {:?} bound is looser than necessary",
                    p.pair, ext.direction
                ));
            }
        }
    }

    let rates = ErrorRates::from_table(table, bound.omega)?;
    let raw_rate = rates.raw_rate()?;
    Ok(KeyRateReport {
        mode,
        e_bit: rates.e_bit,
        e_phase: rates.e_phase,
        omega: bound.omega,
        intervals,
        rate: raw_rate.max(0.0),
        diagnostics: Diagnostics {
            raw_rate,
            pairs: computed,
            witness: bound.witness,
            settings: *settings,
            notes,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        // -0.25 log2 0.25 - 0.75 log2 0.75 = 0.5 + 0.311278...
        let expect = 0.5 + 0.75 * (4.0f64 / 3.0).log2();
        assert!((binary_entropy(0.25).unwrap() - expect).abs() < 1e-15);
        assert!((binary_entropy(0.25).unwrap() - 0.811_278_1).abs() < 1e-7);
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-1e-3).is_err());
    }

    #[test]
    fn bit_error_examples() {
        let t = |p00, p11, p01, p10| {
            ProbabilityTable::from_rows(vec![
                vec![p00, p01, 0.25, 0.25],
                vec![p10, p11, 0.25, 0.25],
                vec![0.25; 4],
                vec![0.25; 4],
            ])
        };
        assert!((bit_error_rate(&t(0.495, 0.495, 0.005, 0.005)).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(bit_error_rate(&t(0.5, 0.5, 0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(bit_error_rate(&t(0.25, 0.25, 0.25, 0.25)).unwrap(), 0.5);
        assert_eq!(
            bit_error_rate(&t(0.0, 0.0, 0.0, 0.0)),
            Err(Error::NoKeyEvents)
        );
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_bound(0.5, 0.5, 1.0), 0.0);
        assert_eq!(delta_bound(0.3, 0.4, 0.0), 0.7);
        assert!((delta_bound(0.495, 0.495, 0.9) - 0.099).abs() < 1e-15);
    }

    #[test]
    fn phase_error_examples() {
        assert_eq!(phase_error_rate(0.0, 0.0, 1.0), 0.0);
        let delta = delta_bound(0.5, 0.5, FRAC_1_SQRT_2);
        assert!((phase_error_rate(0.0, delta, 1.0) - 0.146_446_6).abs() < 1e-7);
        assert_eq!(phase_error_rate(0.0, 1.0, 1.0), 0.5);
        assert_eq!(phase_error_rate(0.9, 1.0, 1.0), 1.0);
    }

    fn channel(e_b: f64, theta: f64) -> ProbabilityTable {
        crate::channel::ideal_table(crate::channel::ChannelParams::new(e_b, theta).unwrap())
            .unwrap()
    }

    #[test]
    fn ideal_rfi_rate_is_near_one() {
        let r = analyze(&channel(0.0, FRAC_PI_4), Mode::Rfi, &Settings::default()).unwrap();
        assert!(r.omega >= 0.997 && r.rate >= 0.99, "{r:?}");
        assert_eq!(r.e_bit, 0.0);
        assert!(r.intervals.iter().all(Option::is_some));
    }

    #[test]
    fn ideal_non_rfi_matches_closed_form() {
        let r = analyze(&channel(0.0, FRAC_PI_4), Mode::NonRfi, &Settings::default()).unwrap();
        assert!((r.omega - FRAC_1_SQRT_2).abs() < 1e-6, "{}", r.omega);
        assert!((r.e_phase - 0.146_446_6).abs() < 1e-6, "{}", r.e_phase);
        // 1 - H(0.1464466)
        assert!((r.rate - 0.399_123).abs() < 1e-5, "{}", r.rate);
        assert!(r.interval(CheckingPair::BASELINE).is_some());
        assert!(r.intervals[1..].iter().all(Option::is_none));
        assert!(r
            .diagnostics
            .notes
            .iter()
            .any(|n| n.contains("symmetric extension")));
    }

    // Cross-checked against an independent multistart SLSQP and FFT angle
    // scan; the grids differ, hence the tolerances.
    #[test]
    fn noisy_rates_match_independent_evaluation() {
        let s = Settings::default();
        let cases = [
            (0.02, 5.0 * std::f64::consts::FRAC_PI_8, 0.590, 0.0968),
            (0.005, FRAC_PI_4, 0.469, 0.1143),
            (0.005, 0.0, 0.249, 0.0),
            (0.01, std::f64::consts::FRAC_PI_2, 0.901, 0.5957),
        ];
        for (e_b, theta, omega, rate) in cases {
            let r = analyze(&channel(e_b, theta), Mode::Rfi, &s).unwrap();
            assert!(
                (r.omega - omega).abs() <= 3e-3,
                "({e_b}, {theta}): omega {}",
                r.omega
            );
            assert!(
                (r.rate - rate).abs() <= 3e-3,
                "({e_b}, {theta}): rate {}",
                r.rate
            );
        }
    }

    #[test]
    fn analysis_is_deterministic() {
        let t = channel(0.01, 1.1);
        let a = analyze(&t, Mode::Rfi, &Settings::default()).unwrap();
        let b = analyze(&t, Mode::Rfi, &Settings::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn transposed_table_swaps_mixed_pairs() {
        let t = channel(0.01, 0.9);
        let a = analyze(&t, Mode::Rfi, &Settings::default()).unwrap();
        let b = analyze(&t.transpose(), Mode::Rfi, &Settings::default()).unwrap();
        let close = |x: PhaseInterval, y: PhaseInterval| {
            (x.lower - y.lower).abs() < 1e-6 && (x.upper - y.upper).abs() < 1e-6
        };
        let [p22, p23, p32, p33] = CheckingPair::ALL;
        assert!(close(a.interval(p22).unwrap(), b.interval(p22).unwrap()));
        assert!(close(a.interval(p33).unwrap(), b.interval(p33).unwrap()));
        assert!(close(a.interval(p23).unwrap(), b.interval(p32).unwrap()));
        assert!(close(a.interval(p32).unwrap(), b.interval(p23).unwrap()));
        assert!((a.rate - b.rate).abs() < 1e-6);
    }

    #[test]
    fn vanishing_key_pair_makes_omega_irrelevant() {
        let mut rows = channel(0.01, 0.5).rows().to_vec();
        rows[1][1] = 0.0;
        let t = ProbabilityTable::from_rows(rows);
        match analyze(&t, Mode::Rfi, &Settings::default()) {
            Ok(r) => {
                assert!(r
                    .diagnostics
                    .notes
                    .iter()
                    .any(|n| n.contains("p00·p11 = 0")));
                let delta = t.get(0, 0);
                let expect = phase_error_rate(r.e_bit, delta, t.key_mass());
                assert!((r.e_phase - expect).abs() < 1e-15);
            }
            Err(e) => assert!(matches!(e, Error::Inconsistent(_)), "{e}"),
        }
    }

    #[test]
    fn errors_propagate() {
        let zero = ProbabilityTable::from_rows(vec![vec![0.0; 4]; 4]);
        assert_eq!(
            analyze(&zero, Mode::Rfi, &Settings::default()),
            Err(Error::NoKeyEvents)
        );
        let small = ProbabilityTable::from_rows(vec![vec![0.5; 3]; 3]);
        assert!(matches!(
            analyze(&small, Mode::Rfi, &Settings::default()),
            Err(Error::InvalidTable(_))
        ));
        let mut rows = channel(0.0, FRAC_PI_4).rows().to_vec();
        rows[2][0] = 0.9;
        rows[0][0] = 0.05;
        rows[1][0] = 0.05;
        let bad = ProbabilityTable::from_rows(rows);
        assert!(matches!(
            analyze(&bad, Mode::Rfi, &Settings::default()),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn baseline_never_beats_rfi() {
        let s = Settings::default();
        let mut tables: Vec<ProbabilityTable> =
            [(0.0, 0.3), (0.005, 2.5), (0.01, 3.0), (0.003, 0.0)]
                .iter()
                .map(|&(e, t)| channel(e, t))
                .collect();
        tables.extend((0..20).map(|seed| {
            crate::oracle::induced_table(&crate::oracle::near_ideal_attack(seed, 0.02))
        }));
        for t in &tables {
            let rfi = analyze(t, Mode::Rfi, &s).unwrap();
            let base = analyze(t, Mode::NonRfi, &s).unwrap();
            assert!(
                base.omega <= rfi.omega + 2.0 * s.modulus.r_step,
                "baseline {} vs rfi {}",
                base.omega,
                rfi.omega
            );
        }
    }

    proptest! {
        #[test]
        fn entropy_is_symmetric(x in 0.5f64..=1.0, y in 0.0f64..=1.0) {
            prop_assert_eq!(binary_entropy(x).unwrap(), binary_entropy(1.0 - x).unwrap());
            prop_assert!((binary_entropy(y).unwrap() - binary_entropy(1.0 - y).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn phase_error_dominates_bit_error(
            p00 in 0.0f64..=1.0, p11 in 0.0f64..=1.0, p01 in 0.0f64..=1.0, p10 in 0.0f64..=1.0,
            omega in 0.0f64..=1.0,
        ) {
            prop_assume!(p00 + p11 + p01 + p10 > 0.0);
            let t = ProbabilityTable::from_rows(vec![vec![p00, p01], vec![p10, p11]]);
            let r = ErrorRates::from_table(&t, omega).unwrap();
            prop_assert!(r.delta_bound >= -1e-15);
            prop_assert!(r.e_phase >= r.e_bit - 1e-15);
        }
    }
}
