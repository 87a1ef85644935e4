//! Secure key rates for reference-frame-independent measurement-device-
//! independent QKD with sources that are only known to emit qubits.
//!
//! The pipeline runs from an observed table of conditional success
//! probabilities to a key rate:
//! [`consistency_check`] bounds the unknown superposition amplitudes,
//! [`conservative_interval`] turns them into intervals on the phase-rotated
//! inner products, [`min_modulus_rfi`] certifies a lower bound on the overlap
//! modulus, and [`analyze`] converts that into error rates and the rate.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod feasibility;
pub mod inner;
pub mod interval;
pub mod oracle;
pub mod rate;
pub mod settings;
pub mod sweep;
pub mod table;

pub use bounds::{conservative_interval, PairBoundInput, PairInterval};
pub use channel::{ideal_table, sampled_table, ChannelParams, SampledTable};
pub use error::{Error, Result};
pub use feasibility::{consistency_check, consistency_check_with};
pub use inner::{min_modulus_baseline, min_modulus_rfi, InnerProductBound, PhaseSystem, Witness};
pub use oracle::{
    near_ideal_attack, random_attack, soundness_check, verify_batch, AttackConfig, AttackInstance,
};
pub use rate::{analyze, binary_entropy, ErrorRates, KeyRateReport};
pub use settings::{ModulusSettings, OptimizerSettings, PhaseSolver, Settings};
pub use sweep::{run_sweep, SweepRow, SweepSpec};
pub use table::{
    CheckingPair, CoefficientPoint, Mode, PhaseInterval, ProbabilityTable, TableFile, TableIssue,
};
