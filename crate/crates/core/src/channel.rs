//! Reference probability tables for a channel with depolarization and an
//! uncontrolled rotation about the z axis.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ProbabilityTable, TableFile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Bit error rate, in `[0, 0.5]`.
    pub e_b: f64,
    /// Relative rotation angle in radians.
    pub theta: f64,
}

impl ChannelParams {
    pub fn new(e_b: f64, theta: f64) -> Result<Self> {
        if !e_b.is_finite() || !(0.0..=0.5).contains(&e_b) {
            return Err(Error::InvalidParams(format!("e_b = {e_b} not in [0, 0.5]")));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidParams(format!("theta = {theta} not finite")));
        }
        Ok(Self { e_b, theta })
    }
}

/// Exact 4×4 table of the depolarize-and-rotate channel.
pub fn ideal_table(params: ChannelParams) -> Result<ProbabilityTable> {
    let ChannelParams { e_b, theta } = ChannelParams::new(params.e_b, params.theta)?;
    let check = |angle: f64| (1.0 - e_b) * 0.25 * (1.0 + angle.cos()) + 0.5 * e_b;
    let same = 0.5 * (1.0 - e_b);
    let flip = 0.5 * e_b;
    let q = 0.25;
    let p22 = check(theta);
    let p23 = check(FRAC_PI_2 + theta);
    let p32 = check(FRAC_PI_2 - theta);
    let p33 = check(theta);
    Ok(ProbabilityTable::from_rows(vec![
        vec![same, flip, q, q],
        vec![flip, same, q, q],
        vec![q, q, p22, p23],
        vec![q, q, p32, p33],
    ]))
}

/// A finite-statistics estimate of [`ideal_table`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampledTable {
    pub table: ProbabilityTable,
    pub counts: Vec<Vec<u64>>,
    pub shots: u64,
}

impl SampledTable {
    pub fn to_file(&self) -> TableFile {
        TableFile::Counts {
            size: self.counts.len(),
            shots: self.shots,
            counts: self.counts.clone(),
        }
    }
}

/// Draws `Binomial(shots, p_ij)` successes independently for every cell.
///
/// Cell `(i, j)` uses ChaCha8 seeded with `seed` on stream `4·i + j`, so a
/// cell's draw does not depend on evaluation order.
pub fn sampled_table(params: ChannelParams, shots: u64, seed: u64) -> Result<SampledTable> {
    if shots == 0 {
        return Err(Error::InvalidParams("shots must be at least 1".into()));
    }
    let ideal = ideal_table(params)?;
    let n = ideal.size();
    let mut counts = vec![vec![0u64; n]; n];
    for (i, row) in counts.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((i * n + j) as u64);
            let dist = Binomial::new(shots, ideal.get(i, j).clamp(0.0, 1.0))
                .map_err(|e| Error::InvalidParams(e.to_string()))?;
            *cell = dist.sample(&mut rng);
        }
    }
    let p = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / shots as f64).collect())
        .collect();
    Ok(SampledTable {
        table: ProbabilityTable::from_rows(p),
        counts,
        shots,
    })
}
