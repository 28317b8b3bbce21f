//! Built-in substitution models and random rate-matrix generators.

mod genetic_code;
mod gy;
mod hky;
mod random;

pub use genetic_code::{GeneticCode, NUCLEOTIDES_TCAG};
pub use gy::{build_gy, default_codon_frequencies, parse_codon_frequencies, GyParams};
pub use hky::{build_hky, build_hky_cpg, HkyCpgParams, HkyParams, NUCLEOTIDES};
pub use random::{random_reversible, random_sparse_codon};

use crate::error::{Error, Result};
use crate::rate_matrix::{RateMatrix, StationaryDistribution};

/// A rate matrix with its stationary distribution known in closed form.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub q: RateMatrix,
    pub pi: StationaryDistribution,
}

impl BuiltModel {
    /// Divides by `sum_c pi_c Q_c` when `calibrate` is set.
    fn new(q: RateMatrix, pi: StationaryDistribution, calibrate: bool) -> Self {
        let q = if calibrate { q.scaled(1.0 / q.mean_exit_rate(&pi)) } else { q };
        Self { q, pi }
    }
}

fn check_frequencies(freqs: &[f64], expected: usize) -> Result<StationaryDistribution> {
    if freqs.len() != expected {
        return Err(Error::InvalidFrequencyVector(format!("expected {expected} entries, got {}", freqs.len())));
    }
    StationaryDistribution::new(freqs.to_vec()).map_err(|e| Error::InvalidFrequencyVector(e.to_string()))
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}
