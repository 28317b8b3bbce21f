use crate::error::{Error, Result};
use crate::rate_matrix::{RateMatrix, StationaryDistribution};
use crate::spectral::{SpectralDecomposition, PROBABILITY_CLAMP_TOL};

/// Probability that one rejection proposal ends in `b`: `P_aa(T)` when
/// `a == b`, else `P_ab(T) / (1 - exp(-T Q_a))` (first jump forced).
pub fn acceptance_probability(d: &SpectralDecomposition, q: &RateMatrix, a: usize, b: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {t}")));
    }
    let p = d.transition_entry(a, b, t);
    let raw = if a == b { p } else { p / -(-t * q.exit_rate(a)).exp_m1() };
    if !raw.is_finite() || !(-PROBABILITY_CLAMP_TOL..=1.0 + PROBABILITY_CLAMP_TOL).contains(&raw) {
        return Err(Error::NumericalBreakdown(format!("acceptance probability {raw:e}")));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// First-order small-`T` acceptance probability for `a != b`:
/// `(Q_ab / Q_a)(1 - Q_b T / 2) + sum_{i != a, b} (Q_ai / Q_a)(T / 2) Q_ib`.
pub fn acceptance_small_t(q: &RateMatrix, a: usize, b: usize, t: f64) -> f64 {
    let qa = q.exit_rate(a);
    let direct = q.rate(a, b) / qa * (1.0 - q.exit_rate(b) * t / 2.0);
    let two_step: f64 =
        (0..q.n()).filter(|&i| i != a && i != b).map(|i| q.rate(a, i) / qa * (t / 2.0) * q.rate(i, b)).sum();
    direct + two_step
}

/// `max_c Q_c / sum_c pi_c Q_c`.
pub fn inflation_factor(q: &RateMatrix, pi: &StationaryDistribution) -> f64 {
    q.max_exit_rate() / q.mean_exit_rate(pi)
}
