use nalgebra::DMatrix;

use super::{check_frequencies, check_positive, BuiltModel};
use crate::error::{Error, Result};
use crate::rate_matrix::{RateMatrix, StateSpace, StationaryDistribution};

/// State order of the nucleotide models.
pub const NUCLEOTIDES: [&str; 4] = ["A", "G", "C", "T"];

/// Purine-purine or pyrimidine-pyrimidine change in A, G, C, T order.
fn is_transition(i: usize, j: usize) -> bool {
    i != j && (i < 2) == (j < 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HkyParams {
    pub kappa: f64,
    /// Frequencies of A, G, C, T.
    pub base_freqs: [f64; 4],
    pub calibrate: bool,
}

/// `Q_ij = pi_j` for transversions and `kappa pi_j` for transitions.
pub fn build_hky(p: &HkyParams) -> Result<BuiltModel> {
    check_positive("kappa", p.kappa)?;
    let pi = check_frequencies(&p.base_freqs, 4)?;
    let rates =
        DMatrix::from_fn(4, 4, |i, j| if is_transition(i, j) { p.kappa * p.base_freqs[j] } else { p.base_freqs[j] });
    let q = RateMatrix::from_off_diagonal(rates, StateSpace::new(NUCLEOTIDES)?)?;
    Ok(BuiltModel::new(q, pi, p.calibrate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HkyCpgParams {
    pub kappa: f64,
    /// Unnormalised base rates for A, G, C, T.
    pub nu: [f64; 4],
    /// Multiplier on every rate out of C.
    pub gamma: f64,
    pub calibrate: bool,
}

/// HKY with base rates `nu` and the C row multiplied by `gamma`. Stationary
/// distribution is `(nu_A, nu_G, nu_C / gamma, nu_T)` normalised.
pub fn build_hky_cpg(p: &HkyCpgParams) -> Result<BuiltModel> {
    check_positive("kappa", p.kappa)?;
    for (label, v) in NUCLEOTIDES.iter().zip(p.nu) {
        check_positive(&format!("nu_{label}"), v)?;
    }
    if !(p.gamma >= 1.0) || !p.gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be >= 1, got {}", p.gamma)));
    }
    let rates = DMatrix::from_fn(4, 4, |i, j| {
        let base = if is_transition(i, j) { p.kappa * p.nu[j] } else { p.nu[j] };
        if i == 2 {
            p.gamma * base
        } else {
            base
        }
    });
    let q = RateMatrix::from_off_diagonal(rates, StateSpace::new(NUCLEOTIDES)?)?;
    let w = [p.nu[0], p.nu[1], p.nu[2] / p.gamma, p.nu[3]];
    let total: f64 = w.iter().sum();
    let pi = StationaryDistribution::new(w.iter().map(|x| x / total).collect())?;
    Ok(BuiltModel::new(q, pi, p.calibrate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference_hky(calibrate: bool) -> BuiltModel {
        build_hky(&HkyParams { kappa: 2.0, base_freqs: [0.2, 0.3, 0.3, 0.2], calibrate }).unwrap()
    }

    #[test]
    fn hky_exit_rates_and_scale() {
        let m = reference_hky(false);
        for (r, e) in m.q.exit_rates().iter().zip([1.1, 0.9, 0.9, 1.1]) {
            assert_abs_diff_eq!(*r, e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(m.q.mean_exit_rate(&m.pi), 0.98, epsilon = 1e-15);
        let c = reference_hky(true);
        assert_abs_diff_eq!(c.q.mean_exit_rate(&c.pi), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.q.rate(0, 1), 0.6 / 0.98, epsilon = 1e-15);
    }

    #[test]
    fn kappa_one_uniform_is_symmetric() {
        let m = build_hky(&HkyParams { kappa: 1.0, base_freqs: [0.25; 4], calibrate: false }).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(m.q.rate(i, j), 0.25);
                }
            }
        }
    }

    #[test]
    fn hky_is_reversible() {
        let m = reference_hky(true);
        assert!(m.q.detailed_balance_residual(&m.pi).0 < 1e-12);
    }

    #[test]
    fn cpg_stationary_and_exit_rate() {
        let m = build_hky_cpg(&HkyCpgParams { kappa: 2.0, nu: [0.3, 0.3, 0.2, 0.2], gamma: 20.0, calibrate: false })
            .unwrap();
        assert_abs_diff_eq!(m.q.exit_rate(2), 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.pi.get(2), 0.01 / 0.81, epsilon = 1e-15);
        assert!(m.q.detailed_balance_residual(&m.pi).0 < 1e-12);
    }

    #[test]
    fn cpg_gamma_one_is_hky() {
        let nu = [0.3, 0.3, 0.2, 0.2];
        let cpg = build_hky_cpg(&HkyCpgParams { kappa: 2.0, nu, gamma: 1.0, calibrate: true }).unwrap();
        let hky = build_hky(&HkyParams { kappa: 2.0, base_freqs: nu, calibrate: true }).unwrap();
        assert!((cpg.q.matrix() - hky.q.matrix()).amax() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_hky(&HkyParams { kappa: -1.0, base_freqs: [0.25; 4], calibrate: false }).is_err());
        assert!(matches!(
            build_hky(&HkyParams { kappa: 1.0, base_freqs: [0.5, 0.5, 0.0, 0.0], calibrate: false }),
            Err(Error::InvalidFrequencyVector(_))
        ));
        assert!(build_hky_cpg(&HkyCpgParams { kappa: 1.0, nu: [1.0; 4], gamma: 0.5, calibrate: false }).is_err());
    }
}
