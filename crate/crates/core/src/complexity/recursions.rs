use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rate_matrix::RateMatrix;
use crate::samplers::UNREACHABLE_PROBABILITY;
use crate::spectral::{SpectralDecomposition, TransitionSource};

/// Relative tolerance (against `max|Q|`) at which spectral integrals switch
/// to their limit expressions.
pub const DEGENERATE_TOL: f64 = 1e-9;

/// `(exp(x t) - 1) / x`, equal to `t` in the limit `x -> 0`.
fn expm1_ratio(x: f64, t: f64, tol: f64) -> f64 {
    if x.abs() < tol {
        t
    } else {
        (x * t).exp_m1() / x
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be finite and > 0, got {t}")));
    }
    Ok(())
}

/// `c_m = sum_i V_mi Q_i`: exit rates in the eigenbasis.
fn exit_coefficients(d: &SpectralDecomposition, q: &RateMatrix) -> Vec<f64> {
    let n = d.n();
    (0..n).map(|m| (0..n).map(|i| d.u_inv()[(m, i)] * q.exit_rate(i)).sum()).collect()
}

/// Expected jumps of one rejection proposal. For `a == b` this is the
/// unconditioned count `sum_i Q_i int_0^T P_ai(t) dt`; for `a != b` it is one
/// forced jump plus the jumps of the forward continuation after the forced
/// first jump time.
pub fn expected_recursions_rejection(
    d: &SpectralDecomposition,
    q: &RateMatrix,
    a: usize,
    b: usize,
    t: f64,
) -> Result<f64> {
    check_horizon(t)?;
    let tol = DEGENERATE_TOL * d.scale();
    let lambda = d.eigenvalues();
    let c = exit_coefficients(d, q);
    let n = d.n();
    if a == b {
        return Ok((0..n).map(|m| d.u()[(a, m)] * c[m] * expm1_ratio(lambda[m], t, tol)).sum());
    }
    let qa = q.exit_rate(a);
    let forced = -(-t * qa).exp_m1();
    let decay = (-qa * t).exp();
    // K_m = int_0^T exp(-Q_a s) int_0^{T-s} exp(lambda_m u) du ds
    let k: Vec<f64> = lambda
        .iter()
        .map(|&l| {
            if l.abs() < tol {
                t / qa - forced / (qa * qa)
            } else {
                // (exp(l T) - exp(-Q_a T)) / (Q_a + l)
                let r = qa + l;
                let head = if r * t > 1.0 { ((l * t).exp() - decay) / r } else { decay * expm1_ratio(r, t, tol) };
                (head - forced / qa) / l
            }
        })
        .collect();
    let weighted: Vec<f64> = (0..n).map(|m| c[m] * k[m]).collect();
    let tail: f64 = (0..n)
        .filter(|&j| j != a && q.rate(a, j) > 0.0)
        .map(|j| q.rate(a, j) * (0..n).map(|m| d.u()[(j, m)] * weighted[m]).sum::<f64>())
        .sum();
    Ok(1.0 + tail / forced)
}

/// Expected jumps of the bridge:
/// `sum_{i != j} Q_ij int_0^T P_ai(t) P_jb(T - t) dt / P_ab(T)`.
pub fn expected_recursions_direct(
    d: &SpectralDecomposition,
    q: &RateMatrix,
    a: usize,
    b: usize,
    t: f64,
) -> Result<f64> {
    check_horizon(t)?;
    let p_ab = d.transition_entry(a, b, t);
    if !(p_ab > UNREACHABLE_PROBABILITY) {
        return Err(Error::UnreachableEndpoint { a, b, horizon: t, probability: p_ab });
    }
    let n = d.n();
    let tol = DEGENERATE_TOL * d.scale();
    let lambda = d.eigenvalues();
    let mut off = q.matrix().clone();
    off.fill_diagonal(0.0);
    let m: DMatrix<f64> = d.u_inv() * off * d.u();
    let mut total = 0.0;
    for u in 0..n {
        let left = d.u()[(a, u)];
        for v in 0..n {
            // int_0^T exp(t l_u) exp((T - t) l_v) dt
            let (lo, hi) = if lambda[u] < lambda[v] { (lambda[u], lambda[v]) } else { (lambda[v], lambda[u]) };
            let conv = (t * hi).exp() * expm1_ratio(lo - hi, t, tol);
            total += left * m[(u, v)] * d.u_inv()[(v, b)] * conv;
        }
    }
    Ok(total / p_ab)
}

/// Expected virtual-inclusive jump count `mu T (R P(T))_ab / P_ab(T)`,
/// evaluated as `mu T + T (Q P(T))_ab / P_ab(T)`.
pub fn expected_recursions_uniformization(
    q: &RateMatrix,
    source: &TransitionSource,
    a: usize,
    b: usize,
    t: f64,
) -> Result<f64> {
    check_horizon(t)?;
    let p = source.matrix(t)?;
    let p_ab = p[(a, b)];
    if !(p_ab > UNREACHABLE_PROBABILITY) {
        return Err(Error::UnreachableEndpoint { a, b, horizon: t, probability: p_ab });
    }
    let qp: f64 = (0..q.n()).map(|c| q.rate(a, c) * p[(c, b)]).sum();
    Ok(q.max_exit_rate() * t + t * qp / p_ab)
}
