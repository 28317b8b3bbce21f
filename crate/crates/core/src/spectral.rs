//! Eigendecomposition of rate matrices and the transition probabilities
//! `P(t) = U exp(t diag(lambda)) U^-1` built on it.

use std::cell::Cell;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::rate_matrix::{RateMatrix, StationaryDistribution};

/// Detailed balance tolerance (relative to `max|Q|`) for the symmetric route.
pub const DETAILED_BALANCE_TOL: f64 = 1e-9;
/// Largest tolerated eigenvalue imaginary part, relative to `max|Q|`.
pub const IMAGINARY_TOL: f64 = 1e-10;
/// Eigenvalues this close to zero (relative to `max|Q|`) are snapped to 0.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;
/// Reconstruction `||U L U^-1 - Q||_inf` must stay below this times `max|Q|`.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Raw probabilities below `-PROBABILITY_CLAMP_TOL` are treated as bugs.
pub const PROBABILITY_CLAMP_TOL: f64 = 1e-9;
/// Largest tolerated row-sum error of a transition matrix before renormalisation.
pub const ROW_SUM_BREAKDOWN_TOL: f64 = 1e-6;

thread_local! {
    static DECOMPOSITIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of spectral decompositions computed on the current thread.
pub fn decomposition_count() -> u64 {
    DECOMPOSITIONS.with(Cell::get)
}

/// `Q = U diag(lambda) U^-1` with a real spectrum.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    u: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    u_inv: DMatrix<f64>,
    max_abs: f64,
    reversible: bool,
}

impl SpectralDecomposition {
    /// Decomposes `q`. With `reversible` set the symmetric similarity
    /// transform `Pi^1/2 Q Pi^-1/2` is used, which requires detailed balance;
    /// otherwise a general eigensolver is used and complex spectra are rejected.
    pub fn new(q: &RateMatrix, pi: &StationaryDistribution, reversible: bool) -> Result<Self> {
        let d = if reversible {
            q.check_detailed_balance(pi, DETAILED_BALANCE_TOL)?;
            Self::symmetric(q, pi)?
        } else {
            Self::general(q)?
        };
        DECOMPOSITIONS.with(|c| c.set(c.get() + 1));
        Ok(d)
    }

    /// Computes the stationary distribution and picks the symmetric route
    /// whenever detailed balance holds.
    pub fn of(q: &RateMatrix) -> Result<Self> {
        let pi = q.stationary_distribution()?;
        let reversible = q.check_detailed_balance(&pi, DETAILED_BALANCE_TOL).is_ok();
        Self::new(q, &pi, reversible)
    }

    fn symmetric(q: &RateMatrix, pi: &StationaryDistribution) -> Result<Self> {
        let n = q.n();
        let sqrt_pi: Vec<f64> = pi.probs().iter().map(|p| p.sqrt()).collect();
        let mut s = DMatrix::from_fn(n, n, |i, j| sqrt_pi[i] * q.rate(i, j) / sqrt_pi[j]);
        let st = s.transpose();
        s = (s + st) * 0.5;
        let eig = SymmetricEigen::new(s);
        let w = eig.eigenvectors;
        let u = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / sqrt_pi[i]);
        let u_inv = DMatrix::from_fn(n, n, |i, j| w[(j, i)] * sqrt_pi[j]);
        let eigenvalues = eig.eigenvalues.iter().copied().collect();
        Self::finish(q, u, eigenvalues, u_inv, true)
    }

    fn general(q: &RateMatrix) -> Result<Self> {
        let n = q.n();
        let scale = q.max_abs();
        let complex = q.matrix().complex_eigenvalues();
        let max_im = complex.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if max_im > IMAGINARY_TOL * scale {
            return Err(Error::ComplexSpectrum(format!("eigenvalue imaginary part {max_im:e} exceeds tolerance")));
        }
        let mut values: Vec<f64> = complex.iter().map(|z| z.re).collect();
        values.sort_by(|a, b| a.total_cmp(b));

        // group numerically coincident eigenvalues and take a null-space basis per group
        let cluster_tol = 1e-8 * scale;
        let mut clusters: Vec<Vec<f64>> = Vec::new();
        for v in values {
            match clusters.last_mut() {
                Some(c) if (v - *c.last().unwrap()).abs() < cluster_tol => c.push(v),
                _ => clusters.push(vec![v]),
            }
        }
        let mut u = DMatrix::<f64>::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        let mut col = 0;
        for cluster in clusters {
            let m = cluster.len();
            let lambda = cluster.iter().sum::<f64>() / m as f64;
            let shifted = q.matrix() - DMatrix::identity(n, n) * lambda;
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.expect("requested V^T");
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
            for &k in order.iter().take(m) {
                if svd.singular_values[k] > 1e-8 * scale {
                    return Err(Error::ComplexSpectrum(format!("eigenvalue {lambda} has a deficient eigenspace")));
                }
                for i in 0..n {
                    u[(i, col)] = v_t[(k, i)];
                }
                eigenvalues.push(lambda);
                col += 1;
            }
        }
        let u_inv =
            u.clone().try_inverse().ok_or_else(|| Error::ComplexSpectrum("eigenvector matrix is singular".into()))?;
        let cond = u.amax() * u_inv.amax() * n as f64;
        if cond > 1e8 {
            return Err(Error::ComplexSpectrum(format!("eigenvector matrix is ill-conditioned ({cond:e})")));
        }
        Self::finish(q, u, eigenvalues, u_inv, false)
    }

    fn finish(
        q: &RateMatrix,
        u: DMatrix<f64>,
        mut eigenvalues: Vec<f64>,
        u_inv: DMatrix<f64>,
        reversible: bool,
    ) -> Result<Self> {
        let scale = q.max_abs();
        let mut zeros = 0;
        for l in eigenvalues.iter_mut() {
            if l.abs() < ZERO_EIGENVALUE_TOL * scale {
                *l = 0.0;
                zeros += 1;
            }
        }
        if zeros != 1 {
            return Err(Error::NumericalBreakdown(format!("expected exactly one zero eigenvalue, found {zeros}")));
        }
        let d = Self { u, eigenvalues, u_inv, max_abs: scale, reversible };
        let err = d.reconstruction_error(q);
        if err > RECONSTRUCTION_TOL * scale {
            return Err(Error::NumericalBreakdown(format!("spectral reconstruction error {err:e}")));
        }
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn u_inv(&self) -> &DMatrix<f64> {
        &self.u_inv
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    /// `max|Q|` of the decomposed matrix.
    pub fn scale(&self) -> f64 {
        self.max_abs
    }

    /// `||U diag(lambda) U^-1 - Q||_inf` (maximum absolute row sum).
    pub fn reconstruction_error(&self, q: &RateMatrix) -> f64 {
        let n = self.n();
        let scaled = DMatrix::from_fn(n, n, |i, j| self.u[(i, j)] * self.eigenvalues[j]);
        let diff = scaled * &self.u_inv - q.matrix();
        diff.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Raw (unclamped) `P_ab(t)`.
    pub fn transition_entry(&self, a: usize, b: usize, t: f64) -> f64 {
        if t == 0.0 {
            return if a == b { 1.0 } else { 0.0 };
        }
        self.eigenvalues.iter().enumerate().map(|(j, l)| self.u[(a, j)] * self.u_inv[(j, b)] * (t * l).exp()).sum()
    }

    /// `P(t)`, row-stochastic after the clamping discipline in [`clamp_stochastic`].
    pub fn transition_probability(&self, t: f64) -> Result<DMatrix<f64>> {
        check_time(t)?;
        let n = self.n();
        if t == 0.0 {
            return Ok(DMatrix::identity(n, n));
        }
        let scaled = DMatrix::from_fn(n, n, |i, j| self.u[(i, j)] * (t * self.eigenvalues[j]).exp());
        clamp_stochastic(scaled * &self.u_inv)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Clamps entries in `[-1e-9, 0)` to zero and renormalises rows; anything
/// more negative, or a row sum off by more than `1e-6`, is a breakdown.
pub fn clamp_stochastic(mut p: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let v = p[(i, j)];
            if !v.is_finite() || v < -PROBABILITY_CLAMP_TOL {
                return Err(Error::NumericalBreakdown(format!("transition probability ({i}, {j}) = {v:e}")));
            }
            if v < 0.0 {
                p[(i, j)] = 0.0;
            }
            sum += p[(i, j)];
        }
        if (sum - 1.0).abs() > ROW_SUM_BREAKDOWN_TOL {
            return Err(Error::NumericalBreakdown(format!("row {i} of P(t) sums to {sum}")));
        }
        for j in 0..n {
            p[(i, j)] = (p[(i, j)] / sum).min(1.0);
        }
    }
    Ok(p)
}

/// `exp(Qt)` by scaling and squaring, for matrices without a usable real
/// eigendecomposition. Same contract as [`SpectralDecomposition::transition_probability`].
pub fn matrix_exponential_fallback(q: &RateMatrix, t: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    let n = q.n();
    if t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    clamp_stochastic((q.matrix() * t).exp())
}

/// Where transition probabilities come from.
#[derive(Debug, Clone)]
pub enum TransitionSource {
    Spectral(Arc<SpectralDecomposition>),
    MatrixExponential(Arc<RateMatrix>),
}

impl TransitionSource {
    /// Spectral when a real decomposition exists, scaling-and-squaring otherwise.
    pub fn for_matrix(q: &Arc<RateMatrix>) -> Result<Self> {
        match SpectralDecomposition::of(q) {
            Ok(d) => Ok(Self::Spectral(Arc::new(d))),
            Err(Error::ComplexSpectrum(_)) => Ok(Self::MatrixExponential(q.clone())),
            Err(e) => Err(e),
        }
    }

    pub fn matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        match self {
            Self::Spectral(d) => d.transition_probability(t),
            Self::MatrixExponential(q) => matrix_exponential_fallback(q, t),
        }
    }

    /// `P_ab(t)` clamped at zero.
    pub fn entry(&self, a: usize, b: usize, t: f64) -> Result<f64> {
        match self {
            Self::Spectral(d) => {
                check_time(t)?;
                let v = d.transition_entry(a, b, t);
                if !v.is_finite() || v < -PROBABILITY_CLAMP_TOL {
                    return Err(Error::NumericalBreakdown(format!("P_{a}{b}({t}) = {v:e}")));
                }
                Ok(v.clamp(0.0, 1.0))
            }
            Self::MatrixExponential(q) => Ok(matrix_exponential_fallback(q, t)?[(a, b)]),
        }
    }
}
