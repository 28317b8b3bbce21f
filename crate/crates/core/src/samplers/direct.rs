use std::sync::Arc;

use crate::error::{Error, Result};
use crate::path::{SamplePath, Segment};
use crate::problem::EndpointProblem;
use crate::random::RandomStream;
use crate::rate_matrix::RateMatrix;
use crate::spectral::SpectralDecomposition;

use super::root::invert_monotone;
use super::SampleReport;

pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
pub const ROOT_MAX_ITER: usize = 200;
/// `|lambda_j + Q_a| < DEGENERATE_RATE_TOL * Q_a` selects the limit branch.
pub const DEGENERATE_RATE_TOL: f64 = 1e-9;
/// Masses below `-NEGATIVE_MASS_TOL` are a breakdown; smaller negatives clamp to 0.
pub const NEGATIVE_MASS_TOL: f64 = 1e-8;
/// Endpoint probabilities at or below this make the conditioning undefined.
pub const UNREACHABLE_PROBABILITY: f64 = 1e-300;

/// Precomputed spectral data for the direct sampler, reusable across
/// endpoint problems on the same matrix.
#[derive(Debug, Clone)]
pub struct DirectKernel {
    q: Arc<RateMatrix>,
    d: Arc<SpectralDecomposition>,
    tol: f64,
}

/// Law of the first state change on `[0, horizon]` given the endpoints.
#[derive(Debug, Clone)]
pub struct FirstTransition {
    /// Probability of no change at all (only when `a == b`).
    pub stay: Option<f64>,
    /// Probability that the first change is to state `i` (zero at `i = a`).
    pub jump: Vec<f64>,
    weights: Vec<f64>,
    d: Arc<SpectralDecomposition>,
    a: usize,
    exit: f64,
    horizon: f64,
}

impl FirstTransition {
    /// Waiting-time CDF given that the first change is to `i`.
    pub fn waiting_time(&self, i: usize) -> Result<WaitingTimeCdf> {
        if i == self.a || i >= self.jump.len() {
            return Err(Error::InvalidParameter(format!("no first transition from {} to {i}", self.a)));
        }
        WaitingTimeCdf::new(&self.d, i, &self.weights, self.exit, self.horizon)
    }
}

/// `t -> G_i(t) / G_i(T)` with
/// `G_i(t) = sum_j U_ij V_jb exp(T lambda_j) int_0^t exp(-s (lambda_j + Q_a)) ds`.
#[derive(Debug, Clone)]
pub struct WaitingTimeCdf {
    coeffs: Vec<f64>,
    eigenvalues: Vec<f64>,
    exit: f64,
    horizon: f64,
    total: f64,
}

impl WaitingTimeCdf {
    fn new(d: &SpectralDecomposition, i: usize, v_col_b: &[f64], exit: f64, horizon: f64) -> Result<Self> {
        let coeffs: Vec<f64> = (0..d.n()).map(|j| d.u()[(i, j)] * v_col_b[j]).collect();
        let mut cdf = Self { coeffs, eigenvalues: d.eigenvalues().to_vec(), exit, horizon, total: 1.0 };
        let total = cdf.unnormalized(horizon);
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NumericalBreakdown(format!("waiting-time normaliser {total:e} for state {i}")));
        }
        cdf.total = total;
        Ok(cdf)
    }

    fn unnormalized(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, &l)| c * partial_integral(l, self.exit, self.horizon, t))
            .sum()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.unnormalized(t.min(self.horizon)) / self.total
    }

    /// Smallest `t` with `CDF(t) = u`, to absolute tolerance `tol`, kept in `(0, T)`.
    pub fn invert(&self, u: f64, tol: f64) -> Result<f64> {
        let t = invert_monotone(|t| self.eval(t), u, 0.0, self.horizon, tol, ROOT_MAX_ITER)?;
        Ok(t.clamp(f64::MIN_POSITIVE, self.horizon.next_down()))
    }
}

/// `exp(h lambda) int_0^t exp(-s (lambda + c)) ds`, with the limit branch at
/// `lambda + c ~ 0`. The large-`r t` form avoids overflow for very negative `r`.
fn partial_integral(lambda: f64, c: f64, h: f64, t: f64) -> f64 {
    let r = lambda + c;
    if r.abs() < DEGENERATE_RATE_TOL * c {
        t * (h * lambda).exp()
    } else if (r * t).abs() < 1.0 {
        (h * lambda).exp() * -(-r * t).exp_m1() / r
    } else {
        ((h * lambda).exp() - (lambda * (h - t) - c * t).exp()) / r
    }
}

impl DirectKernel {
    /// Wraps an existing decomposition of `q`.
    pub fn new(q: Arc<RateMatrix>, d: Arc<SpectralDecomposition>, tol: f64) -> Result<Self> {
        if d.n() != q.n() {
            return Err(Error::InvalidParameter("decomposition size does not match the rate matrix".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("root-find tolerance must be > 0, got {tol}")));
        }
        Ok(Self { q, d, tol })
    }

    /// Decomposes `q` (symmetric route when reversible) and wraps it.
    pub fn build(q: Arc<RateMatrix>) -> Result<Self> {
        let d = Arc::new(SpectralDecomposition::of(&q)?);
        Self::new(q, d, DEFAULT_ROOT_TOL)
    }

    pub fn rate_matrix(&self) -> &Arc<RateMatrix> {
        &self.q
    }

    pub fn decomposition(&self) -> &Arc<SpectralDecomposition> {
        &self.d
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// First-transition masses for a bridge from `a` to `b` over `horizon`.
    pub fn first_transition(&self, a: usize, b: usize, horizon: f64) -> Result<FirstTransition> {
        let n = self.q.n();
        if a >= n || b >= n || !(horizon > 0.0) {
            return Err(Error::InvalidProblem(format!("first transition {a} -> {b} over {horizon}")));
        }
        let p_ab = self.d.transition_entry(a, b, horizon);
        if !(p_ab > UNREACHABLE_PROBABILITY) {
            return Err(Error::UnreachableEndpoint { a, b, horizon, probability: p_ab });
        }
        let exit = self.q.exit_rate(a);
        let lambda = self.d.eigenvalues();
        let v_col_b: Vec<f64> = (0..n).map(|j| self.d.u_inv()[(j, b)]).collect();
        let w: Vec<f64> = (0..n).map(|j| v_col_b[j] * partial_integral(lambda[j], exit, horizon, horizon)).collect();

        let stay = (a == b).then(|| (-exit * horizon).exp() / p_ab);
        let mut jump = vec![0.0; n];
        for (i, p) in jump.iter_mut().enumerate() {
            let rate = self.q.rate(a, i);
            if i == a || rate == 0.0 {
                continue;
            }
            let s: f64 = (0..n).map(|j| self.d.u()[(i, j)] * w[j]).sum();
            *p = rate * s / p_ab;
            if *p < -NEGATIVE_MASS_TOL {
                return Err(Error::NumericalBreakdown(format!("first-transition mass p_{i} = {:e}", *p)));
            }
            *p = p.max(0.0);
        }
        let total = stay.unwrap_or(0.0) + jump.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::NumericalBreakdown(format!("first-transition masses sum to {total}")));
        }
        let stay = stay.map(|p| (p / total).min(1.0));
        jump.iter_mut().for_each(|p| *p /= total);
        Ok(FirstTransition { stay, jump, weights: v_col_b, d: self.d.clone(), a, exit, horizon })
    }

    /// Recursive exact sampling of a bridge. `recursion_steps` counts state
    /// changes drawn.
    pub fn sample(&self, problem: &EndpointProblem, rng: &mut RandomStream) -> Result<SampleReport> {
        if !Arc::ptr_eq(&problem.q, &self.q) && !problem.q.same_rates(&self.q) {
            return Err(Error::InvalidProblem("direct kernel built for a different rate matrix".into()));
        }
        let EndpointProblem { a, b, horizon, .. } = *problem;
        if horizon == 0.0 {
            return Ok(SampleReport { path: SamplePath::constant(a, 0.0), attempts: 1, recursion_steps: 0 });
        }
        let mut segments = vec![Segment { state: a, entry: 0.0 }];
        let (mut state, mut now) = (a, 0.0);
        loop {
            let remaining = horizon - now;
            let ft = self.first_transition(state, b, remaining)?;
            if let Some(stay) = ft.stay {
                if rng.uniform() < stay {
                    break;
                }
            }
            let next = rng.categorical(&ft.jump);
            let tau = ft.waiting_time(next)?.invert(rng.uniform_open(), self.tol)?;
            now = (now + tau).max(now.next_up()).min(horizon.next_down());
            if now <= segments.last().unwrap().entry {
                return Err(Error::NumericalBreakdown("jump times collapsed below float resolution".into()));
            }
            segments.push(Segment { state: next, entry: now });
            state = next;
        }
        let steps = (segments.len() - 1) as u64;
        Ok(SampleReport { path: SamplePath::new(horizon, segments)?, attempts: 1, recursion_steps: steps })
    }
}
