use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::path::{SamplePath, Segment};
use crate::problem::EndpointProblem;
use crate::random::RandomStream;
use crate::rate_matrix::RateMatrix;
use crate::spectral::TransitionSource;

use super::direct::UNREACHABLE_PROBABILITY;
use super::SampleReport;

/// Cumulative jump-count mass that must be reached by the series cap for the
/// remaining tail to be attributed to roundoff rather than an inconsistent `P_ab(T)`.
pub const SERIES_MASS_TOL: f64 = 1e-8;

/// `R = I + Q / mu` with `mu = max_c Q_c`, plus a shared cache of `R^m`.
#[derive(Debug)]
pub struct UniformizationKernel {
    q: Arc<RateMatrix>,
    mu: f64,
    r: DMatrix<f64>,
    powers: RwLock<Arc<Vec<Arc<DMatrix<f64>>>>>,
    source: TransitionSource,
}

/// Maximum series length `ceil(mu T + 10 sqrt(mu T) + 100)`.
pub fn series_cap(mu_t: f64) -> usize {
    (mu_t + 10.0 * mu_t.sqrt() + 100.0).ceil() as usize
}

impl UniformizationKernel {
    pub fn new(q: Arc<RateMatrix>, source: TransitionSource) -> Self {
        let n = q.n();
        let mu = q.max_exit_rate();
        let mut r = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { q.rate(i, j) / mu });
        for i in 0..n {
            let off: f64 = r.row(i).iter().sum();
            r[(i, i)] = (1.0 - off).max(0.0);
        }
        Self::from_parts(q, mu, r, source)
    }

    /// Decomposes `q` for `P_ab(T)`, falling back to the matrix exponential
    /// when the spectrum is complex.
    pub fn build(q: Arc<RateMatrix>) -> Result<Self> {
        let source = TransitionSource::for_matrix(&q)?;
        Ok(Self::new(q, source))
    }

    /// Assembles a kernel from an explicit `R`. Intended for diagnostics such
    /// as negative controls; `new` is the constructor that guarantees
    /// `R = I + Q / mu`.
    pub fn from_parts(q: Arc<RateMatrix>, mu: f64, r: DMatrix<f64>, source: TransitionSource) -> Self {
        let n = q.n();
        let initial = vec![Arc::new(DMatrix::identity(n, n)), Arc::new(r.clone())];
        Self { q, mu, r, powers: RwLock::new(Arc::new(initial)), source }
    }

    pub fn rate_matrix(&self) -> &Arc<RateMatrix> {
        &self.q
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn source(&self) -> &TransitionSource {
        &self.source
    }

    /// Number of cached powers `R^0 .. R^(m-1)`.
    pub fn cached_powers(&self) -> usize {
        self.powers.read().unwrap().len()
    }

    /// Snapshot of the cache holding at least `R^0 ..= R^m`. Growth doubles
    /// the cache and is published only once fully computed.
    pub fn powers_through(&self, m: usize) -> Arc<Vec<Arc<DMatrix<f64>>>> {
        {
            let snap = self.powers.read().unwrap();
            if snap.len() > m {
                return snap.clone();
            }
        }
        let mut guard = self.powers.write().unwrap();
        if guard.len() > m {
            return guard.clone();
        }
        let target = (m + 1).max(2 * guard.len());
        let mut grown: Vec<Arc<DMatrix<f64>>> = guard.iter().cloned().collect();
        while grown.len() < target {
            let next = grown.last().unwrap().as_ref() * &self.r;
            grown.push(Arc::new(next));
        }
        *guard = Arc::new(grown);
        guard.clone()
    }

    /// `P_ab(T)` from the kernel's transition source, checked for reachability.
    pub fn endpoint_probability(&self, a: usize, b: usize, horizon: f64) -> Result<f64> {
        let p = self.source.entry(a, b, horizon)?;
        if !(p > UNREACHABLE_PROBABILITY) {
            return Err(Error::UnreachableEndpoint { a, b, horizon, probability: p });
        }
        Ok(p)
    }

    /// `Pr(N = m | a, b)` for `m = 0 ..`, stopping once the cumulative mass
    /// exceeds `u`; returns that `m`.
    pub fn conditional_jump_count(&self, problem: &EndpointProblem, u: f64) -> Result<usize> {
        let EndpointProblem { a, b, horizon, .. } = *problem;
        let p_ab = self.endpoint_probability(a, b, horizon)?;
        self.jump_count_given(a, b, horizon, p_ab, u)
    }

    /// The masses `Pr(N = m | a, b)` for `m = 0 ..= cap`.
    pub fn jump_count_masses(&self, a: usize, b: usize, horizon: f64, cap: usize) -> Result<Vec<f64>> {
        let p_ab = self.endpoint_probability(a, b, horizon)?;
        let powers = self.powers_through(cap);
        let mu_t = self.mu * horizon;
        Ok((0..=cap).map(|m| poisson_mass(mu_t, m) * powers[m][(a, b)] / p_ab).collect())
    }

    fn jump_count_given(&self, a: usize, b: usize, horizon: f64, p_ab: f64, u: f64) -> Result<usize> {
        let mu_t = self.mu * horizon;
        let cap = series_cap(mu_t);
        let mut powers = self.powers_through(((mu_t + 4.0 * mu_t.sqrt()).ceil() as usize + 4).min(cap));
        let mut cum = 0.0;
        let mut last_positive = None;
        for m in 0..=cap {
            if m >= powers.len() {
                powers = self.powers_through((2 * m).min(cap));
            }
            let mass = poisson_mass(mu_t, m) * powers[m][(a, b)] / p_ab;
            if mass > 0.0 {
                last_positive = Some(m);
            }
            cum += mass;
            if cum > u {
                return Ok(m);
            }
        }
        match last_positive {
            Some(m) if cum >= 1.0 - SERIES_MASS_TOL => Ok(m),
            _ => Err(Error::SeriesTruncation { cap }),
        }
    }

    /// Uniformization sampling: draw the virtual-inclusive jump count, the
    /// jump times as sorted uniforms, then the intermediate states forward
    /// in index; self-transitions are dropped from the emitted path.
    pub fn sample(&self, problem: &EndpointProblem, rng: &mut RandomStream) -> Result<SampleReport> {
        if !Arc::ptr_eq(&problem.q, &self.q) && !problem.q.same_rates(&self.q) {
            return Err(Error::InvalidProblem("uniformization kernel built for a different rate matrix".into()));
        }
        let EndpointProblem { a, b, horizon, .. } = *problem;
        if horizon == 0.0 {
            return Ok(SampleReport { path: SamplePath::constant(a, 0.0), attempts: 1, recursion_steps: 0 });
        }
        let p_ab = self.endpoint_probability(a, b, horizon)?;
        let n = self.jump_count_given(a, b, horizon, p_ab, rng.uniform())?;
        let report = |path| Ok(SampleReport { path, attempts: 1, recursion_steps: n as u64 });
        if n == 0 || (n == 1 && a == b) {
            return report(SamplePath::constant(a, horizon));
        }
        if n == 1 {
            let t = (rng.uniform_open() * horizon).min(horizon.next_down());
            return report(SamplePath::new(
                horizon,
                vec![Segment { state: a, entry: 0.0 }, Segment { state: b, entry: t }],
            )?);
        }
        let mut times: Vec<f64> = (0..n).map(|_| rng.uniform_open() * horizon).collect();
        times.sort_by(f64::total_cmp);
        let powers = self.powers_through(n);
        let states = self.q.n();
        let mut weights = vec![0.0; states];
        let mut segments = vec![Segment { state: a, entry: 0.0 }];
        let mut x = a;
        for i in 1..n {
            let tail = &powers[n - i];
            let denom = powers[n - i + 1][(x, b)];
            if !(denom > 0.0) {
                return Err(Error::NumericalBreakdown(format!("interior-state denominator {denom:e} at step {i}")));
            }
            for (y, w) in weights.iter_mut().enumerate() {
                *w = self.r[(x, y)] * tail[(y, b)];
            }
            let y = rng.categorical(&weights);
            if y != x {
                segments.push(Segment { state: y, entry: times[i - 1] });
                x = y;
            }
        }
        if b != x {
            segments.push(Segment { state: b, entry: times[n - 1] });
        }
        report(SamplePath::new(horizon, segments)?)
    }
}

/// Poisson(`mean`) mass at `m`, computed in log space.
pub(crate) fn poisson_mass(mean: f64, m: usize) -> f64 {
    if mean == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let m = m as f64;
    (m * mean.ln() - mean - ln_gamma(m + 1.0)).exp()
}
