//! Validated generators of finite-state continuous-time Markov chains.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row sums must vanish to this fraction of `max|Q|`.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Supplied diagonals off by less than this fraction of `max|Q|` are snapped
/// silently; larger deviations need an explicit repair.
pub const DIAGONAL_SNAP_TOL: f64 = 1e-9;

/// Ordered, uniquely labelled states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::Labels(format!("need at least 2 states, got {}", labels.len())));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::Labels(format!("state {i} has an empty label")));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::Labels(format!("duplicate label `{label}`")));
            }
        }
        Ok(Self { labels, index })
    }

    /// States labelled `0`, `1`, ... `n-1`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index.get(label).copied().ok_or_else(|| Error::UnknownState(label.to_string()))
    }
}

/// A probability vector `pi` with `pi Q = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
}

impl StationaryDistribution {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidFrequencyVector("entries must be positive".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidFrequencyVector(format!("sums to {total}, expected 1")));
        }
        Ok(Self { pi })
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    pub fn get(&self, i: usize) -> f64 {
        self.pi[i]
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// A validated rate matrix. The diagonal always equals minus the sum of the
/// off-diagonal entries of its row, so `exit_rate(i) == -q[(i, i)]` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    states: StateSpace,
    q: DMatrix<f64>,
    exit_rates: Vec<f64>,
    max_abs: f64,
}

impl RateMatrix {
    /// Validates a full square matrix (diagonal included).
    ///
    /// Diagonals that disagree with the off-diagonal row sums by more than
    /// `DIAGONAL_SNAP_TOL * max|Q|` are rejected unless `repair` is set, in
    /// which case they are recomputed.
    pub fn validate(raw: DMatrix<f64>, states: StateSpace, repair: bool) -> Result<Self> {
        let (rows, cols) = raw.shape();
        if rows != cols || rows < 2 {
            return Err(Error::Shape { rows, cols });
        }
        if states.len() != rows {
            return Err(Error::Labels(format!("{} labels for a {rows}x{rows} matrix", states.len())));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("rate matrix contains non-finite entries".into()));
        }
        for i in 0..rows {
            for j in 0..cols {
                if i != j && raw[(i, j)] < 0.0 {
                    return Err(Error::NegativeRate { row: i, col: j, value: raw[(i, j)] });
                }
            }
        }
        let max_abs = raw.amax();
        let mut q = raw;
        let mut exit_rates = Vec::with_capacity(rows);
        for i in 0..rows {
            let off: f64 = (0..rows).filter(|&j| j != i).map(|j| q[(i, j)]).sum();
            let deviation = (q[(i, i)] + off).abs();
            if deviation > DIAGONAL_SNAP_TOL * max_abs && !repair {
                return Err(Error::RowSumViolation { row: i, sum: q[(i, i)] + off });
            }
            if off <= 0.0 {
                return Err(Error::ZeroExitRate { state: i });
            }
            q[(i, i)] = -off;
            exit_rates.push(off);
        }
        let max_abs = q.amax();
        Ok(Self { states, q, exit_rates, max_abs })
    }

    /// Builds from a row-major list of rows, diagonal included.
    pub fn from_rows(rows: &[Vec<f64>], states: StateSpace) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Shape { rows: n, cols: bad.len() });
        }
        let raw = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::validate(raw, states, false)
    }

    /// Builds from off-diagonal rates; the diagonal of `rates` is ignored.
    pub fn from_off_diagonal(rates: DMatrix<f64>, states: StateSpace) -> Result<Self> {
        Self::validate(rates, states, true)
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit_rates[i]
    }

    pub fn exit_rates(&self) -> &[f64] {
        &self.exit_rates
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit_rates.iter().copied().fold(0.0, f64::max)
    }

    /// `max|Q|`, the scale all relative tolerances refer to.
    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite(), "scale factor must be positive");
        let n = self.n();
        let mut q = &self.q * factor;
        let mut exit_rates = Vec::with_capacity(n);
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| q[(i, j)]).sum();
            q[(i, i)] = -off;
            exit_rates.push(off);
        }
        Self { states: self.states.clone(), exit_rates, max_abs: q.amax(), q }
    }

    /// Solves `pi Q = 0`, `sum(pi) = 1` as an overdetermined system with the
    /// normalisation row appended.
    pub fn stationary_distribution(&self) -> Result<StationaryDistribution> {
        let n = self.n();
        let scale = self.max_abs;
        let mut a = DMatrix::<f64>::zeros(n + 1, n);
        for i in 0..n {
            for j in 0..n {
                a[(j, i)] = self.q[(i, j)] / scale;
            }
            a[(n, i)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(n + 1);
        rhs[n] = 1.0;

        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-10 * smax) {
            return Err(Error::SingularSystem);
        }
        let solve = |b: &DVector<f64>| svd.solve(b, 0.0).map_err(|e| Error::NumericalBreakdown(e.to_string()));
        let mut sol = solve(&rhs)?;
        // one step of iterative refinement
        sol += solve(&(&rhs - &a * &sol))?;
        if sol.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::SingularSystem);
        }
        let total = sol.sum();
        let pi: Vec<f64> = sol.iter().map(|p| p / total).collect();

        let residual = (0..n).map(|j| (0..n).map(|i| pi[i] * self.q[(i, j)]).sum::<f64>().abs()).fold(0.0, f64::max);
        if residual > 1e-10 * scale.max(1.0) {
            return Err(Error::SingularSystem);
        }
        StationaryDistribution::new(pi)
    }

    /// Average exit rate under `pi`, i.e. the expected number of jumps per unit time at stationarity.
    pub fn mean_exit_rate(&self, pi: &StationaryDistribution) -> f64 {
        self.exit_rates.iter().zip(pi.probs()).map(|(q, p)| q * p).sum()
    }

    /// Rescales so that one jump is expected per unit time at stationarity.
    /// Returns the calibrated matrix and the divisor `s`.
    pub fn calibrate(&self) -> Result<(RateMatrix, f64)> {
        let pi = self.stationary_distribution()?;
        let s = self.mean_exit_rate(&pi);
        Ok((self.scaled(1.0 / s), s))
    }

    /// Largest `|pi_i Q_ij - pi_j Q_ji|`.
    pub fn detailed_balance_residual(&self, pi: &StationaryDistribution) -> (f64, usize, usize) {
        let n = self.n();
        let mut worst = (0.0, 0, 0);
        for i in 0..n {
            for j in (i + 1)..n {
                let r = (pi.get(i) * self.q[(i, j)] - pi.get(j) * self.q[(j, i)]).abs();
                if r > worst.0 {
                    worst = (r, i, j);
                }
            }
        }
        worst
    }

    /// Fails unless detailed balance holds within `tol * max|Q|`.
    pub fn check_detailed_balance(&self, pi: &StationaryDistribution, tol: f64) -> Result<()> {
        let (r, i, j) = self.detailed_balance_residual(pi);
        if r > tol * self.max_abs {
            return Err(Error::DetailedBalanceViolation {
                i,
                j,
                lhs: pi.get(i) * self.q[(i, j)],
                rhs: pi.get(j) * self.q[(j, i)],
            });
        }
        Ok(())
    }

    /// Embedded jump chain: picks `c != i` with probability `Q_ic / Q_i`
    /// given `u` uniform on `[0, 1)`.
    pub fn jump_target(&self, i: usize, u: f64) -> usize {
        let target = u * self.exit_rates[i];
        let mut acc = 0.0;
        let mut last = i;
        for c in 0..self.n() {
            if c == i {
                continue;
            }
            let r = self.q[(i, c)];
            if r <= 0.0 {
                continue;
            }
            acc += r;
            last = c;
            if target < acc {
                return c;
            }
        }
        last
    }

    /// Index of the state with the given label.
    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.states.index_of(label)
    }

    /// Rates equal entrywise (labels ignored).
    pub fn same_rates(&self, other: &RateMatrix) -> bool {
        self.q == other.q
    }
}
