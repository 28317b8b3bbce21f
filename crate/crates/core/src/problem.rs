use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rate_matrix::RateMatrix;

/// Sample `X` on `[0, horizon]` given `X(0) = a` and `X(horizon) = b`.
#[derive(Debug, Clone)]
pub struct EndpointProblem {
    pub q: Arc<RateMatrix>,
    pub a: usize,
    pub b: usize,
    pub horizon: f64,
}

impl EndpointProblem {
    pub fn new(q: Arc<RateMatrix>, a: usize, b: usize, horizon: f64) -> Result<Self> {
        let n = q.n();
        if a >= n || b >= n {
            return Err(Error::InvalidProblem(format!("endpoints ({a}, {b}) out of range for {n} states")));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidProblem(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        if horizon == 0.0 && a != b {
            return Err(Error::InvalidProblem("zero horizon requires a == b".into()));
        }
        Ok(Self { q, a, b, horizon })
    }

    /// Resolves endpoint labels against the matrix's state space.
    pub fn from_labels(q: Arc<RateMatrix>, a: &str, b: &str, horizon: f64) -> Result<Self> {
        let (a, b) = (q.index_of(a)?, q.index_of(b)?);
        Self::new(q, a, b, horizon)
    }
}

/// Splits a discretely observed trajectory `[(T_0 = 0, x_0), (T_1, x_1), ...]`
/// into independent bridges between consecutive observations.
pub fn partition_observations(q: &Arc<RateMatrix>, observations: &[(f64, usize)]) -> Result<Vec<EndpointProblem>> {
    match observations.first() {
        None => return Ok(Vec::new()),
        Some(&(t0, _)) if t0 != 0.0 => return Err(Error::NonMonotoneTimes),
        _ => {}
    }
    observations
        .windows(2)
        .map(|w| {
            let ((t0, a), (t1, b)) = (w[0], w[1]);
            if !(t1 > t0) {
                return Err(Error::NonMonotoneTimes);
            }
            EndpointProblem::new(q.clone(), a, b, t1 - t0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_matrix::StateSpace;

    fn q() -> Arc<RateMatrix> {
        let rows = vec![
            vec![-1.0, 0.5, 0.25, 0.25],
            vec![0.5, -1.0, 0.25, 0.25],
            vec![0.25, 0.25, -1.0, 0.5],
            vec![0.25, 0.25, 0.5, -1.0],
        ];
        Arc::new(RateMatrix::from_rows(&rows, StateSpace::new(["A", "G", "C", "T"]).unwrap()).unwrap())
    }

    #[test]
    fn partitions_consecutive_pairs() {
        let q = q();
        let (a, g) = (q.index_of("A").unwrap(), q.index_of("G").unwrap());
        let one = partition_observations(&q, &[(0.0, a), (1.0, g)]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!((one[0].a, one[0].b, one[0].horizon), (a, g, 1.0));

        let two = partition_observations(&q, &[(0.0, a), (1.0, g), (3.0, g)]).unwrap();
        assert_eq!(two.iter().map(|p| p.horizon).collect::<Vec<_>>(), vec![1.0, 2.0]);
        assert_eq!((two[1].a, two[1].b), (g, g));

        assert!(partition_observations(&q, &[(0.0, a)]).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_times() {
        let q = q();
        assert_eq!(partition_observations(&q, &[(0.0, 0), (1.0, 1), (1.0, 2)]).unwrap_err(), Error::NonMonotoneTimes);
        assert_eq!(partition_observations(&q, &[(0.5, 0), (1.0, 1)]).unwrap_err(), Error::NonMonotoneTimes);
    }

    #[test]
    fn zero_horizon_needs_equal_endpoints() {
        let q = q();
        assert!(EndpointProblem::new(q.clone(), 0, 0, 0.0).is_ok());
        assert!(EndpointProblem::new(q.clone(), 0, 1, 0.0).is_err());
        assert!(EndpointProblem::new(q, 0, 4, 1.0).is_err());
    }
}
