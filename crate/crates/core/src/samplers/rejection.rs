use crate::error::{Error, Result};
use crate::path::{SamplePath, Segment};
use crate::problem::EndpointProblem;
use crate::random::RandomStream;
use crate::rate_matrix::RateMatrix;

use super::forward::{conditional_first_jump_time, extend_forward};
use super::{RejectionConfig, SampleReport};

/// One proposal of the modified rejection scheme: a plain forward path when
/// `a == b`, otherwise a forward path whose first jump is forced into
/// `(0, horizon)`. Returns the path and the number of jumps simulated.
pub fn rejection_proposal(
    q: &RateMatrix,
    a: usize,
    b: usize,
    horizon: f64,
    rng: &mut RandomStream,
) -> (SamplePath, u64) {
    let mut segments = vec![Segment { state: a, entry: 0.0 }];
    let jumps = if a == b {
        extend_forward(q, a, 0.0, horizon, rng, &mut segments)
    } else {
        let tau = conditional_first_jump_time(q.exit_rate(a), horizon, rng.uniform_open());
        let next = q.jump_target(a, rng.uniform());
        segments.push(Segment { state: next, entry: tau });
        1 + extend_forward(q, next, tau, horizon, rng, &mut segments)
    };
    let path = SamplePath::new(horizon, segments).expect("forward simulation yields valid paths");
    (path, jumps)
}

/// Repeats proposals until one ends in `b`. `recursion_steps` totals the
/// jumps simulated over every attempt, accepted or not.
pub fn rejection_sample(
    problem: &EndpointProblem,
    cfg: &RejectionConfig,
    rng: &mut RandomStream,
) -> Result<SampleReport> {
    let EndpointProblem { ref q, a, b, horizon } = *problem;
    if horizon == 0.0 {
        return Ok(SampleReport { path: SamplePath::constant(a, 0.0), attempts: 1, recursion_steps: 0 });
    }
    let mut steps = 0;
    for attempt in 1..=cfg.max_attempts {
        let (path, jumps) = rejection_proposal(q, a, b, horizon, rng);
        steps += jumps;
        if path.end_state() == b {
            return Ok(SampleReport { path, attempts: attempt, recursion_steps: steps });
        }
    }
    Err(Error::RejectionBudgetExceeded { attempts: cfg.max_attempts })
}
