use crate::path::{SamplePath, Segment};
use crate::random::RandomStream;
use crate::rate_matrix::RateMatrix;

/// Unconditioned simulation from `a` over `[0, horizon]`: exponential dwell
/// times with rate `Q_state`, jumps drawn with masses `Q_ac / Q_a`.
pub fn forward_sample(q: &RateMatrix, a: usize, horizon: f64, rng: &mut RandomStream) -> SamplePath {
    let mut segments = vec![Segment { state: a, entry: 0.0 }];
    extend_forward(q, a, 0.0, horizon, rng, &mut segments);
    SamplePath::new(horizon, segments).expect("forward simulation yields valid paths")
}

/// Continues a path from `state` entered at `start` until `horizon`,
/// appending segments. Returns the number of jumps made.
pub(crate) fn extend_forward(
    q: &RateMatrix,
    mut state: usize,
    start: f64,
    horizon: f64,
    rng: &mut RandomStream,
    segments: &mut Vec<Segment>,
) -> u64 {
    let mut t = start;
    let mut jumps = 0;
    loop {
        t += rng.exponential(q.exit_rate(state));
        if t >= horizon {
            return jumps;
        }
        state = q.jump_target(state, rng.uniform());
        segments.push(Segment { state, entry: t });
        jumps += 1;
    }
}

/// Inverse CDF of the first jump time given at least one jump in `[0, horizon]`:
/// `-log(1 - u (1 - exp(-horizon Q_a))) / Q_a`, kept strictly inside `(0, horizon)`.
pub fn conditional_first_jump_time(exit_rate: f64, horizon: f64, u: f64) -> f64 {
    let mass = -(-horizon * exit_rate).exp_m1();
    let tau = -(-u * mass).ln_1p() / exit_rate;
    tau.clamp(f64::MIN_POSITIVE, horizon.next_down())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_jump_closed_form() {
        let expected = -(1.0 - 0.5 * (1.0 - (-1.0f64).exp())).ln();
        assert_abs_diff_eq!(conditional_first_jump_time(1.0, 1.0, 0.5), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.3798854930417225, epsilon = 1e-12);
    }

    #[test]
    fn first_jump_limits() {
        let lo = conditional_first_jump_time(2.0, 3.0, 1e-12);
        assert!(lo > 0.0 && lo < 1e-10);
        let hi = conditional_first_jump_time(2.0, 3.0, 1.0 - 1e-12);
        assert!(hi < 3.0 && hi > 2.9);
        let extreme = conditional_first_jump_time(2.0, 3.0, 1.0);
        assert!(extreme < 3.0);
    }
}
