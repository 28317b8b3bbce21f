//! Sample paths on `[0, T]` and their sufficient statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The chain enters `state` at time `entry` and stays until the next segment
/// (or the horizon).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub state: usize,
    pub entry: f64,
}

/// A piecewise-constant trajectory. The first segment enters at 0, entry
/// times strictly increase and stay below the horizon, and consecutive states
/// differ. A zero horizon is allowed only as the degenerate single-segment path.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    horizon: f64,
    segments: Vec<Segment>,
}

impl SamplePath {
    pub fn new(horizon: f64, segments: Vec<Segment>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidProblem(format!("invalid sample path: {msg}")));
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return bad("horizon must be finite and >= 0");
        }
        let Some(first) = segments.first() else {
            return bad("no segments");
        };
        if first.entry != 0.0 {
            return bad("first segment must enter at 0");
        }
        if horizon == 0.0 && segments.len() > 1 {
            return bad("a zero-horizon path cannot jump");
        }
        for w in segments.windows(2) {
            if !(w[1].entry > w[0].entry) {
                return bad("entry times must strictly increase");
            }
            if w[1].state == w[0].state {
                return bad("consecutive segments share a state");
            }
        }
        if segments.len() > 1 && !(segments.last().unwrap().entry < horizon) {
            return bad("last entry time must be below the horizon");
        }
        Ok(Self { horizon, segments })
    }

    pub fn constant(state: usize, horizon: f64) -> Self {
        Self { horizon, segments: vec![Segment { state, entry: 0.0 }] }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start_state(&self) -> usize {
        self.segments[0].state
    }

    pub fn end_state(&self) -> usize {
        self.segments.last().unwrap().state
    }

    pub fn jump_count(&self) -> usize {
        self.segments.len() - 1
    }

    /// `(state, t_in, t_out)` for each segment.
    pub fn intervals(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.segments.iter().enumerate().map(move |(k, s)| {
            let t_out = self.segments.get(k + 1).map_or(self.horizon, |n| n.entry);
            (s.state, s.entry, t_out)
        })
    }

    /// State occupied at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.segments.partition_point(|s| s.entry <= t);
        self.segments[k.saturating_sub(1)].state
    }

    /// Total time spent in `state`.
    pub fn time_in(&self, state: usize) -> f64 {
        self.intervals().filter(|(s, ..)| *s == state).map(|(_, a, b)| b - a).sum()
    }

    pub fn sufficient_stats(&self, n: usize) -> SufficientStats {
        let mut stats = SufficientStats::zeros(n);
        for w in self.segments.windows(2) {
            stats.jump_counts[w[0].state][w[1].state] += 1;
        }
        for (s, a, b) in self.intervals() {
            stats.dwell_times[s] += b - a;
        }
        stats
    }

    /// Splits into `[0, t1]` and `[t1, T]` (the latter shifted to start at 0).
    ///
    /// Segments that end exactly at `t1` stay on the left. A jump occurring
    /// exactly at `t1` is therefore counted by neither half: the left path ends
    /// in the old state and the right path starts in the new one.
    pub fn split_at(&self, t1: f64) -> Result<(SamplePath, SamplePath)> {
        if !(t1 > 0.0 && t1 < self.horizon) {
            return Err(Error::InvalidParameter(format!("split time {t1} outside (0, T)")));
        }
        let left: Vec<Segment> = self.segments.iter().copied().filter(|s| s.entry < t1).collect();
        let mut right = vec![Segment { state: self.state_at(t1), entry: 0.0 }];
        right.extend(
            self.segments.iter().filter(|s| s.entry > t1).map(|s| Segment { state: s.state, entry: s.entry - t1 }),
        );
        Ok((Self::new(t1, left)?, Self::new(self.horizon - t1, right)?))
    }
}

/// Realised jump counts `N_ij` and dwell times `D_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub jump_counts: Vec<Vec<u64>>,
    pub dwell_times: Vec<f64>,
}

impl SufficientStats {
    pub fn zeros(n: usize) -> Self {
        Self { jump_counts: vec![vec![0; n]; n], dwell_times: vec![0.0; n] }
    }

    pub fn total_jumps(&self) -> u64 {
        self.jump_counts.iter().flatten().sum()
    }

    pub fn total_time(&self) -> f64 {
        self.dwell_times.iter().sum()
    }

    /// Entrywise sum.
    pub fn merge(&self, other: &SufficientStats) -> SufficientStats {
        let mut out = self.clone();
        for (row, orow) in out.jump_counts.iter_mut().zip(&other.jump_counts) {
            for (x, y) in row.iter_mut().zip(orow) {
                *x += y;
            }
        }
        for (x, y) in out.dwell_times.iter_mut().zip(&other.dwell_times) {
            *x += y;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn seg(state: usize, entry: f64) -> Segment {
        Segment { state, entry }
    }

    #[test]
    fn constant_path_stats() {
        let p = SamplePath::constant(0, 1.0);
        let s = p.sufficient_stats(3);
        assert_eq!(s.total_jumps(), 0);
        assert_eq!(s.dwell_times, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_jump_stats() {
        let p = SamplePath::new(1.0, vec![seg(0, 0.0), seg(1, 0.3)]).unwrap();
        let s = p.sufficient_stats(2);
        assert_eq!(s.jump_counts[0][1], 1);
        assert_abs_diff_eq!(s.dwell_times[0], 0.3);
        assert_abs_diff_eq!(s.dwell_times[1], 0.7);
        assert_eq!(p.state_at(0.3), 1);
        assert_eq!(p.state_at(0.29), 0);
    }

    #[test]
    fn invalid_paths_rejected() {
        assert!(SamplePath::new(1.0, vec![seg(0, 0.1)]).is_err());
        assert!(SamplePath::new(1.0, vec![seg(0, 0.0), seg(0, 0.5)]).is_err());
        assert!(SamplePath::new(1.0, vec![seg(0, 0.0), seg(1, 0.5), seg(2, 0.5)]).is_err());
        assert!(SamplePath::new(1.0, vec![seg(0, 0.0), seg(1, 1.0)]).is_err());
        assert!(SamplePath::new(0.0, vec![seg(0, 0.0)]).is_ok());
    }

    #[test]
    fn jump_on_split_boundary_is_dropped() {
        let p = SamplePath::new(2.0, vec![seg(0, 0.0), seg(1, 1.0), seg(0, 1.5)]).unwrap();
        let (l, r) = p.split_at(1.0).unwrap();
        assert_eq!(l.end_state(), 0);
        assert_eq!(r.start_state(), 1);
        let merged = l.sufficient_stats(2).merge(&r.sufficient_stats(2));
        let whole = p.sufficient_stats(2);
        assert_eq!(merged.total_jumps() + 1, whole.total_jumps());
        assert_eq!(merged.dwell_times, whole.dwell_times);
    }
}
