//! Endpoint-conditioned samplers and the unconditioned forward simulator.

mod direct;
mod forward;
mod rejection;
mod root;
mod uniformization;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::SamplePath;
use crate::problem::EndpointProblem;
use crate::random::RandomStream;
use crate::rate_matrix::RateMatrix;

pub use direct::{
    DirectKernel, FirstTransition, WaitingTimeCdf, DEFAULT_ROOT_TOL, DEGENERATE_RATE_TOL, NEGATIVE_MASS_TOL,
    ROOT_MAX_ITER, UNREACHABLE_PROBABILITY,
};
pub use forward::{conditional_first_jump_time, forward_sample};
pub use rejection::{rejection_proposal, rejection_sample};
pub use uniformization::{series_cap, UniformizationKernel, SERIES_MASS_TOL};

/// One sampled path with its cost counters.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    pub path: SamplePath,
    /// Proposals generated (rejection only; 1 otherwise).
    pub attempts: u64,
    /// Realised recursion count `L`.
    pub recursion_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Rejection,
    Uniformization,
    Direct,
}

impl SamplerKind {
    /// Tie-break order: rejection, uniformization, direct.
    pub const ALL: [SamplerKind; 3] = [SamplerKind::Rejection, SamplerKind::Uniformization, SamplerKind::Direct];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Rejection => "rejection",
            SamplerKind::Uniformization => "uniformization",
            SamplerKind::Direct => "direct",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rejection" => Ok(SamplerKind::Rejection),
            "uniformization" => Ok(SamplerKind::Uniformization),
            "direct" => Ok(SamplerKind::Direct),
            other => Err(Error::InvalidParameter(format!("unknown sampler '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RejectionConfig {
    pub max_attempts: u64,
}

impl RejectionConfig {
    pub fn new(max_attempts: u64) -> Result<Self> {
        if max_attempts == 0 {
            return Err(Error::InvalidParameter("max_attempts must be >= 1".into()));
        }
        Ok(Self { max_attempts })
    }
}

impl Default for RejectionConfig {
    fn default() -> Self {
        Self { max_attempts: 1_000_000 }
    }
}

/// A sampler with its per-matrix precomputation done.
#[derive(Debug)]
pub enum PreparedSampler {
    Rejection(RejectionConfig),
    Direct(DirectKernel),
    Uniformization(UniformizationKernel),
}

impl PreparedSampler {
    pub fn prepare(kind: SamplerKind, q: &Arc<RateMatrix>, cfg: RejectionConfig) -> Result<Self> {
        Ok(match kind {
            SamplerKind::Rejection => PreparedSampler::Rejection(cfg),
            SamplerKind::Direct => PreparedSampler::Direct(DirectKernel::build(q.clone())?),
            SamplerKind::Uniformization => PreparedSampler::Uniformization(UniformizationKernel::build(q.clone())?),
        })
    }

    pub fn kind(&self) -> SamplerKind {
        match self {
            PreparedSampler::Rejection(_) => SamplerKind::Rejection,
            PreparedSampler::Direct(_) => SamplerKind::Direct,
            PreparedSampler::Uniformization(_) => SamplerKind::Uniformization,
        }
    }

    pub fn sample(&self, problem: &EndpointProblem, rng: &mut RandomStream) -> Result<SampleReport> {
        match self {
            PreparedSampler::Rejection(cfg) => rejection_sample(problem, cfg, rng),
            PreparedSampler::Direct(k) => k.sample(problem, rng),
            PreparedSampler::Uniformization(k) => k.sample(problem, rng),
        }
    }

    /// `k` paths, path `i` drawn from sub-stream `i` of `rng`, in parallel.
    pub fn sample_many(&self, problem: &EndpointProblem, k: usize, rng: &RandomStream) -> BatchOutcome {
        let results: Vec<Result<SampleReport>> =
            (0..k).into_par_iter().map(|i| self.sample(problem, &mut rng.substream(i as u64))).collect();
        let mut outcome = BatchOutcome { reports: Vec::with_capacity(k), failures: Vec::new() };
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(report) => outcome.reports.push((i, report)),
                Err(e) => outcome.failures.push((i, e)),
            }
        }
        outcome
    }
}

/// Successful paths and per-path failures, each tagged with its path index.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub reports: Vec<(usize, SampleReport)>,
    pub failures: Vec<(usize, Error)>,
}

impl BatchOutcome {
    pub fn paths(&self) -> impl Iterator<Item = &SampleReport> {
        self.reports.iter().map(|(_, r)| r)
    }
}

/// Samples `k` bridges with one shared kernel. Fails only if every path fails,
/// in which case the error of the first path is returned.
pub fn sample_batch(
    kind: SamplerKind,
    problem: &EndpointProblem,
    k: usize,
    rng: &RandomStream,
    cfg: RejectionConfig,
) -> Result<BatchOutcome> {
    if k == 0 {
        return Err(Error::InvalidParameter("path count must be >= 1".into()));
    }
    let sampler = PreparedSampler::prepare(kind, &problem.q, cfg)?;
    let outcome = sampler.sample_many(problem, k, rng);
    if outcome.reports.is_empty() {
        return Err(outcome.failures.into_iter().next().unwrap().1);
    }
    Ok(outcome)
}
