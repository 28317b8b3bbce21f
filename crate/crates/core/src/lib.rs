//! Exact simulation of endpoint-conditioned continuous-time Markov chains.
//!
//! Three samplers are provided (modified rejection, direct, uniformization)
//! together with an analytic cost model that predicts their expense and picks
//! the cheapest for a given problem.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complexity;
pub mod error;
pub mod models;
pub mod path;
pub mod problem;
pub mod random;
pub mod rate_matrix;
pub mod samplers;
pub mod spectral;
pub mod validation;

pub use error::{Error, Result};
pub use path::{SamplePath, Segment, SufficientStats};
pub use problem::{partition_observations, EndpointProblem};
pub use random::RandomStream;
pub use rate_matrix::{RateMatrix, StateSpace, StationaryDistribution};
pub use samplers::{SampleReport, SamplerKind};
pub use spectral::{SpectralDecomposition, TransitionSource};
