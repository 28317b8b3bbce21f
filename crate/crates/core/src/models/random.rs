use nalgebra::DMatrix;

use super::genetic_code::GeneticCode;
use super::BuiltModel;
use crate::error::Result;
use crate::random::RandomStream;
use crate::rate_matrix::{RateMatrix, StateSpace, StationaryDistribution};

/// `pi ~ Dirichlet(1, ..., 1)` via normalised unit exponentials.
fn flat_dirichlet(n: usize, rng: &mut RandomStream) -> Result<StationaryDistribution> {
    let draws: Vec<f64> = (0..n).map(|_| rng.exponential(1.0)).collect();
    let total: f64 = draws.iter().sum();
    StationaryDistribution::new(draws.iter().map(|x| x / total).collect())
}

/// `Q_ij = S_ij pi_j` with symmetric `S`, calibrated. `allowed(i, j)` masks
/// structural zeros; masked pairs still consume their exponential draw.
fn reversible_from_mask(
    states: StateSpace,
    rng: &mut RandomStream,
    allowed: impl Fn(usize, usize) -> bool,
) -> Result<BuiltModel> {
    let n = states.len();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let x = rng.exponential(1.0);
            if allowed(i, j) {
                s[(i, j)] = x;
                s[(j, i)] = x;
            }
        }
    }
    let pi = flat_dirichlet(n, rng)?;
    let rates = DMatrix::from_fn(n, n, |i, j| s[(i, j)] * pi.get(j));
    let q = RateMatrix::from_off_diagonal(rates, states)?;
    Ok(BuiltModel::new(q, pi, true))
}

/// Random reversible, calibrated `n`-state matrix: `S_ij ~ Exp(1)`,
/// `pi ~ Dirichlet(1, ..., 1)`, `Q_ij = S_ij pi_j`.
pub fn random_reversible(n: usize, rng: &mut RandomStream) -> Result<BuiltModel> {
    reversible_from_mask(StateSpace::numbered(n)?, rng, |_, _| true)
}

/// As [`random_reversible`] on the 61 sense codons, with `S_ij = 0` unless
/// the codons differ at exactly one position.
pub fn random_sparse_codon(rng: &mut RandomStream) -> Result<BuiltModel> {
    let codons = GeneticCode::standard().sense_codons();
    let chars: Vec<Vec<char>> = codons.iter().map(|c| c.chars().collect()).collect();
    let one_apart = |i: usize, j: usize| (0..3).filter(|&k| chars[i][k] != chars[j][k]).count() == 1;
    reversible_from_mask(StateSpace::new(codons.clone())?, rng, one_apart)
}
