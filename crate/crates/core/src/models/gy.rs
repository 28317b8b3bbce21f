use nalgebra::DMatrix;

use super::genetic_code::GeneticCode;
use super::{check_frequencies, check_positive, BuiltModel};
use crate::error::{Error, Result};
use crate::rate_matrix::{RateMatrix, StateSpace};

const DEFAULT_TABLE: &str = include_str!("../../data/gy_codon_freqs.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct GyParams {
    pub kappa: f64,
    pub omega: f64,
    /// Frequencies of the sense codons of `genetic_code`, in TCAG order.
    pub codon_freqs: Vec<f64>,
    pub genetic_code: GeneticCode,
    pub calibrate: bool,
}

impl Default for GyParams {
    /// `kappa = 2`, `omega = 0.01`, bundled codon usage, standard code, calibrated.
    fn default() -> Self {
        Self {
            kappa: 2.0,
            omega: 0.01,
            codon_freqs: default_codon_frequencies().expect("bundled codon table is valid"),
            genetic_code: GeneticCode::standard(),
            calibrate: true,
        }
    }
}

/// Parses `codon,frequency` rows (`#` comments allowed) into a vector over
/// the sense codons of `code`.
pub fn parse_codon_frequencies(text: &str, code: &GeneticCode) -> Result<Vec<f64>> {
    let sense = code.sense_codons();
    let mut freqs = vec![f64::NAN; sense.len()];
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next().map(|h| h.replace(' ', "")) != Some("codon,frequency".into()) {
        return Err(Error::Parse("codon table must start with a 'codon,frequency' header".into()));
    }
    for line in lines {
        let (codon, value) =
            line.split_once(',').ok_or_else(|| Error::Parse(format!("malformed codon table row '{line}'")))?;
        let codon = codon.trim().to_ascii_uppercase();
        let k = sense
            .iter()
            .position(|c| *c == codon)
            .ok_or_else(|| Error::InvalidFrequencyVector(format!("'{codon}' is not a sense codon")))?;
        freqs[k] = value.trim().parse().map_err(|_| Error::Parse(format!("bad frequency in row '{line}'")))?;
    }
    if let Some(k) = freqs.iter().position(|f| f.is_nan()) {
        return Err(Error::InvalidFrequencyVector(format!("missing frequency for {}", sense[k])));
    }
    Ok(freqs)
}

/// The bundled codon-usage table for the standard code.
pub fn default_codon_frequencies() -> Result<Vec<f64>> {
    parse_codon_frequencies(DEFAULT_TABLE, &GeneticCode::standard())
}

fn is_transition(x: char, y: char) -> bool {
    matches!((x, y), ('A', 'G') | ('G', 'A') | ('C', 'T') | ('T', 'C'))
}

/// Codon model on the sense codons: single-position changes at rate
/// `pi_b`, times `kappa` for transitions and `omega` for amino-acid changes.
pub fn build_gy(p: &GyParams) -> Result<BuiltModel> {
    check_positive("kappa", p.kappa)?;
    check_positive("omega", p.omega)?;
    let codons = p.genetic_code.sense_codons();
    let n = codons.len();
    let pi = check_frequencies(&p.codon_freqs, n)?;
    let chars: Vec<Vec<char>> = codons.iter().map(|c| c.chars().collect()).collect();
    let aa: Vec<char> = codons.iter().map(|c| p.genetic_code.amino_acid(c).unwrap()).collect();
    let rates = DMatrix::from_fn(n, n, |i, j| {
        let diffs: Vec<usize> = (0..3).filter(|&k| chars[i][k] != chars[j][k]).collect();
        if diffs.len() != 1 {
            return 0.0;
        }
        let k = diffs[0];
        let mut r = p.codon_freqs[j];
        if is_transition(chars[i][k], chars[j][k]) {
            r *= p.kappa;
        }
        if aa[i] != aa[j] {
            r *= p.omega;
        }
        r
    });
    let q = RateMatrix::from_off_diagonal(rates, StateSpace::new(codons)?)?;
    Ok(BuiltModel::new(q, pi, p.calibrate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bundled_table_extremes() {
        let code = GeneticCode::standard();
        let f = default_codon_frequencies().unwrap();
        let sense = code.sense_codons();
        let at = |c: &str| f[sense.iter().position(|s| s == c).unwrap()];
        assert_relative_eq!(f.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(at("GGG"), 0.0042);
        assert_eq!(at("GAG"), 0.0426);
        assert_eq!(at("AAG"), 0.0396);
        assert_eq!(f.iter().copied().fold(f64::INFINITY, f64::min), 0.0042);
        assert_eq!(f.iter().copied().fold(0.0, f64::max), 0.0426);
    }

    #[test]
    fn gy_entries_and_sparsity() {
        let m = build_gy(&GyParams::default()).unwrap();
        let q = &m.q;
        let s = {
            let raw = build_gy(&GyParams { calibrate: false, ..GyParams::default() }).unwrap();
            raw.q.mean_exit_rate(&raw.pi)
        };
        let (aaa, aag, acg) = (q.index_of("AAA").unwrap(), q.index_of("AAG").unwrap(), q.index_of("ACG").unwrap());
        assert_relative_eq!(q.rate(aaa, aag), 2.0 * 0.0396 / s, max_relative = 1e-14);
        assert_eq!(q.rate(aaa, acg), 0.0);
        let aac = q.index_of("AAC").unwrap();
        assert_relative_eq!(q.rate(aaa, aac), 0.01 * m.pi.get(aac) / s, max_relative = 1e-14);
        for i in 0..q.n() {
            let nonzero = (0..q.n()).filter(|&j| j != i && q.rate(i, j) > 0.0).count();
            assert!(nonzero <= 9);
        }
        assert!(m.q.detailed_balance_residual(&m.pi).0 < 1e-12);
        assert!((m.q.mean_exit_rate(&m.pi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_amino_acid_code_has_no_omega() {
        let table: String = (0..64).map(|k| if [10, 11, 14].contains(&k) { '*' } else { 'K' }).collect();
        let code = GeneticCode::from_table(&table).unwrap();
        assert_eq!(code.sense_codons(), GeneticCode::standard().sense_codons());
        let n = code.sense_codons().len();
        assert_eq!(n, 61);
        let freqs = vec![1.0 / 61.0; 61];
        let a = build_gy(&GyParams {
            kappa: 2.0,
            omega: 1.0,
            codon_freqs: freqs.clone(),
            genetic_code: code.clone(),
            calibrate: false,
        })
        .unwrap();
        let b =
            build_gy(&GyParams { kappa: 2.0, omega: 0.3, codon_freqs: freqs, genetic_code: code, calibrate: false })
                .unwrap();
        assert_eq!(a.q, b.q);
        for i in 0..61 {
            for j in 0..61 {
                let r = a.q.rate(i, j);
                assert!(i == j || r == 0.0 || r == 1.0 / 61.0 || r == 2.0 / 61.0);
            }
        }
    }

    #[test]
    fn bad_frequency_vectors() {
        let p = GyParams { codon_freqs: vec![1.0 / 60.0; 60], ..GyParams::default() };
        assert!(matches!(build_gy(&p), Err(Error::InvalidFrequencyVector(_))));
        assert!(parse_codon_frequencies("codon,frequency\nTAA,0.1\n", &GeneticCode::standard()).is_err());
    }
}
