//! Statistical checks that the samplers draw from the right conditional law.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::complexity::{
    acceptance_probability, expected_recursions_direct, expected_recursions_rejection,
    expected_recursions_uniformization,
};
use crate::error::{Error, Result};
use crate::problem::EndpointProblem;
use crate::random::RandomStream;
use crate::rate_matrix::RateMatrix;
use crate::samplers::{
    DirectKernel, PreparedSampler, RejectionConfig, SampleReport, SamplerKind, UniformizationKernel,
};
use crate::spectral::{SpectralDecomposition, TransitionSource};

/// Smallest pooled count per bin in a two-sample chi-square test.
pub const MIN_POOLED_COUNT: f64 = 10.0;
/// Smallest expected count per bin in a goodness-of-fit test.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).unwrap_or(f64::NAN)
}

/// Groups consecutive categories until each group's weight reaches `min`;
/// a short final group is merged into its predecessor. Returns group bounds.
fn group_bins(weights: &[f64], min: f64) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let (mut start, mut acc) = (0, 0.0);
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= min {
            groups.push((start, k + 1));
            start = k + 1;
            acc = 0.0;
        }
    }
    if start < weights.len() {
        match groups.last_mut() {
            Some(last) => last.1 = weights.len(),
            None => groups.push((0, weights.len())),
        }
    }
    groups
}

/// Two-sample chi-square homogeneity test on category counts.
pub fn chi_square_two_sample(x: &[u64], y: &[u64]) -> ChiSquareTest {
    let len = x.len().max(y.len());
    let get = |v: &[u64], k: usize| v.get(k).copied().unwrap_or(0) as f64;
    let pooled: Vec<f64> = (0..len).map(|k| get(x, k) + get(y, k)).collect();
    let (nx, ny) = (x.iter().sum::<u64>() as f64, y.iter().sum::<u64>() as f64);
    let total = nx + ny;
    let groups = group_bins(&pooled, MIN_POOLED_COUNT);
    let mut statistic = 0.0;
    for &(lo, hi) in &groups {
        let (ox, oy) = ((lo..hi).map(|k| get(x, k)).sum::<f64>(), (lo..hi).map(|k| get(y, k)).sum::<f64>());
        let p = (ox + oy) / total;
        if p > 0.0 {
            statistic += (ox - nx * p).powi(2) / (nx * p) + (oy - ny * p).powi(2) / (ny * p);
        }
    }
    let dof = groups.len().saturating_sub(1);
    ChiSquareTest { statistic, dof, p_value: chi_square_p(statistic, dof) }
}

/// Goodness-of-fit of category counts against probabilities. Mass not
/// covered by `probs` (and counts beyond it) form a final tail category.
pub fn chi_square_goodness_of_fit(observed: &[u64], probs: &[f64]) -> ChiSquareTest {
    let n: f64 = observed.iter().sum::<u64>() as f64;
    let len = observed.len().max(probs.len());
    let tail_mass = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    let mut expected: Vec<f64> = (0..len).map(|k| n * probs.get(k).copied().unwrap_or(0.0)).collect();
    let mut counts: Vec<f64> = (0..len).map(|k| observed.get(k).copied().unwrap_or(0) as f64).collect();
    if tail_mass * n > 1e-12 {
        expected.push(n * tail_mass);
        counts.push(0.0);
    }
    if probs.len() < observed.len() {
        // counts beyond the listed probabilities belong to the tail category
        let beyond: f64 = counts[probs.len()..len].iter().sum();
        counts.truncate(probs.len());
        expected.truncate(probs.len());
        counts.push(beyond);
        expected.push(n * tail_mass);
    }
    let groups = group_bins(&expected, MIN_EXPECTED_COUNT);
    let mut statistic = 0.0;
    let mut impossible = false;
    for &(lo, hi) in &groups {
        let e: f64 = expected[lo..hi].iter().sum();
        let o: f64 = counts[lo..hi].iter().sum();
        if e > 0.0 {
            statistic += (o - e).powi(2) / e;
        } else if o > 0.0 {
            impossible = true;
        }
    }
    if impossible {
        statistic = f64::INFINITY;
    }
    let dof = groups.len().saturating_sub(1);
    ChiSquareTest { statistic, dof, p_value: if impossible { 0.0 } else { chi_square_p(statistic, dof) } }
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `sum(num) / sum(den)` with its delta-method standard error.
pub fn ratio_and_se(num: &[f64], den: &[f64]) -> (f64, f64) {
    let n = num.len() as f64;
    let r = num.iter().sum::<f64>() / den.iter().sum::<f64>();
    let mean_den = den.iter().sum::<f64>() / n;
    let ss: f64 = num.iter().zip(den).map(|(x, y)| (x - r * y).powi(2)).sum();
    (r, (ss / (n * (n - 1.0))).sqrt() / mean_den)
}

/// Which family of checks a result belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckFamily {
    /// Samplers agree with each other.
    CrossSampler,
    /// Samplers agree with closed-form laws.
    AnalyticLaw,
    /// Mean recursion counts agree with the analytic expectations.
    Recursions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub family: CheckFamily,
    pub cell: String,
    pub check: String,
    /// A p-value for chi-square checks, `|z|` for standard-error checks.
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckResult {
    fn chi(family: CheckFamily, cell: &str, check: String, t: ChiSquareTest, significance: f64) -> Self {
        Self {
            family,
            cell: cell.into(),
            check,
            statistic: t.p_value,
            threshold: significance,
            passed: t.p_value > significance,
        }
    }

    fn z(family: CheckFamily, cell: &str, check: String, z: f64, band: f64) -> Self {
        Self { family, cell: cell.into(), check, statistic: z.abs(), threshold: band, passed: z.abs() <= band }
    }

    fn failure(family: CheckFamily, cell: &str, check: String, err: &Error) -> Self {
        Self {
            family,
            cell: cell.into(),
            check: format!("{check}: {err}"),
            statistic: f64::NAN,
            threshold: f64::NAN,
            passed: false,
        }
    }

    /// `p` for chi-square checks, `|z|` otherwise.
    pub fn is_chi_square(&self) -> bool {
        self.threshold < 1.0
    }
}

#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub paths: usize,
    pub significance: f64,
    pub se_band: f64,
    /// Endpoint pairs with a smaller acceptance probability are skipped.
    pub min_acceptance: f64,
    pub rejection: RejectionConfig,
    /// Negative control: swap the diagonal of the first row of `R` with that
    /// row's largest off-diagonal entry.
    pub corrupt_uniformization: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            significance: 0.001,
            se_band: 3.0,
            min_acceptance: 0.01,
            rejection: RejectionConfig::default(),
            corrupt_uniformization: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub cells: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn family(&self, family: CheckFamily) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(move |c| c.family == family)
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
        self.cells += other.cells;
    }
}

fn corrupted_kernel(q: &Arc<RateMatrix>, source: TransitionSource) -> UniformizationKernel {
    let clean = UniformizationKernel::new(q.clone(), source.clone());
    let mut r: DMatrix<f64> = clean.r().clone();
    let n = r.ncols();
    let j = (1..n).max_by(|&x, &y| r[(0, x)].total_cmp(&r[(0, y)])).unwrap();
    r.swap((0, 0), (0, j));
    UniformizationKernel::from_parts(q.clone(), clean.mu(), r, source)
}

const ORDER: [SamplerKind; 3] = [SamplerKind::Rejection, SamplerKind::Direct, SamplerKind::Uniformization];

/// Runs every check on every endpoint pair of `q` with acceptance
/// probability above the configured floor, for each horizon.
pub fn validate_matrix(
    name: &str,
    q: &Arc<RateMatrix>,
    horizons: &[f64],
    cfg: &ValidationConfig,
    rng: &RandomStream,
) -> Result<ValidationReport> {
    let d = Arc::new(SpectralDecomposition::of(q)?);
    let direct = DirectKernel::new(q.clone(), d.clone(), crate::samplers::DEFAULT_ROOT_TOL)?;
    let source = TransitionSource::Spectral(d.clone());
    let unif = if cfg.corrupt_uniformization {
        corrupted_kernel(q, source.clone())
    } else {
        UniformizationKernel::new(q.clone(), source.clone())
    };
    let samplers = [
        PreparedSampler::Rejection(cfg.rejection),
        PreparedSampler::Direct(direct),
        PreparedSampler::Uniformization(unif),
    ];
    let mut report = ValidationReport::default();
    let mut cell_index = 0u64;
    for &t in horizons {
        for a in 0..q.n() {
            for b in 0..q.n() {
                let p_acc = acceptance_probability(&d, q, a, b, t)?;
                if !(p_acc > cfg.min_acceptance) {
                    continue;
                }
                let cell = format!("{name} {}->{} T={t}", q.states().label(a), q.states().label(b));
                let problem = EndpointProblem::new(q.clone(), a, b, t)?;
                let stream = rng.substream(cell_index);
                cell_index += 1;
                report.cells += 1;
                validate_cell(&cell, &problem, &d, &samplers, p_acc, cfg, &stream, &mut report.checks);
            }
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn validate_cell(
    cell: &str,
    problem: &EndpointProblem,
    d: &Arc<SpectralDecomposition>,
    samplers: &[PreparedSampler; 3],
    p_acc: f64,
    cfg: &ValidationConfig,
    stream: &RandomStream,
    out: &mut Vec<CheckResult>,
) {
    use CheckFamily::*;
    let EndpointProblem { ref q, a, b, horizon: t } = *problem;
    let mut runs: Vec<Vec<SampleReport>> = Vec::with_capacity(3);
    for (k, sampler) in samplers.iter().enumerate() {
        let batch = sampler.sample_many(problem, cfg.paths, &stream.substream(k as u64));
        if let Some((_, err)) = batch.failures.first() {
            out.push(CheckResult::failure(CrossSampler, cell, format!("{} sampling", ORDER[k]), err));
            return;
        }
        runs.push(batch.reports.into_iter().map(|(_, r)| r).collect());
    }
    let jump_hist = |reports: &[SampleReport]| {
        let mut h = Vec::new();
        for r in reports {
            let j = r.path.jump_count();
            if h.len() <= j {
                h.resize(j + 1, 0u64);
            }
            h[j] += 1;
        }
        h
    };
    let dwell = |reports: &[SampleReport]| reports.iter().map(|r| r.path.time_in(a)).collect::<Vec<f64>>();
    let hists: Vec<Vec<u64>> = runs.iter().map(|r| jump_hist(r)).collect();
    let dwells: Vec<(f64, f64)> = runs.iter().map(|r| mean_and_se(&dwell(r))).collect();
    for (x, y) in [(0, 1), (0, 2), (1, 2)] {
        let pair = format!("{}/{}", ORDER[x], ORDER[y]);
        out.push(CheckResult::chi(
            CrossSampler,
            cell,
            format!("jump-count distribution {pair}"),
            chi_square_two_sample(&hists[x], &hists[y]),
            cfg.significance,
        ));
        let ((mx, sx), (my, sy)) = (dwells[x], dwells[y]);
        let se = (sx * sx + sy * sy).sqrt();
        let z = if se > 0.0 {
            (mx - my) / se
        } else if mx == my {
            0.0
        } else {
            f64::INFINITY
        };
        out.push(CheckResult::z(CrossSampler, cell, format!("dwell-in-start mean {pair}"), z, cfg.se_band));
    }

    let n = cfg.paths as f64;
    let direct_runs = &runs[1];
    let PreparedSampler::Direct(direct) = &samplers[1] else { unreachable!("direct sampler in slot 1") };
    match direct.first_transition(a, b, t) {
        Ok(ft) => {
            if let Some(stay) = ft.stay {
                let constant = direct_runs.iter().filter(|r| r.path.jump_count() == 0).count() as f64;
                let se = (stay * (1.0 - stay) / n).sqrt();
                let z = if se > 0.0 { (constant / n - stay) / se } else { 0.0 };
                out.push(CheckResult::z(AnalyticLaw, cell, "direct constant-path probability".into(), z, cfg.se_band));
            }
            let moved = 1.0 - ft.stay.unwrap_or(0.0);
            let probs: Vec<f64> = ft.jump.iter().map(|p| p / moved).collect();
            let mut first = vec![0u64; q.n()];
            for r in direct_runs.iter().filter(|r| r.path.jump_count() > 0) {
                first[r.path.segments()[1].state] += 1;
            }
            if first.iter().sum::<u64>() > 0 {
                out.push(CheckResult::chi(
                    AnalyticLaw,
                    cell,
                    "direct first-jump state".into(),
                    chi_square_goodness_of_fit(&first, &probs),
                    cfg.significance,
                ));
            }
        }
        Err(e) => out.push(CheckResult::failure(AnalyticLaw, cell, "direct first transition".into(), &e)),
    }

    let mut counts = Vec::new();
    for r in &runs[2] {
        let m = r.recursion_steps as usize;
        if counts.len() <= m {
            counts.resize(m + 1, 0u64);
        }
        counts[m] += 1;
    }
    // law of the jump count under the true R, independent of the kernel used for sampling
    let truth = UniformizationKernel::new(q.clone(), TransitionSource::Spectral(d.clone()));
    match truth.jump_count_masses(a, b, t, counts.len().max(1) - 1) {
        Ok(masses) => out.push(CheckResult::chi(
            AnalyticLaw,
            cell,
            "uniformization jump-count law".into(),
            chi_square_goodness_of_fit(&counts, &masses),
            cfg.significance,
        )),
        Err(e) => out.push(CheckResult::failure(AnalyticLaw, cell, "uniformization jump-count law".into(), &e)),
    }

    let attempts: Vec<f64> = runs[0].iter().map(|r| r.attempts as f64).collect();
    let (m_att, se_att) = mean_and_se(&attempts);
    let z = if se_att > 0.0 { (m_att - 1.0 / p_acc) / se_att } else { 0.0 };
    out.push(CheckResult::z(AnalyticLaw, cell, "rejection mean attempts vs 1/p_acc".into(), z, cfg.se_band));

    let source = TransitionSource::Spectral(d.clone());
    let expected = [
        expected_recursions_rejection(d, q, a, b, t),
        expected_recursions_direct(d, q, a, b, t),
        expected_recursions_uniformization(q, &source, a, b, t),
    ];
    for (k, e) in expected.into_iter().enumerate() {
        let label = format!("{} mean recursions vs analytic", ORDER[k]);
        let e = match e {
            Ok(e) => e,
            Err(err) => {
                out.push(CheckResult::failure(Recursions, cell, label, &err));
                continue;
            }
        };
        let steps: Vec<f64> = runs[k].iter().map(|r| r.recursion_steps as f64).collect();
        let (mean, se) = if k == 0 { ratio_and_se(&steps, &attempts) } else { mean_and_se(&steps) };
        let z = if se > 0.0 {
            (mean - e) / se
        } else if (mean - e).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        out.push(CheckResult::z(Recursions, cell, label, z, cfg.se_band));
    }
}
