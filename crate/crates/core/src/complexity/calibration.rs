use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::acceptance::acceptance_probability;
use super::recursions::{
    expected_recursions_direct, expected_recursions_rejection, expected_recursions_uniformization,
};
use crate::error::{Error, Result};
use crate::problem::EndpointProblem;
use crate::random::RandomStream;
use crate::samplers::{PreparedSampler, RejectionConfig, SamplerKind};
use crate::spectral::{SpectralDecomposition, TransitionSource};

use super::selection::{CostCoefficients, StepCosts};

/// Timing repetitions per point; the point's time is their median.
pub const TIMING_BLOCKS: usize = 5;

/// Mean cost of one path and its regressors: `seconds ~ alpha x_init + beta x_rec`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingPoint {
    pub x_init: f64,
    pub x_rec: f64,
    pub seconds: f64,
}

impl TimingPoint {
    /// Regressors of a sampler: `(1 / p_acc, E[L] / p_acc)` for rejection,
    /// `(1, E[L])` otherwise.
    pub fn regressors(kind: SamplerKind, p_acc: f64, expected: f64) -> (f64, f64) {
        match kind {
            SamplerKind::Rejection => (1.0 / p_acc, expected / p_acc),
            _ => (1.0, expected),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFit {
    pub alpha: f64,
    pub beta: f64,
    /// Euclidean norm of the residuals.
    pub residual: f64,
}

/// Nonnegative least squares for `y ~ c1 x1 + c2 x2`.
fn nnls2(x1: &[f64], x2: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let m = y.len();
    let design = DMatrix::from_fn(m, 2, |i, j| if j == 0 { x1[i] } else { x2[i] });
    let svd = design.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if m < 2 || !(smin > 1e-10 * smax) {
        return Err(Error::InsufficientVariation(format!(
            "design matrix is rank deficient (singular values {smax:e}, {smin:e})"
        )));
    }
    let rhs = DVector::from_column_slice(y);
    let sol = svd.solve(&rhs, 0.0).map_err(|e| Error::NumericalBreakdown(e.to_string()))?;
    let (mut c1, mut c2) = (sol[0], sol[1]);
    let through_origin = |x: &[f64]| {
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        (xy / xx).max(0.0)
    };
    if c1 < 0.0 || c2 < 0.0 {
        let a = (0.0, through_origin(x2));
        let b = (through_origin(x1), 0.0);
        let sse = |(p, q): (f64, f64)| -> f64 { (0..m).map(|i| (y[i] - p * x1[i] - q * x2[i]).powi(2)).sum() };
        (c1, c2) = if sse(a) <= sse(b) { a } else { b };
    }
    let residual = (0..m).map(|i| (y[i] - c1 * x1[i] - c2 * x2[i]).powi(2)).sum::<f64>().sqrt();
    Ok((c1, c2, residual))
}

/// Least-squares `(alpha, beta)`, clipped to be nonnegative.
pub fn fit_coefficients(points: &[TimingPoint]) -> Result<CoefficientFit> {
    let x1: Vec<f64> = points.iter().map(|p| p.x_init).collect();
    let x2: Vec<f64> = points.iter().map(|p| p.x_rec).collect();
    let y: Vec<f64> = points.iter().map(|p| p.seconds).collect();
    let (alpha, beta, residual) = nnls2(&x1, &x2, &y)?;
    Ok(CoefficientFit { alpha, beta, residual })
}

/// Measurements for one calibration problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedProblem {
    pub a: usize,
    pub b: usize,
    pub horizon: f64,
    pub p_acc: f64,
    pub expected_recursions: f64,
    /// Median over blocks of the kernel preparation time.
    pub init_seconds: f64,
    /// Median over blocks of the mean sampling time per path.
    pub sample_seconds: f64,
    /// Median over blocks of the mean total time per path.
    pub seconds: f64,
    pub mean_attempts: f64,
    pub mean_recursions: f64,
    pub blocks: Vec<TimingBlock>,
}

/// Raw measurements of one timing block of `paths` paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingBlock {
    pub paths: usize,
    pub init_seconds: f64,
    /// Sampling time of the whole block.
    pub sample_seconds: f64,
    pub attempts: u64,
    pub recursion_steps: u64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Monotonic seconds since the first call in this process.
pub fn monotonic_seconds() -> f64 {
    use std::sync::OnceLock;
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed().as_secs_f64()
}

/// Times `kind` on each problem and fits its `(alpha, beta)`.
///
/// Each problem is timed in [`TIMING_BLOCKS`] blocks of `reps` paths; a block
/// prepares the sampler afresh, so the per-path time includes
/// `1 / reps` of the preparation. Runs serially: concurrent work on the same
/// machine distorts the fit.
pub fn calibrate_coefficients(
    kind: SamplerKind,
    problems: &[EndpointProblem],
    reps: usize,
    rng: &RandomStream,
    clock: &mut dyn FnMut() -> f64,
    cfg: RejectionConfig,
) -> Result<(CoefficientFit, Vec<TimedProblem>)> {
    if reps == 0 {
        return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
    }
    let mut horizons: Vec<f64> = problems.iter().map(|p| p.horizon).collect();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    if horizons.len() < 3 {
        return Err(Error::InsufficientVariation(format!(
            "calibration needs at least 3 distinct horizons, got {}",
            horizons.len()
        )));
    }
    let mut timed = Vec::with_capacity(problems.len());
    let mut points = Vec::with_capacity(problems.len());
    for (index, problem) in problems.iter().enumerate() {
        let EndpointProblem { ref q, a, b, horizon } = *problem;
        let d = SpectralDecomposition::of(q)?;
        let p_acc = acceptance_probability(&d, q, a, b, horizon)?;
        let expected = match kind {
            SamplerKind::Rejection => expected_recursions_rejection(&d, q, a, b, horizon)?,
            SamplerKind::Direct => expected_recursions_direct(&d, q, a, b, horizon)?,
            SamplerKind::Uniformization => {
                expected_recursions_uniformization(q, &TransitionSource::Spectral(d.into()), a, b, horizon)?
            }
        };
        let stream = rng.substream(index as u64);
        let (mut init, mut sample, mut total) = (Vec::new(), Vec::new(), Vec::new());
        let mut blocks = Vec::with_capacity(TIMING_BLOCKS);
        for block in 0..TIMING_BLOCKS {
            let block_stream = stream.substream(block as u64);
            let t0 = clock();
            let sampler = PreparedSampler::prepare(kind, q, cfg)?;
            let t1 = clock();
            let (mut attempts, mut steps) = (0u64, 0u64);
            for r in 0..reps {
                let report = sampler.sample(problem, &mut block_stream.substream(r as u64))?;
                attempts += report.attempts;
                steps += report.recursion_steps;
            }
            let t2 = clock();
            init.push(t1 - t0);
            sample.push((t2 - t1) / reps as f64);
            total.push((t2 - t0) / reps as f64);
            blocks.push(TimingBlock {
                paths: reps,
                init_seconds: t1 - t0,
                sample_seconds: t2 - t1,
                attempts,
                recursion_steps: steps,
            });
        }
        let runs = (TIMING_BLOCKS * reps) as f64;
        let attempts: u64 = blocks.iter().map(|b| b.attempts).sum();
        let steps: u64 = blocks.iter().map(|b| b.recursion_steps).sum();
        let seconds = median(total);
        let (x_init, x_rec) = TimingPoint::regressors(kind, p_acc, expected);
        points.push(TimingPoint { x_init, x_rec, seconds });
        timed.push(TimedProblem {
            a,
            b,
            horizon,
            p_acc,
            expected_recursions: expected,
            init_seconds: median(init),
            sample_seconds: median(sample),
            seconds,
            mean_attempts: attempts as f64 / runs,
            mean_recursions: steps as f64 / runs,
            blocks,
        });
    }
    Ok((fit_coefficients(&points)?, timed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeForm {
    /// `c`
    Constant,
    /// `c n^e`
    PowerLaw,
    /// `c0 + c n^2`
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeFit {
    pub form: SizeForm,
    pub coefficient: f64,
    /// Exponent of the power law (2 for the quadratic form, 0 for the constant).
    pub exponent: f64,
    /// Constant term of the quadratic form.
    pub intercept: f64,
    pub residual: f64,
}

impl SizeFit {
    pub fn predict(&self, n: usize) -> f64 {
        let n = n as f64;
        match self.form {
            SizeForm::Constant => self.coefficient,
            SizeForm::PowerLaw => self.coefficient * n.powf(self.exponent),
            SizeForm::Quadratic => self.intercept + self.coefficient * n * n,
        }
    }

    fn fit(form: SizeForm, n: &[f64], y: &[f64]) -> Result<Self> {
        let residual_of =
            |f: &SizeFit| n.iter().zip(y).map(|(&n, &y)| (y - f.predict(n as usize)).powi(2)).sum::<f64>().sqrt();
        let mut fit = match form {
            SizeForm::Constant => {
                let mean = y.iter().sum::<f64>() / y.len() as f64;
                SizeFit { form, coefficient: mean, exponent: 0.0, intercept: 0.0, residual: 0.0 }
            }
            SizeForm::PowerLaw => {
                if y.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::InsufficientVariation("power-law fit needs positive values".into()));
                }
                let ones = vec![1.0; n.len()];
                let ln_n: Vec<f64> = n.iter().map(|v| v.ln()).collect();
                let ln_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
                let (c, e) = ols2(&ones, &ln_n, &ln_y)?;
                SizeFit { form, coefficient: c.exp(), exponent: e, intercept: 0.0, residual: 0.0 }
            }
            SizeForm::Quadratic => {
                let ones = vec![1.0; n.len()];
                let n2: Vec<f64> = n.iter().map(|v| v * v).collect();
                let (c0, c2, _) = nnls2(&ones, &n2, y)?;
                SizeFit { form, coefficient: c2, exponent: 2.0, intercept: c0, residual: 0.0 }
            }
        };
        fit.residual = residual_of(&fit);
        Ok(fit)
    }
}

/// Unconstrained least squares for `y ~ c1 x1 + c2 x2`.
fn ols2(x1: &[f64], x2: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let m = y.len();
    let design = DMatrix::from_fn(m, 2, |i, j| if j == 0 { x1[i] } else { x2[i] });
    let svd = design.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-10 * smax) {
        return Err(Error::InsufficientVariation("design matrix is rank deficient".into()));
    }
    let sol = svd.solve(&DVector::from_column_slice(y), 0.0).map_err(|e| Error::NumericalBreakdown(e.to_string()))?;
    Ok((sol[0], sol[1]))
}

/// Fitted `(alpha, beta)` of one sampler at one state-space size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeObservation {
    pub sampler: SamplerKind,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSizeModel {
    pub alpha: SizeFit,
    pub beta: SizeFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub rejection: SamplerSizeModel,
    pub direct: SamplerSizeModel,
    pub uniformization: SamplerSizeModel,
}

impl CalibrationModel {
    /// Model forms per series: rejection constant, direct `alpha` power law
    /// and `beta` quadratic, uniformization power laws.
    pub fn forms(kind: SamplerKind) -> (SizeForm, SizeForm) {
        match kind {
            SamplerKind::Rejection => (SizeForm::Constant, SizeForm::Constant),
            SamplerKind::Direct => (SizeForm::PowerLaw, SizeForm::Quadratic),
            SamplerKind::Uniformization => (SizeForm::PowerLaw, SizeForm::PowerLaw),
        }
    }

    pub fn get(&self, kind: SamplerKind) -> &SamplerSizeModel {
        match kind {
            SamplerKind::Rejection => &self.rejection,
            SamplerKind::Direct => &self.direct,
            SamplerKind::Uniformization => &self.uniformization,
        }
    }

    pub fn predict(&self, n: usize) -> Result<CostCoefficients> {
        let step = |m: &SamplerSizeModel| StepCosts { alpha: m.alpha.predict(n), beta: m.beta.predict(n) };
        let c = CostCoefficients {
            rejection: step(&self.rejection),
            direct: step(&self.direct),
            uniformization: step(&self.uniformization),
        };
        CostCoefficients::new(c.as_array())
    }
}

/// Fits each sampler's `alpha` and `beta` as functions of the state-space size.
pub fn coefficient_size_model(observations: &[SizeObservation]) -> Result<CalibrationModel> {
    let fit = |kind: SamplerKind| -> Result<SamplerSizeModel> {
        let rows: Vec<&SizeObservation> = observations.iter().filter(|o| o.sampler == kind).collect();
        let mut sizes: Vec<usize> = rows.iter().map(|o| o.n).collect();
        sizes.sort_unstable();
        sizes.dedup();
        if sizes.len() < 4 {
            return Err(Error::InsufficientVariation(format!(
                "{kind}: size model needs at least 4 distinct sizes, got {}",
                sizes.len()
            )));
        }
        let n: Vec<f64> = rows.iter().map(|o| o.n as f64).collect();
        let alpha: Vec<f64> = rows.iter().map(|o| o.alpha).collect();
        let beta: Vec<f64> = rows.iter().map(|o| o.beta).collect();
        let (fa, fb) = CalibrationModel::forms(kind);
        Ok(SamplerSizeModel { alpha: SizeFit::fit(fa, &n, &alpha)?, beta: SizeFit::fit(fb, &n, &beta)? })
    };
    Ok(CalibrationModel {
        rejection: fit(SamplerKind::Rejection)?,
        direct: fit(SamplerKind::Direct)?,
        uniformization: fit(SamplerKind::Uniformization)?,
    })
}
