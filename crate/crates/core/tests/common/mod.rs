#![allow(dead_code)]

use std::sync::Arc;

use ctmc_bridge::complexity::*;
use ctmc_bridge::models::{build_hky, build_hky_cpg, HkyCpgParams, HkyParams};
use ctmc_bridge::samplers::SamplerKind;
use ctmc_bridge::{EndpointProblem, RandomStream, RateMatrix, SpectralDecomposition, StateSpace, TransitionSource};

/// Reference 4-state coefficients `(alpha, beta)` for rejection, direct, uniformization.
pub const REFERENCE_N4: [f64; 6] = [0.0165, 0.0109, 0.2155, 0.1285, 0.2286, 0.0143];

pub fn two_state() -> Arc<RateMatrix> {
    Arc::new(RateMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]], StateSpace::numbered(2).unwrap()).unwrap())
}

pub fn hky(calibrate: bool) -> Arc<RateMatrix> {
    Arc::new(build_hky(&HkyParams { kappa: 2.0, base_freqs: [0.2, 0.3, 0.3, 0.2], calibrate }).unwrap().q)
}

pub fn hky_cpg(calibrate: bool) -> Arc<RateMatrix> {
    Arc::new(build_hky_cpg(&HkyCpgParams { kappa: 2.0, nu: [0.3, 0.3, 0.2, 0.2], gamma: 20.0, calibrate }).unwrap().q)
}

/// Composite Simpson rule with `2 m` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `|x - mean| / se`.
pub fn z(x: f64, mean: f64, se: f64) -> f64 {
    (x - mean).abs() / se
}

/// Clock that reports planted per-path totals: each block advances it by
/// `reps * seconds[problem] * (1 + noise)`.
pub fn planted_clock(seconds: Vec<f64>, reps: usize, mut noise: impl FnMut() -> f64) -> impl FnMut() -> f64 {
    let (mut calls, mut now) = (0usize, 0.0);
    move || {
        let problem = calls / (3 * TIMING_BLOCKS);
        if calls % 3 == 2 {
            now += reps as f64 * seconds[problem] * (1.0 + noise());
        }
        calls += 1;
        now
    }
}

pub fn normal(rng: &mut RandomStream) -> f64 {
    let (u, v) = (rng.uniform_open(), rng.uniform());
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn calibration_problems() -> Vec<EndpointProblem> {
    let q = hky(true);
    let mut out = Vec::new();
    for t in [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0] {
        for (a, b) in [(0, 0), (0, 1), (2, 3), (1, 2)] {
            out.push(EndpointProblem::new(q.clone(), a, b, t).unwrap());
        }
    }
    out
}

pub fn planted_seconds(kind: SamplerKind, problems: &[EndpointProblem], alpha: f64, beta: f64) -> Vec<f64> {
    problems
        .iter()
        .map(|p| {
            let d = SpectralDecomposition::of(&p.q).unwrap();
            let p_acc = acceptance_probability(&d, &p.q, p.a, p.b, p.horizon).unwrap();
            let e = match kind {
                SamplerKind::Rejection => expected_recursions_rejection(&d, &p.q, p.a, p.b, p.horizon),
                SamplerKind::Direct => expected_recursions_direct(&d, &p.q, p.a, p.b, p.horizon),
                SamplerKind::Uniformization => expected_recursions_uniformization(
                    &p.q,
                    &TransitionSource::for_matrix(&p.q).unwrap(),
                    p.a,
                    p.b,
                    p.horizon,
                ),
            }
            .unwrap();
            let (x1, x2) = TimingPoint::regressors(kind, p_acc, e);
            alpha * x1 + beta * x2
        })
        .collect()
}

pub fn planted_sizes(sizes: &[usize], mut noise: impl FnMut() -> f64) -> Vec<SizeObservation> {
    let mut out = Vec::new();
    for &n in sizes {
        let x = n as f64;
        for (sampler, alpha, beta) in [
            (SamplerKind::Rejection, 0.017, 0.011),
            (SamplerKind::Direct, 0.01 * x.powf(2.9), 0.1 + 0.0003 * x * x),
            (SamplerKind::Uniformization, 0.004 * x.powf(2.5), 0.003 * x.powf(0.9)),
        ] {
            out.push(SizeObservation { sampler, n, alpha: alpha * (1.0 + noise()), beta: beta * (1.0 + noise()) });
        }
    }
    out
}
