use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::acceptance::{acceptance_probability, inflation_factor};
use super::recursions::{
    expected_recursions_direct, expected_recursions_rejection, expected_recursions_uniformization,
};
use crate::error::{Error, Result};
use crate::problem::EndpointProblem;
use crate::rate_matrix::StationaryDistribution;
use crate::samplers::SamplerKind;
use crate::spectral::{SpectralDecomposition, TransitionSource};

/// Acceptance probabilities below this make rejection's predicted cost infinite.
pub const ACCEPTANCE_FLOOR: f64 = 1e-12;

const BUNDLED: [(usize, &str); 2] =
    [(4, include_str!("../../data/coefficients/n4.toml")), (61, include_str!("../../data/coefficients/n61.toml"))];

/// Initialisation cost `alpha` and per-step cost `beta` of one sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCosts {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCoefficients {
    pub rejection: StepCosts,
    pub direct: StepCosts,
    pub uniformization: StepCosts,
}

impl CostCoefficients {
    /// From `(alpha_R, beta_R, alpha_D, beta_D, alpha_U, beta_U)`.
    pub fn new(values: [f64; 6]) -> Result<Self> {
        let [ar, br, ad, bd, au, bu] = values;
        let c = Self {
            rejection: StepCosts { alpha: ar, beta: br },
            direct: StepCosts { alpha: ad, beta: bd },
            uniformization: StepCosts { alpha: au, beta: bu },
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let all = self.as_array();
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("cost coefficients must be finite and >= 0: {all:?}")));
        }
        if [all[1], all[3], all[5]].iter().all(|b| *b == 0.0) {
            return Err(Error::InvalidParameter("at least one beta must be positive".into()));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.rejection.alpha,
            self.rejection.beta,
            self.direct.alpha,
            self.direct.beta,
            self.uniformization.alpha,
            self.uniformization.beta,
        ]
    }

    pub fn get(&self, kind: SamplerKind) -> StepCosts {
        match kind {
            SamplerKind::Rejection => self.rejection,
            SamplerKind::Direct => self.direct,
            SamplerKind::Uniformization => self.uniformization,
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.as_array().map(|v| v * factor))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("coefficients: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("coefficients serialise")
    }

    /// Bundled coefficients for the bundled size closest to `n`.
    pub fn bundled(n: usize) -> (usize, Self) {
        let (size, text) = BUNDLED.iter().min_by_key(|(s, _)| s.abs_diff(n)).unwrap();
        (*size, Self::from_toml_str(text).expect("bundled coefficients parse"))
    }

    /// `n{size}.toml` from `dir`, or the file whose size is closest to `n`.
    pub fn from_dir(dir: &Path, n: usize) -> Result<(usize, Self)> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
        let mut best: Option<(usize, std::path::PathBuf)> = None;
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(size) = name.strip_prefix('n').and_then(|s| s.strip_suffix(".toml")).and_then(|s| s.parse().ok())
            else {
                continue;
            };
            let closer = best.as_ref().is_none_or(|(b, _): &(usize, _)| {
                let (d, bd) = (usize::abs_diff(size, n), usize::abs_diff(*b, n));
                d < bd || (d == bd && size < *b)
            });
            if closer {
                best = Some((size, entry.path()));
            }
        }
        let (size, path) =
            best.ok_or_else(|| Error::Parse(format!("no n<size>.toml coefficient files in {}", dir.display())))?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Ok((size, Self::from_toml_str(&text)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictionMode {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "large_T")]
    LargeT,
}

impl fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictionMode::Exact => "exact",
            PredictionMode::LargeT => "large_T",
        })
    }
}

/// One value per sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerSampler {
    pub rejection: f64,
    pub direct: f64,
    pub uniformization: f64,
}

impl PerSampler {
    pub fn get(&self, kind: SamplerKind) -> f64 {
        match kind {
            SamplerKind::Rejection => self.rejection,
            SamplerKind::Direct => self.direct,
            SamplerKind::Uniformization => self.uniformization,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub nu_critical: f64,
    #[serde(rename = "p_crit_U")]
    pub p_crit_u: f64,
    #[serde(rename = "p_crit_D")]
    pub p_crit_d: f64,
}

/// Large-`T` break-even points: uniformization beats direct sampling when
/// `nu < nu_critical`; rejection beats uniformization (direct) when
/// `p_acc > p_crit_U` (`p_crit_D`).
pub fn critical_thresholds(c: &CostCoefficients, t: f64, nu: f64) -> Thresholds {
    let (r, d, u) = (c.rejection, c.direct, c.uniformization);
    Thresholds {
        nu_critical: (d.alpha + d.beta * t - u.alpha) / (u.beta * t),
        p_crit_u: (r.alpha + r.beta * t) / (u.alpha + u.beta * t * nu),
        p_crit_d: (r.alpha + r.beta * t) / (d.alpha + d.beta * t),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPrediction {
    pub p_acc: f64,
    pub nu: f64,
    #[serde(rename = "E_L")]
    pub expected_recursions: PerSampler,
    pub predicted_cost: PerSampler,
    pub selected: SamplerKind,
    pub mode: PredictionMode,
    pub thresholds: Thresholds,
    pub rationale: String,
}

/// Inputs shared by predictions on one rate matrix.
#[derive(Debug, Clone)]
pub struct CostContext {
    /// Needed only in exact mode; a complex spectrum surfaces there.
    pub decomposition: Result<Arc<SpectralDecomposition>>,
    pub pi: StationaryDistribution,
}

impl CostContext {
    pub fn new(problem: &EndpointProblem) -> Result<Self> {
        let pi = problem.q.stationary_distribution()?;
        let decomposition = SpectralDecomposition::of(&problem.q).map(Arc::new);
        Ok(Self { decomposition, pi })
    }
}

/// Predicts each sampler's mean cost per path and selects the cheapest.
pub fn predict_and_select(
    coeffs: &CostCoefficients,
    problem: &EndpointProblem,
    mode: PredictionMode,
) -> Result<CostPrediction> {
    predict_with(coeffs, problem, mode, &CostContext::new(problem)?)
}

pub fn predict_with(
    coeffs: &CostCoefficients,
    problem: &EndpointProblem,
    mode: PredictionMode,
    ctx: &CostContext,
) -> Result<CostPrediction> {
    let EndpointProblem { ref q, a, b, horizon: t } = *problem;
    if !(t > 0.0) {
        return Err(Error::InvalidProblem("cost prediction needs a positive horizon".into()));
    }
    let nu = inflation_factor(q, &ctx.pi);
    let (p_acc, e) = match mode {
        PredictionMode::Exact => {
            let d = ctx.decomposition.as_ref().map_err(Clone::clone)?;
            let source = TransitionSource::Spectral(d.clone());
            let e = PerSampler {
                rejection: expected_recursions_rejection(d, q, a, b, t)?,
                direct: expected_recursions_direct(d, q, a, b, t)?,
                uniformization: expected_recursions_uniformization(q, &source, a, b, t)?,
            };
            (acceptance_probability(d, q, a, b, t)?, e)
        }
        PredictionMode::LargeT => {
            let jumps = q.mean_exit_rate(&ctx.pi) * t;
            (ctx.pi.get(b), PerSampler { rejection: jumps, direct: jumps, uniformization: nu * jumps })
        }
    };
    let cost = |k: SamplerKind| {
        let c = coeffs.get(k);
        c.alpha + c.beta * e.get(k)
    };
    let predicted = PerSampler {
        rejection: if p_acc < ACCEPTANCE_FLOOR { f64::INFINITY } else { cost(SamplerKind::Rejection) / p_acc },
        direct: cost(SamplerKind::Direct),
        uniformization: cost(SamplerKind::Uniformization),
    };
    let mut selected = SamplerKind::ALL[0];
    for k in SamplerKind::ALL {
        if predicted.get(k) < predicted.get(selected) {
            selected = k;
        }
    }
    let thresholds = critical_thresholds(coeffs, t, nu);
    let rationale = format!(
        "{selected} has the lowest predicted cost ({:.4}) among rejection {:.4}, uniformization {:.4}, direct {:.4}; p_acc = {p_acc:.4}, nu = {nu:.3}",
        predicted.get(selected),
        predicted.rejection,
        predicted.uniformization,
        predicted.direct
    );
    Ok(CostPrediction {
        p_acc,
        nu,
        expected_recursions: e,
        predicted_cost: predicted,
        selected,
        mode,
        thresholds,
        rationale,
    })
}
