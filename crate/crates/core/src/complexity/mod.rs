//! Analytic cost model: acceptance probabilities, expected recursion counts,
//! cost prediction and sampler selection, and coefficient calibration.

mod acceptance;
mod calibration;
mod recursions;
mod selection;

pub use acceptance::{acceptance_probability, acceptance_small_t, inflation_factor};
pub use calibration::{
    calibrate_coefficients, coefficient_size_model, fit_coefficients, monotonic_seconds, CalibrationModel,
    CoefficientFit, SamplerSizeModel, SizeFit, SizeForm, SizeObservation, TimedProblem, TimingBlock, TimingPoint,
    TIMING_BLOCKS,
};
pub use recursions::{
    expected_recursions_direct, expected_recursions_rejection, expected_recursions_uniformization, DEGENERATE_TOL,
};
pub use selection::{
    critical_thresholds, predict_and_select, predict_with, CostCoefficients, CostContext, CostPrediction, PerSampler,
    PredictionMode, StepCosts, Thresholds, ACCEPTANCE_FLOOR,
};
