//! Error types shared across the crate.

use thiserror::Error;

/// Failures tied to a model definition or to evaluating it at a point.
#[derive(Debug, Clone, Error)]
pub enum ModelError {
    /// A contact-singular pair function was evaluated at zero separation.
    #[error("pair function is singular at zero separation (x = {x})")]
    ContactSingularity { x: f64 },

    /// A time outside the scaling solution's grid was requested.
    #[error("time {t} lies outside the scaling grid [{lo}, {hi}]")]
    OutOfGrid { t: f64, lo: f64, hi: f64 },

    /// The requested (family, phase-parameter) combination does not solve the
    /// flow equations, or the requested operation has no closed form for this
    /// family.
    #[error("inadmissible protocol: {reason}")]
    InadmissibleProtocol { reason: String },
}

/// Failures of the scaling-factor solver.
#[derive(Debug, Clone, Error)]
pub enum ErmakovError {
    /// A tabulated scaling factor was not strictly positive.
    #[error("scaling factor must be positive; found b = {b} at t = {t}")]
    NonPositiveScaling { t: f64, b: f64 },

    /// The solution left the trusted range (1e-8, 1e8).
    #[error("scaling factor blew up: b = {b} at t = {t}")]
    BlowUp { t: f64, b: f64 },

    /// Step halving failed to bring the defect below tolerance.
    #[error("step refinement stalled at t = {t}: residual {residual:.3e} > tolerance {tolerance:.3e}")]
    StepFailure {
        t: f64,
        residual: f64,
        tolerance: f64,
    },
}

/// Failures of survival-probability evaluation.
#[derive(Debug, Clone, Error)]
pub enum SurvivalError {
    #[error(transparent)]
    Model(#[from] ModelError),

    /// The sample population produced a non-finite or degenerate estimate.
    #[error("sampler divergence: {detail}")]
    SamplerDivergence { detail: String },

    /// Direct quadrature was requested above its dimension cap.
    #[error("direct quadrature supports at most {max} particles; got {n}")]
    DimensionTooLarge { n: usize, max: usize },

    /// The scaling solution does not settle into `b ~ r0 * b` growth.
    #[error("no asymptote: {reason}")]
    NoAsymptote { reason: String },
}

/// Failures of quench-scenario assembly.
#[derive(Debug, Clone, Error)]
pub enum ScenarioError {
    /// The model family cannot realize the requested scenario.
    #[error("incompatible scenario: {reason}")]
    IncompatibleScenario { reason: String },

    #[error(transparent)]
    Model(#[from] ModelError),
}
