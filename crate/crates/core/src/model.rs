//! Pair-function families and model definitions.
//!
//! A model is a pair family `Γ`, a particle number, and a reference trap
//! frequency `ω₀`. The many-body state built from it is
//!
//! `Ψ ∝ Π_{i<j} e^{(1 + iη(t)) Γ(x_i - x_j, t)} · Π_k e^{Λ(x_k, t) + iφ(x_k, t)}`
//!
//! with a Gaussian one-body part `Λ = -mω x²/2ħ`, `ω = ω₀/b²`, whose width
//! follows the scaling factor `b(t)`. Each family fixes how the pair function
//! deforms under the flow:
//!
//! - `PowerLawCs`: `Γ = λ₀ ln|x|`, scale-free, `η ≡ 0` unless `λ₀ = 1/2`.
//! - `LogCs`: `Γ = ½ ln|x|`, the one power-law exponent that tolerates an
//!   arbitrary phase schedule `η(t)`.
//! - `Hyperbolic`: `Γ = λ₀ ln|sinh(c x)|` with `c = c₀/b`, `η ≡ 0`.
//! - `LogHyperbolic`: `Γ = ½ ln|sinh(c x)|` with
//!   `c(t) = (c₀/b) exp(ω₀ ∫₀ᵗ η/b² ds)`, any `η(t)`.
//! - `ExpLl`: `Γ = c |x|` with `c = c₀/b`, `η ≡ 0`; the contact-interacting
//!   gas.
//! - `GenericEven`: `Γ = γ(c₀ x / b)` for an arbitrary smooth even `γ`,
//!   `η ≡ 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ermakov::ScalingSolution;
use crate::error::ModelError;
use crate::quadrature::CumulativeCurve;

/// Physical constants entering the flow. Both default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

/// A positions vector, one coordinate per particle.
pub type ParticleConfig = Vec<f64>;

/// The pair-phase schedule `η(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum EtaSchedule {
    Zero,
    Constant { value: f64 },
    /// `η(t) = amp · sin(freq · t)`.
    Sin { amp: f64, freq: f64 },
    /// `η(t) = before` for `t < 0`, then `0`: a sudden phase switch-off.
    Step { before: f64 },
    /// Piecewise-linear interpolation, clamped outside the table.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl EtaSchedule {
    pub fn eta(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { value } => *value,
            Self::Sin { amp, freq } => amp * (freq * t).sin(),
            Self::Step { before } => {
                if t < 0.0 {
                    *before
                } else {
                    0.0
                }
            }
            Self::Table { times, values } => {
                let n = times.len();
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[n - 1] {
                    return values[n - 1];
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] * (1.0 - w) + values[i + 1] * w
            }
        }
    }

    /// `dη/dt`. The step schedule reports `0`: its jump acts as an impulse,
    /// handled separately by the quench scenarios.
    pub fn eta_dot(&self, t: f64) -> f64 {
        match self {
            Self::Zero | Self::Constant { .. } | Self::Step { .. } => 0.0,
            Self::Sin { amp, freq } => amp * freq * (freq * t).cos(),
            Self::Table { times, values } => {
                let n = times.len();
                if t < times[0] || t >= times[n - 1] {
                    return 0.0;
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                (values[i + 1] - values[i]) / (times[i + 1] - times[i])
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant { value } => *value == 0.0,
            Self::Sin { amp, .. } => *amp == 0.0,
            Self::Step { before } => *before == 0.0,
            Self::Table { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }
}

/// The dimensionless profile `γ(u)` of a [`PairFamily::GenericEven`] model,
/// evaluated at `u = c₀ x / b`.
#[derive(Clone)]
pub enum GenericGamma {
    /// `γ(u) = amp · e^{-u²}`.
    Gaussian { amp: f64 },
    /// User-supplied profile. Derivatives fall back to central differences
    /// with step `1e-5` in `u` when not provided.
    Custom {
        label: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        df: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        d2f: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    },
}

const GENERIC_FD_STEP: f64 = 1e-5;

impl GenericGamma {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Gaussian { amp } => amp * (-u * u).exp(),
            Self::Custom { f, .. } => f(u),
        }
    }

    pub fn d1(&self, u: f64) -> f64 {
        match self {
            Self::Gaussian { amp } => -2.0 * u * amp * (-u * u).exp(),
            Self::Custom { f, df, .. } => match df {
                Some(df) => df(u),
                None => (f(u + GENERIC_FD_STEP) - f(u - GENERIC_FD_STEP)) / (2.0 * GENERIC_FD_STEP),
            },
        }
    }

    pub fn d2(&self, u: f64) -> f64 {
        match self {
            Self::Gaussian { amp } => (4.0 * u * u - 2.0) * amp * (-u * u).exp(),
            Self::Custom { f, d2f, .. } => match d2f {
                Some(d2f) => d2f(u),
                None => {
                    (f(u + GENERIC_FD_STEP) - 2.0 * f(u) + f(u - GENERIC_FD_STEP))
                        / (GENERIC_FD_STEP * GENERIC_FD_STEP)
                }
            },
        }
    }

    fn preset_name(&self) -> &str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Custom { label, .. } => label,
        }
    }
}

impl std::fmt::Debug for GenericGamma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gaussian { amp } => write!(f, "Gaussian {{ amp: {amp} }}"),
            Self::Custom { label, .. } => write!(f, "Custom {{ label: {label:?} }}"),
        }
    }
}

static ETA_ZERO: EtaSchedule = EtaSchedule::Zero;

/// The pair-function family together with its family-specific parameters.
#[derive(Debug, Clone)]
pub enum PairFamily {
    PowerLawCs { lambda0: f64 },
    LogCs { eta: EtaSchedule },
    Hyperbolic { lambda0: f64, c0: f64 },
    LogHyperbolic { c0: f64, eta: EtaSchedule },
    ExpLl { c0: f64 },
    GenericEven { c0: f64, gamma: GenericGamma },
}

impl PairFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PowerLawCs { .. } => "power_law_cs",
            Self::LogCs { .. } => "log_cs",
            Self::Hyperbolic { .. } => "hyperbolic",
            Self::LogHyperbolic { .. } => "log_hyperbolic",
            Self::ExpLl { .. } => "exp_ll",
            Self::GenericEven { .. } => "generic_even",
        }
    }

    /// The phase schedule this family carries. Families that do not admit a
    /// phase return the zero schedule.
    pub fn eta(&self) -> &EtaSchedule {
        match self {
            Self::LogCs { eta } | Self::LogHyperbolic { eta, .. } => eta,
            _ => &ETA_ZERO,
        }
    }

    /// Whether the pair function diverges at zero separation.
    pub fn contact_singular(&self) -> bool {
        matches!(
            self,
            Self::PowerLawCs { .. }
                | Self::LogCs { .. }
                | Self::Hyperbolic { .. }
                | Self::LogHyperbolic { .. }
        )
    }

    /// The power-law exponent at coincidence: `λ₀` for the power-law and
    /// hyperbolic families, `1/2` for the log families, `0` otherwise.
    pub fn lambda(&self) -> f64 {
        match self {
            Self::PowerLawCs { lambda0 } | Self::Hyperbolic { lambda0, .. } => *lambda0,
            Self::LogCs { .. } | Self::LogHyperbolic { .. } => 0.5,
            Self::ExpLl { .. } | Self::GenericEven { .. } => 0.0,
        }
    }
}

/// Which phase schedules a family admits while keeping the flow exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaAdmissibility {
    /// The flow equations force `η ≡ 0`: a nonzero phase would make the
    /// two-body flow position-dependent.
    MustVanish,
    /// Any differentiable `η(t)` works; the family's coupling flow absorbs it.
    Unrestricted,
}

/// Admissible `η` schedules per family. Only the two `λ = 1/2` log families
/// tolerate a nonzero pair phase; all other combinations must keep `η ≡ 0`.
pub fn valid_eta_cases(family: &PairFamily) -> EtaAdmissibility {
    match family {
        PairFamily::LogCs { .. } | PairFamily::LogHyperbolic { .. } => {
            EtaAdmissibility::Unrestricted
        }
        _ => EtaAdmissibility::MustVanish,
    }
}

/// Rejects an `η` override that the family does not admit.
pub fn check_eta_admissible(family: &PairFamily, eta: &EtaSchedule) -> Result<(), ModelError> {
    if valid_eta_cases(family) == EtaAdmissibility::MustVanish && !eta.is_zero() {
        return Err(ModelError::InadmissibleProtocol {
            reason: format!("family {} requires η ≡ 0", family.name()),
        });
    }
    Ok(())
}

/// A complete model: pair family, particle number, reference frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecRepr", into = "ModelSpecRepr")]
pub struct ModelSpec {
    pub family: PairFamily,
    pub n_particles: usize,
    pub omega0: f64,
}

impl ModelSpec {
    pub fn power_law_cs(lambda0: f64, n_particles: usize, omega0: f64) -> Self {
        Self {
            family: PairFamily::PowerLawCs { lambda0 },
            n_particles,
            omega0,
        }
    }

    pub fn log_cs(eta: EtaSchedule, n_particles: usize, omega0: f64) -> Self {
        Self {
            family: PairFamily::LogCs { eta },
            n_particles,
            omega0,
        }
    }

    pub fn hyperbolic(lambda0: f64, c0: f64, n_particles: usize, omega0: f64) -> Self {
        Self {
            family: PairFamily::Hyperbolic { lambda0, c0 },
            n_particles,
            omega0,
        }
    }

    pub fn log_hyperbolic(c0: f64, eta: EtaSchedule, n_particles: usize, omega0: f64) -> Self {
        Self {
            family: PairFamily::LogHyperbolic { c0, eta },
            n_particles,
            omega0,
        }
    }

    pub fn exp_ll(c0: f64, n_particles: usize, omega0: f64) -> Self {
        Self {
            family: PairFamily::ExpLl { c0 },
            n_particles,
            omega0,
        }
    }

    pub fn generic_even(c0: f64, gamma: GenericGamma, n_particles: usize, omega0: f64) -> Self {
        Self {
            family: PairFamily::GenericEven { c0, gamma },
            n_particles,
            omega0,
        }
    }

    pub fn pair_count(&self) -> usize {
        self.n_particles * (self.n_particles - 1) / 2
    }

    pub fn triple_count(&self) -> usize {
        if self.n_particles < 3 {
            0
        } else {
            self.n_particles * (self.n_particles - 1) * (self.n_particles - 2) / 6
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpecRepr {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<EtaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amp: Option<f64>,
    n_particles: usize,
    omega0: f64,
}

impl From<ModelSpec> for ModelSpecRepr {
    fn from(m: ModelSpec) -> Self {
        let mut repr = ModelSpecRepr {
            family: m.family.name().to_string(),
            lambda0: None,
            c0: None,
            eta: None,
            preset: None,
            amp: None,
            n_particles: m.n_particles,
            omega0: m.omega0,
        };
        match m.family {
            PairFamily::PowerLawCs { lambda0 } => repr.lambda0 = Some(lambda0),
            PairFamily::LogCs { eta } => repr.eta = Some(eta),
            PairFamily::Hyperbolic { lambda0, c0 } => {
                repr.lambda0 = Some(lambda0);
                repr.c0 = Some(c0);
            }
            PairFamily::LogHyperbolic { c0, eta } => {
                repr.c0 = Some(c0);
                repr.eta = Some(eta);
            }
            PairFamily::ExpLl { c0 } => repr.c0 = Some(c0),
            PairFamily::GenericEven { c0, gamma } => {
                repr.c0 = Some(c0);
                repr.preset = Some(gamma.preset_name().to_string());
                if let GenericGamma::Gaussian { amp } = gamma {
                    repr.amp = Some(amp);
                }
            }
        }
        repr
    }
}

impl TryFrom<ModelSpecRepr> for ModelSpec {
    type Error = String;

    fn try_from(r: ModelSpecRepr) -> Result<Self, String> {
        fn take<T>(v: Option<T>, name: &str, family: &str) -> Result<T, String> {
            v.ok_or_else(|| format!("family {family:?} requires field {name:?}"))
        }
        fn forbid<T>(v: &Option<T>, name: &str, family: &str) -> Result<(), String> {
            if v.is_some() {
                Err(format!("family {family:?} does not take field {name:?}"))
            } else {
                Ok(())
            }
        }

        let f = r.family.as_str();
        let family = match f {
            "power_law_cs" => {
                forbid(&r.c0, "c0", f)?;
                forbid(&r.eta, "eta", f)?;
                forbid(&r.preset, "preset", f)?;
                PairFamily::PowerLawCs {
                    lambda0: take(r.lambda0, "lambda0", f)?,
                }
            }
            "log_cs" => {
                forbid(&r.lambda0, "lambda0", f)?;
                forbid(&r.c0, "c0", f)?;
                forbid(&r.preset, "preset", f)?;
                PairFamily::LogCs {
                    eta: r.eta.unwrap_or(EtaSchedule::Zero),
                }
            }
            "hyperbolic" => {
                forbid(&r.eta, "eta", f)?;
                forbid(&r.preset, "preset", f)?;
                PairFamily::Hyperbolic {
                    lambda0: take(r.lambda0, "lambda0", f)?,
                    c0: take(r.c0, "c0", f)?,
                }
            }
            "log_hyperbolic" => {
                forbid(&r.lambda0, "lambda0", f)?;
                forbid(&r.preset, "preset", f)?;
                PairFamily::LogHyperbolic {
                    c0: take(r.c0, "c0", f)?,
                    eta: r.eta.unwrap_or(EtaSchedule::Zero),
                }
            }
            "exp_ll" => {
                forbid(&r.lambda0, "lambda0", f)?;
                forbid(&r.eta, "eta", f)?;
                forbid(&r.preset, "preset", f)?;
                PairFamily::ExpLl {
                    c0: take(r.c0, "c0", f)?,
                }
            }
            "generic_even" => {
                forbid(&r.lambda0, "lambda0", f)?;
                forbid(&r.eta, "eta", f)?;
                let preset = r.preset.as_deref().unwrap_or("gaussian");
                let gamma = match preset {
                    "gaussian" => GenericGamma::Gaussian {
                        amp: r.amp.unwrap_or(1.0),
                    },
                    other => {
                        return Err(format!(
                            "unknown generic_even preset {other:?}; available: \"gaussian\""
                        ))
                    }
                };
                PairFamily::GenericEven {
                    c0: take(r.c0, "c0", f)?,
                    gamma,
                }
            }
            other => {
                return Err(format!(
                    "unknown family {other:?}; expected one of power_law_cs, log_cs, \
                     hyperbolic, log_hyperbolic, exp_ll, generic_even"
                ))
            }
        };
        if r.n_particles < 2 {
            return Err("n_particles must be at least 2".into());
        }
        Ok(ModelSpec {
            family,
            n_particles: r.n_particles,
            omega0: r.omega0,
        })
    }
}

/// The pair function and its derivatives at one separation and time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairDerivatives {
    /// `Γ(x, t)`
    pub gamma: f64,
    /// `∂Γ/∂x`
    pub d1: f64,
    /// `∂²Γ/∂x²`
    pub d2: f64,
    /// `∂Γ/∂t` at fixed separation
    pub dt: f64,
}

/// Evaluates a model's pair function along a scaling trajectory.
///
/// Construction precomputes whatever the family's coupling flow needs; for
/// `LogHyperbolic` that is the running integral `ω₀ ∫ η/b² ds`, anchored so
/// `c(0) = c₀` (grids are expected to contain `t = 0`).
pub struct PairEvaluator<'a> {
    model: &'a ModelSpec,
    scaling: &'a ScalingSolution,
    flow: Option<(CumulativeCurve, f64)>,
}

impl<'a> PairEvaluator<'a> {
    pub fn new(model: &'a ModelSpec, scaling: &'a ScalingSolution) -> Self {
        let flow = match &model.family {
            PairFamily::LogHyperbolic { eta, .. } => {
                let grid = dedup_grid(scaling.grid());
                let eta = eta.clone();
                let omega0 = scaling.omega0();
                let curve = CumulativeCurve::build(&grid, |s| {
                    let b = scaling.b(s).expect("grid point");
                    omega0 * eta.eta(s) / (b * b)
                });
                let anchor = curve.value(0.0);
                Some((curve, anchor))
            }
            _ => None,
        };
        Self {
            model,
            scaling,
            flow,
        }
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn scaling(&self) -> &ScalingSolution {
        self.scaling
    }

    /// `(η, η̇)` at `t` from the family's schedule.
    pub fn eta_at(&self, t: f64) -> (f64, f64) {
        let eta = self.model.family.eta();
        (eta.eta(t), eta.eta_dot(t))
    }

    /// The running coupling `(c, ċ)`. Families without a coupling return
    /// `(0, 0)`.
    pub fn coupling(&self, t: f64) -> Result<(f64, f64), ModelError> {
        match &self.model.family {
            PairFamily::PowerLawCs { .. } | PairFamily::LogCs { .. } => Ok((0.0, 0.0)),
            PairFamily::Hyperbolic { c0, .. }
            | PairFamily::ExpLl { c0 }
            | PairFamily::GenericEven { c0, .. } => {
                let b = self.scaling.b(t)?;
                let v = self.scaling.b_dot(t)?;
                Ok((c0 / b, -c0 * v / (b * b)))
            }
            PairFamily::LogHyperbolic { c0, eta } => {
                let b = self.scaling.b(t)?;
                let v = self.scaling.b_dot(t)?;
                let (curve, anchor) = self.flow.as_ref().unwrap();
                let c = c0 / b * (curve.value(t) - anchor).exp();
                let omega = self.scaling.omega0() / (b * b);
                Ok((c, c * (eta.eta(t) * omega - v / b)))
            }
        }
    }

    /// `Γ` and its derivatives at separation `x` and time `t`.
    pub fn eval(&self, x: f64, t: f64) -> Result<PairDerivatives, ModelError> {
        if x == 0.0 && self.model.family.contact_singular() {
            return Err(ModelError::ContactSingularity { x });
        }
        match &self.model.family {
            PairFamily::PowerLawCs { lambda0 } => Ok(power_law(*lambda0, x)),
            PairFamily::LogCs { .. } => Ok(power_law(0.5, x)),
            PairFamily::Hyperbolic { lambda0, .. } => {
                let (c, c_dot) = self.coupling(t)?;
                Ok(log_sinh(*lambda0, c, c_dot, x))
            }
            PairFamily::LogHyperbolic { .. } => {
                let (c, c_dot) = self.coupling(t)?;
                Ok(log_sinh(0.5, c, c_dot, x))
            }
            PairFamily::ExpLl { .. } => {
                let (c, c_dot) = self.coupling(t)?;
                Ok(PairDerivatives {
                    gamma: c * x.abs(),
                    d1: c * sgn(x),
                    d2: 0.0,
                    dt: c_dot * x.abs(),
                })
            }
            PairFamily::GenericEven { gamma, .. } => {
                let (c, c_dot) = self.coupling(t)?;
                let u = c * x;
                let g1 = gamma.d1(u);
                Ok(PairDerivatives {
                    gamma: gamma.eval(u),
                    d1: c * g1,
                    d2: c * c * gamma.d2(u),
                    dt: c_dot * x * g1,
                })
            }
        }
    }
}

fn power_law(lambda: f64, x: f64) -> PairDerivatives {
    PairDerivatives {
        gamma: lambda * x.abs().ln(),
        d1: lambda / x,
        d2: -lambda / (x * x),
        dt: 0.0,
    }
}

fn log_sinh(lambda: f64, c: f64, c_dot: f64, x: f64) -> PairDerivatives {
    let z = c * x;
    PairDerivatives {
        gamma: lambda * ln_abs_sinh(z),
        d1: lambda * c * coth(z),
        d2: -lambda * c * c * csch_sq(z),
        dt: lambda * c_dot * x * coth(z),
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `ln |sinh z|`, safe against overflow for large `|z|`.
pub(crate) fn ln_abs_sinh(z: f64) -> f64 {
    let a = z.abs();
    if a > 300.0 {
        a - std::f64::consts::LN_2
    } else {
        a.sinh().ln()
    }
}

/// `coth z`, saturating to `±1` for large `|z|`.
pub(crate) fn coth(z: f64) -> f64 {
    let a = z.abs();
    if a > 300.0 {
        z.signum()
    } else {
        1.0 / z.tanh()
    }
}

/// `1 / sinh² z`, flushing to `4 e^{-2|z|}` for large `|z|`.
pub(crate) fn csch_sq(z: f64) -> f64 {
    let a = z.abs();
    if a > 300.0 {
        4.0 * (-2.0 * a).exp()
    } else {
        let s = a.sinh();
        1.0 / (s * s)
    }
}

/// Convenience wrapper: evaluates `model`'s pair function at separation `x`
/// and time `t` along `scaling`.
pub fn gamma_eval(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    x: f64,
    t: f64,
) -> Result<PairDerivatives, ModelError> {
    PairEvaluator::new(model, scaling).eval(x, t)
}

/// Whether `|Ψ|²` is integrable, and if not, why.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizabilityReport {
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Checks integrability of `|Ψ|²` at coincidence points and at infinity.
pub fn check_normalizable(model: &ModelSpec) -> NormalizabilityReport {
    let mut violations = Vec::new();
    if model.n_particles < 2 {
        violations.push("n_particles must be at least 2".to_string());
    }
    if !model.omega0.is_finite() || model.omega0 < 0.0 {
        violations.push(format!(
            "omega0 must be finite and nonnegative, got {}",
            model.omega0
        ));
    }
    let trapped = model.omega0 > 0.0;

    match &model.family {
        PairFamily::PowerLawCs { lambda0 } => {
            if *lambda0 <= -0.5 {
                violations.push(format!(
                    "coincidence exponent lambda0 = {lambda0} makes |Ψ|² non-integrable; need lambda0 > -1/2"
                ));
            }
            if !trapped {
                violations.push("power-law pair functions require a trap (omega0 > 0)".into());
            }
        }
        PairFamily::LogCs { .. } => {
            if !trapped {
                violations.push("log-pair states require a trap (omega0 > 0)".into());
            }
        }
        PairFamily::Hyperbolic { lambda0, c0 } => {
            if *lambda0 <= -0.5 {
                violations.push(format!(
                    "coincidence exponent lambda0 = {lambda0} makes |Ψ|² non-integrable; need lambda0 > -1/2"
                ));
            }
            if *c0 == 0.0 {
                violations.push("coupling c0 must be nonzero".into());
            }
            if !trapped && lambda0 * c0 >= 0.0 {
                violations.push(format!(
                    "untrapped hyperbolic states need lambda0 * c0 < 0 for decay; got {}",
                    lambda0 * c0
                ));
            }
        }
        PairFamily::LogHyperbolic { c0, .. } => {
            if *c0 == 0.0 {
                violations.push("coupling c0 must be nonzero".into());
            }
            if !trapped && *c0 >= 0.0 {
                violations.push(format!(
                    "untrapped states of this family need c0 < 0 for decay; got {c0}"
                ));
            }
        }
        PairFamily::ExpLl { c0 } => {
            if *c0 == 0.0 {
                violations.push("coupling c0 must be nonzero".into());
            }
            if !trapped && *c0 >= 0.0 {
                violations.push(format!(
                    "untrapped contact-interacting states need c0 < 0 (attractive bound state); got {c0}"
                ));
            }
        }
        PairFamily::GenericEven { c0, .. } => {
            if *c0 == 0.0 {
                violations.push("coupling c0 must be nonzero".into());
            }
            if !trapped {
                violations.push(
                    "bounded generic pair functions require a trap (omega0 > 0)".into(),
                );
            }
        }
    }

    NormalizabilityReport {
        valid: violations.is_empty(),
        violations,
    }
}

/// The three-body marker `W₃`, when it collapses to a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum W3Value {
    Constant(f64),
    /// The triple sum depends on the configuration; evaluate it with
    /// [`w3_config`].
    CoordinateDependent,
}

/// `W₃(t) = -Σ_{i<j<k} (Γ'_{ij}Γ'_{jk} + Γ'_{ij}Γ'_{ki} + Γ'_{ki}Γ'_{jk})`.
///
/// Pair-product algebra collapses this to a constant for every closed-form
/// family: `0` for the power-law families, `λ² c²(t) · N(N-1)(N-2)/6` for the
/// hyperbolic ones, and `c²(t) · N(N-1)(N-2)/6` for the contact family.
pub fn w3_value(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    t: f64,
) -> Result<W3Value, ModelError> {
    let triples = model.triple_count() as f64;
    if triples == 0.0 {
        return Ok(W3Value::Constant(0.0));
    }
    match &model.family {
        PairFamily::PowerLawCs { .. } | PairFamily::LogCs { .. } => Ok(W3Value::Constant(0.0)),
        PairFamily::Hyperbolic { .. } | PairFamily::LogHyperbolic { .. } => {
            let ev = PairEvaluator::new(model, scaling);
            let (c, _) = ev.coupling(t)?;
            let lam = model.family.lambda();
            Ok(W3Value::Constant(triples * lam * lam * c * c))
        }
        PairFamily::ExpLl { .. } => {
            let ev = PairEvaluator::new(model, scaling);
            let (c, _) = ev.coupling(t)?;
            Ok(W3Value::Constant(triples * c * c))
        }
        PairFamily::GenericEven { .. } => Ok(W3Value::CoordinateDependent),
    }
}

/// The triple sum behind [`w3_value`], evaluated on an explicit
/// configuration. Agrees with the constant for the closed-form families.
pub fn w3_config(ev: &PairEvaluator, config: &[f64], t: f64) -> Result<f64, ModelError> {
    let n = config.len();
    let mut d1 = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let g = ev.eval(config[i] - config[j], t)?;
            d1[i * n + j] = g.d1;
        }
    }
    let w = |a: usize, b: usize| -> f64 {
        if a < b {
            d1[a * n + b]
        } else {
            -d1[b * n + a]
        }
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                total -= w(i, j) * w(j, k) + w(i, j) * w(k, i) + w(k, i) * w(j, k);
            }
        }
    }
    Ok(total)
}

pub(crate) fn dedup_grid(ts: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    out
}
