//! Driving Hamiltonians that make the scaling flow exact.
//!
//! For every closed-form family the many-body potential decomposes into a
//! handful of operator buckets,
//!
//! `V = (m/2) Ω² Σ x_k²  +  Σ_{i<j} v(x_ij, t)  +  Ē(t)`,
//!
//! where `v` collects at most an inverse-square, a logarithmic, a
//! `1/sinh²`, an `x coth`, a contact, and a `|x|` term. [`parent_coeffs`]
//! returns the bucket coefficients of the Hamiltonian that drives the state
//! exactly; [`pseudo_parent_coeffs`] those of the instantaneous-equilibrium
//! reference, which differs only in the trap curvature (`ω² = ω₀²/b⁴`
//! instead of `Ω²`) and in the scalar offset. The difference of the two is
//! the counterdiabatic term returned by [`sta_control`]:
//!
//! `ℋ - ℋ₀ = (ħη/2m) Σ {Γ'(x_ij), p_ij} + (ḃ/2b) Σ {x_k, p_k}`.
//!
//! The scalar offset depends on the phase convention through
//! `ϑ = 2τ̇ + ω`. [`TauGauge::Zero`] keeps `τ ≡ 0`;
//! [`TauGauge::EnergyZero`] picks `τ̇(t)` so the offset vanishes
//! identically, and [`GaugeTau`] integrates that choice to `τ(t)`.

use serde::Serialize;

use crate::ermakov::ScalingSolution;
use crate::error::ModelError;
use crate::model::{
    check_eta_admissible, dedup_grid, w3_config, w3_value, EtaSchedule, ModelSpec, PairFamily,
    PairEvaluator, Units, W3Value,
};
use crate::quadrature::CumulativeCurve;

/// Convention for the spatially uniform phase `τ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauGauge {
    /// `τ ≡ 0`; the Hamiltonian carries a scalar offset.
    Zero,
    /// `τ̇` absorbs the offset so the Hamiltonian annihilates the state's
    /// phase drift: the offset is identically zero.
    #[default]
    EnergyZero,
}

/// Bucket coefficients of a pair-product-preserving Hamiltonian at one time.
///
/// A zero coefficient means the bucket is absent for the family. `coupling`
/// is the running argument scale `c(t)` inside the `sinh`/`coth` buckets and
/// is informational.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HamiltonianCoeffs {
    pub t: f64,
    /// Coefficient of `(m/2) Σ x_k²`.
    pub trap_sq: f64,
    /// Argument scale of the hyperbolic buckets.
    pub coupling: f64,
    /// Coefficient of `Σ 1/x_ij²`.
    pub inv_sq: f64,
    /// Coefficient of `Σ ln|x_ij|`.
    pub log_pair: f64,
    /// Coefficient of `Σ 1/sinh²(c x_ij)`.
    pub csch_sq: f64,
    /// Coefficient of `Σ x_ij coth(c x_ij)`.
    pub coth_lin: f64,
    /// Coefficient of `Σ ln|sinh(c x_ij)|`.
    pub log_sinh: f64,
    /// Coefficient of `Σ δ(x_ij)`.
    pub contact: f64,
    /// Coefficient of `Σ |x_ij|`.
    pub abs_lin: f64,
    /// Additive scalar `Ē(t)`.
    pub offset: f64,
    /// The `τ̇` realizing the gauge (zero under [`TauGauge::Zero`]).
    pub tau_dot: f64,
}

impl HamiltonianCoeffs {
    fn zeroed(t: f64, trap_sq: f64) -> Self {
        Self {
            t,
            trap_sq,
            coupling: 0.0,
            inv_sq: 0.0,
            log_pair: 0.0,
            csch_sq: 0.0,
            coth_lin: 0.0,
            log_sinh: 0.0,
            contact: 0.0,
            abs_lin: 0.0,
            offset: 0.0,
            tau_dot: 0.0,
        }
    }
}

fn assemble(
    ev: &PairEvaluator,
    units: Units,
    t: f64,
    trap_sq: f64,
    eta: f64,
    eta_dot: f64,
    varpi: f64,
    gauge: TauGauge,
) -> Result<HamiltonianCoeffs, ModelError> {
    let model = ev.model();
    let hbar = units.hbar;
    let hm = hbar * hbar / units.mass;
    let n = model.n_particles as f64;
    let pairs = model.pair_count() as f64;
    let triples = model.triple_count() as f64;
    let omega = ev.scaling().omega(t)?;
    let chi = 1.0 - eta * eta;
    let lam = model.family.lambda();

    let mut k = HamiltonianCoeffs::zeroed(t, trap_sq);
    let mut offset = -0.5 * n * hbar * omega;

    match &model.family {
        PairFamily::PowerLawCs { .. } | PairFamily::LogCs { .. } => {
            k.inv_sq = hm * (chi * lam * lam - lam);
            k.log_pair = -hbar * eta_dot * lam;
            offset -= hbar * varpi * lam * pairs;
        }
        PairFamily::Hyperbolic { .. } | PairFamily::LogHyperbolic { .. } => {
            let (c, c_dot) = ev.coupling(t)?;
            k.coupling = c;
            k.csch_sq = hm * (chi * lam * lam - lam) * c * c;
            k.coth_lin = -hbar * lam * (varpi * c + eta * c_dot);
            k.log_sinh = -hbar * eta_dot * lam;
            offset += hm * chi * lam * lam * c * c * (pairs + triples);
        }
        PairFamily::ExpLl { .. } => {
            let (c, c_dot) = ev.coupling(t)?;
            k.coupling = c;
            k.contact = 2.0 * hm * c;
            k.abs_lin = -hbar * (varpi * c + eta * c_dot);
            offset += hm * c * c * (pairs + triples);
        }
        PairFamily::GenericEven { .. } => {
            return Err(ModelError::InadmissibleProtocol {
                reason: "generic pair functions admit no closed-form coefficient \
                         decomposition; evaluate potential_energy on configurations instead"
                    .into(),
            });
        }
    }

    match gauge {
        TauGauge::Zero => k.offset = offset,
        TauGauge::EnergyZero => {
            k.tau_dot = offset / (n * hbar);
            k.offset = 0.0;
        }
    }
    Ok(k)
}

/// Coefficients of the Hamiltonian under which the flowing state solves the
/// Schrödinger equation exactly. `eta_override`, when given, replaces the
/// family's phase schedule and must be admissible for the family.
pub fn parent_coeffs(
    model: &ModelSpec,
    eta_override: Option<&EtaSchedule>,
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
    gauge: TauGauge,
) -> Result<HamiltonianCoeffs, ModelError> {
    let ev = PairEvaluator::new(model, scaling);
    parent_coeffs_with(&ev, eta_override, units, t, gauge)
}

/// [`parent_coeffs`] against a prebuilt evaluator, for time sweeps.
pub fn parent_coeffs_with(
    ev: &PairEvaluator,
    eta_override: Option<&EtaSchedule>,
    units: Units,
    t: f64,
    gauge: TauGauge,
) -> Result<HamiltonianCoeffs, ModelError> {
    let model = ev.model();
    let schedule = match eta_override {
        Some(s) => {
            check_eta_admissible(&model.family, s)?;
            s
        }
        None => model.family.eta(),
    };
    let scaling = ev.scaling();
    let eta = schedule.eta(t);
    let eta_dot = schedule.eta_dot(t);
    let b = scaling.b(t)?;
    let b_dot = scaling.b_dot(t)?;
    let omega = scaling.omega(t)?;
    let varpi = omega + eta * b_dot / b;
    let trap_sq = scaling.omega_sq_effective(t)?;
    assemble(ev, units, t, trap_sq, eta, eta_dot, varpi, gauge)
}

/// Coefficients of the instantaneous-equilibrium reference Hamiltonian: the
/// one whose ground state the flowing state would be if the evolution were
/// adiabatic. Identical bucket structure, but the trap curvature is
/// `ω² = ω₀²/b⁴` and the offset pins the state at zero energy.
pub fn pseudo_parent_coeffs(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
) -> Result<HamiltonianCoeffs, ModelError> {
    let ev = PairEvaluator::new(model, scaling);
    pseudo_parent_coeffs_with(&ev, units, t)
}

/// [`pseudo_parent_coeffs`] against a prebuilt evaluator.
pub fn pseudo_parent_coeffs_with(
    ev: &PairEvaluator,
    units: Units,
    t: f64,
) -> Result<HamiltonianCoeffs, ModelError> {
    let scaling = ev.scaling();
    let omega = scaling.omega(t)?;
    assemble(ev, units, t, omega * omega, 0.0, 0.0, omega, TauGauge::Zero)
}

/// The counterdiabatic control at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaControl {
    pub t: f64,
    /// Coefficient of the dilatation term `Σ {x_k, p_k}`: `ḃ/2b`.
    pub squeeze: f64,
    /// Coefficient of the pair-momentum term `Σ {Γ'(x_ij), p_ij}`:
    /// `ħη/2m`. Zero whenever the family keeps `η ≡ 0`, leaving the pure
    /// squeezing drive.
    pub pair_momentum: f64,
}

/// The operator terms that must be added to the reference Hamiltonian to
/// follow the flow exactly without waiting for adiabaticity.
pub fn sta_control(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
) -> Result<StaControl, ModelError> {
    let eta = model.family.eta().eta(t);
    Ok(StaControl {
        t,
        squeeze: scaling.squeeze(t)?,
        pair_momentum: units.hbar * eta / (2.0 * units.mass),
    })
}

/// `τ̇(t)` under the zero-offset gauge.
pub fn tau_dot_energy_zero(
    ev: &PairEvaluator,
    units: Units,
    t: f64,
) -> Result<f64, ModelError> {
    Ok(parent_coeffs_with(ev, None, units, t, TauGauge::EnergyZero)?.tau_dot)
}

/// The integrated phase `τ(t)` of the zero-offset gauge, tabulated once over
/// the scaling grid.
pub struct GaugeTau {
    curve: CumulativeCurve,
}

impl GaugeTau {
    pub fn build(
        model: &ModelSpec,
        scaling: &ScalingSolution,
        units: Units,
    ) -> Result<Self, ModelError> {
        let ev = PairEvaluator::new(model, scaling);
        tau_dot_energy_zero(&ev, units, scaling.t_min())?;
        let grid = dedup_grid(scaling.grid());
        let curve = CumulativeCurve::build(&grid, |s| {
            tau_dot_energy_zero(&ev, units, s).expect("grid point")
        });
        Ok(Self { curve })
    }

    /// `τ(t) - τ(t_ref)`.
    pub fn value_from(&self, t_ref: f64, t: f64) -> f64 {
        self.curve.value(t) - self.curve.value(t_ref)
    }

    /// `τ(t)` anchored at `τ(0) = 0` (clamped to the grid start when the
    /// grid does not contain zero).
    pub fn value(&self, t: f64) -> f64 {
        self.value_from(0.0, t)
    }

    pub fn tau_dot(&self, t: f64) -> f64 {
        self.curve.derivative(t)
    }
}

/// `τ(t)` under the zero-offset gauge, anchored at `τ(0) = 0`.
pub fn gauge_tau(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
) -> Result<f64, ModelError> {
    Ok(GaugeTau::build(model, scaling, units)?.value(t))
}

/// Evaluates the bucket decomposition on an explicit configuration.
/// Contact terms are supported on a measure-zero set and contribute
/// nothing at generic configurations.
pub fn bucket_potential(k: &HamiltonianCoeffs, config: &[f64], mass: f64) -> f64 {
    let mut v = k.offset;
    for &x in config {
        v += 0.5 * mass * k.trap_sq * x * x;
    }
    for i in 0..config.len() {
        for j in (i + 1)..config.len() {
            let x = config[i] - config[j];
            v += k.inv_sq / (x * x) + k.log_pair * x.abs().ln() + k.abs_lin * x.abs();
            if k.coupling != 0.0 {
                let z = k.coupling * x;
                v += k.csch_sq * crate::model::csch_sq(z)
                    + k.coth_lin * x * crate::model::coth(z)
                    + k.log_sinh * crate::model::ln_abs_sinh(z);
            }
        }
    }
    v
}

/// The full many-body potential at an explicit configuration,
///
/// `V = (m/2)Ω²Σx² + Σ_{i<j} [ (ħ²/m)(Γ'' + (1-η²)Γ'²) - ħϖ x Γ' - ħ(η̇Γ + ηΓ̇) ] + ℰ`,
///
/// valid for every family including the generic one. Contact terms live on a
/// measure-zero set and do not contribute at generic configurations.
pub fn potential_energy(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    units: Units,
    config: &[f64],
    t: f64,
    gauge: TauGauge,
) -> Result<f64, ModelError> {
    let ev = PairEvaluator::new(model, scaling);
    potential_energy_with(&ev, units, config, t, gauge)
}

/// [`potential_energy`] against a prebuilt evaluator.
pub fn potential_energy_with(
    ev: &PairEvaluator,
    units: Units,
    config: &[f64],
    t: f64,
    gauge: TauGauge,
) -> Result<f64, ModelError> {
    let model = ev.model();
    assert_eq!(config.len(), model.n_particles);
    let hbar = units.hbar;
    let mass = units.mass;
    let hm = hbar * hbar / mass;
    let n = model.n_particles as f64;

    let scaling = ev.scaling();
    let b = scaling.b(t)?;
    let b_dot = scaling.b_dot(t)?;
    let omega = scaling.omega(t)?;
    let (eta, eta_dot) = ev.eta_at(t);
    let varpi = omega + eta * b_dot / b;
    let chi = 1.0 - eta * eta;
    let trap_sq = scaling.omega_sq_effective(t)?;

    let mut v = 0.5 * mass * trap_sq * config.iter().map(|x| x * x).sum::<f64>();
    for i in 0..config.len() {
        for j in (i + 1)..config.len() {
            let x = config[i] - config[j];
            let g = ev.eval(x, t)?;
            v += hm * (g.d2 + chi * g.d1 * g.d1)
                - hbar * varpi * x * g.d1
                - hbar * (eta_dot * g.gamma + eta * g.dt);
        }
    }

    let w3 = match w3_value(model, scaling, t)? {
        W3Value::Constant(c) => c,
        W3Value::CoordinateDependent => w3_config(ev, config, t)?,
    };
    let tau_dot = match gauge {
        TauGauge::Zero => 0.0,
        TauGauge::EnergyZero => tau_dot_energy_zero(ev, units, t)?,
    };
    let vartheta = 2.0 * tau_dot + omega;
    v += -0.5 * n * hbar * vartheta + hm * chi * w3;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ermakov::{solve_forward, FrequencyProtocol};

    fn release_scaling() -> ScalingSolution {
        let proto = FrequencyProtocol::trap_release(1.0);
        solve_forward(&proto, 1.0, 0.0, 5.0, 1e-3).unwrap()
    }

    #[test]
    fn exp_ll_buckets_after_release() {
        let model = ModelSpec::exp_ll(-1.0, 4, 1.0);
        let s = release_scaling();
        let u = Units::default();
        let t = 1.0;
        let b = (2.0f64).sqrt();
        let k = parent_coeffs(&model, None, &s, u, t, TauGauge::Zero).unwrap();
        // Ω = 0 after release; a(t) = -ħω₀c₀/b³; contact tracks 2ħ²c/m.
        assert!(k.trap_sq.abs() < 1e-7);
        assert!((k.contact - 2.0 * (-1.0) / b).abs() < 1e-9);
        assert!((k.abs_lin - (1.0 / b.powi(3))).abs() < 1e-9);
        // offset with τ̇ = 0: -Nħω/2 + (ħ²/m)c²(P + T), P = 6, T = 4
        let omega = 1.0 / (b * b);
        let want = -2.0 * omega + (1.0 / (b * b)) * 10.0;
        assert!((k.offset - want).abs() < 1e-9);
    }

    #[test]
    fn energy_zero_gauge_moves_offset_into_tau() {
        let model = ModelSpec::exp_ll(-1.0, 4, 1.0);
        let s = release_scaling();
        let u = Units::default();
        let k0 = parent_coeffs(&model, None, &s, u, 1.0, TauGauge::Zero).unwrap();
        let k1 = parent_coeffs(&model, None, &s, u, 1.0, TauGauge::EnergyZero).unwrap();
        assert_eq!(k1.offset, 0.0);
        assert!((k1.tau_dot - k0.offset / 4.0).abs() < 1e-15);
        assert_eq!(k0.abs_lin, k1.abs_lin);
    }

    #[test]
    fn parent_and_pseudo_differ_only_in_trap_and_offset() {
        let s = release_scaling();
        let u = Units::default();
        let models = [
            ModelSpec::power_law_cs(2.0, 3, 1.0),
            ModelSpec::log_cs(EtaSchedule::Zero, 3, 1.0),
            ModelSpec::hyperbolic(1.5, -0.8, 4, 1.0),
            ModelSpec::exp_ll(-1.0, 4, 1.0),
        ];
        for m in &models {
            let a = parent_coeffs(m, None, &s, u, 2.0, TauGauge::Zero).unwrap();
            let p = pseudo_parent_coeffs(m, &s, u, 2.0).unwrap();
            assert_eq!(a.coupling, p.coupling, "{}", m.family.name());
            assert_eq!(a.inv_sq, p.inv_sq);
            assert_eq!(a.log_pair, p.log_pair);
            assert_eq!(a.csch_sq, p.csch_sq);
            assert_eq!(a.coth_lin, p.coth_lin);
            assert_eq!(a.log_sinh, p.log_sinh);
            assert_eq!(a.contact, p.contact);
            assert_eq!(a.abs_lin, p.abs_lin);
            assert!(a.trap_sq.abs() < 1e-7);
            assert!((p.trap_sq - 1.0 / (1.0 + 4.0f64).powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn generic_family_has_no_buckets() {
        let model = ModelSpec::generic_even(
            1.0,
            crate::model::GenericGamma::Gaussian { amp: 1.0 },
            3,
            1.0,
        );
        let s = release_scaling();
        let err = parent_coeffs(&model, None, &s, Units::default(), 1.0, TauGauge::Zero);
        assert!(matches!(err, Err(ModelError::InadmissibleProtocol { .. })));
    }

    #[test]
    fn inadmissible_eta_override_is_rejected() {
        let model = ModelSpec::exp_ll(-1.0, 3, 1.0);
        let s = release_scaling();
        let eta = EtaSchedule::Constant { value: 0.5 };
        let err = parent_coeffs(&model, Some(&eta), &s, Units::default(), 1.0, TauGauge::Zero);
        assert!(matches!(err, Err(ModelError::InadmissibleProtocol { .. })));
    }

    #[test]
    fn squeeze_closed_form_after_release() {
        let model = ModelSpec::exp_ll(-1.0, 4, 1.0);
        let s = release_scaling();
        for &t in &[0.5f64, 1.0, 3.0] {
            let c = sta_control(&model, &s, Units::default(), t).unwrap();
            let want = t / (2.0 * (1.0 + t * t));
            assert!((c.squeeze - want).abs() < 1e-9, "t = {t}");
            assert_eq!(c.pair_momentum, 0.0);
        }
    }

    #[test]
    fn potential_matches_buckets_on_configurations() {
        let s = release_scaling();
        let u = Units::default();
        let config = vec![-1.1, -0.2, 0.7, 1.9];
        for m in [
            ModelSpec::exp_ll(-1.0, 4, 1.0),
            ModelSpec::hyperbolic(1.5, -0.8, 4, 1.0),
            ModelSpec::power_law_cs(2.0, 4, 1.0),
        ] {
            let k = parent_coeffs(&m, None, &s, u, 1.5, TauGauge::Zero).unwrap();
            let from_buckets = bucket_potential(&k, &config, u.mass);
            let direct = potential_energy(&m, &s, u, &config, 1.5, TauGauge::Zero).unwrap();
            assert!(
                (from_buckets - direct).abs() < 1e-9 * (1.0 + direct.abs()),
                "{}: {from_buckets} vs {direct}",
                m.family.name()
            );
        }
    }

    #[test]
    fn gauge_tau_release_closed_form() {
        // Contact family, N = 4, c₀ = -1, ω₀ = 1:
        // τ(t) = [ħ(N²-1)c₀²/(6mω₀) - 1/2] arctan(ω₀ t) = 2 arctan t.
        let model = ModelSpec::exp_ll(-1.0, 4, 1.0);
        let s = release_scaling();
        let tau = gauge_tau(&model, &s, Units::default(), 1.0).unwrap();
        let want = 2.0 * (1.0f64).atan();
        assert!((tau - want).abs() < 1e-7, "{tau} vs {want}");
        assert!((want - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
