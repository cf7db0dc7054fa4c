//! Evaluation of the flowing state: log-amplitude and phase, normalization
//! bookkeeping, a Schrödinger-equation residual, and a Metropolis sampler
//! over `|Ψ|²`.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ermakov::ScalingSolution;
use crate::error::ModelError;
use crate::hamiltonian::{potential_energy_with, GaugeTau, TauGauge};
use crate::model::{check_normalizable, dedup_grid, ModelSpec, PairEvaluator, PairFamily, Units};
use crate::quadrature::CumulativeCurve;

/// `ln Ψ` split into real log-amplitude and phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogPsi {
    pub ln_amp: f64,
    pub phase: f64,
}

impl LogPsi {
    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.ln_amp, self.phase)
    }
}

/// The log-normalization exponent `𝒩(t)` split by structure, anchored at
/// `𝒩(0) = 0` (clamped to the grid start when the grid excludes zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormExponent {
    pub total: f64,
    pub one_body: f64,
    pub two_body: f64,
    pub three_body: f64,
}

/// Everything needed to evaluate the state repeatedly: the pair evaluator,
/// the integrated normalization flow, and the integrated uniform phase for
/// the chosen gauge.
pub struct StateContext<'a> {
    units: Units,
    gauge: TauGauge,
    ev: PairEvaluator<'a>,
    /// `∫ (ηω - ḃ/b) ds` for the running log family, `∫ ηc² ds` for the
    /// running log-sinh family; unused otherwise.
    flow_integral: Option<CumulativeCurve>,
    tau: Option<GaugeTau>,
    anchor_t: f64,
}

impl<'a> StateContext<'a> {
    pub fn new(
        model: &'a ModelSpec,
        scaling: &'a ScalingSolution,
        units: Units,
        gauge: TauGauge,
    ) -> Result<Self, ModelError> {
        let report = check_normalizable(model);
        if !report.valid {
            return Err(ModelError::InadmissibleProtocol {
                reason: format!("state is not normalizable: {}", report.violations.join("; ")),
            });
        }
        let ev = PairEvaluator::new(model, scaling);
        let grid = dedup_grid(scaling.grid());
        let flow_integral = match &model.family {
            PairFamily::LogCs { eta } => Some(CumulativeCurve::build(&grid, |s| {
                let b = scaling.b(s).expect("grid point");
                let b_dot = scaling.b_dot(s).expect("grid point");
                eta.eta(s) * scaling.omega0() / (b * b) - b_dot / b
            })),
            PairFamily::LogHyperbolic { eta, .. } => {
                let evc = PairEvaluator::new(model, scaling);
                Some(CumulativeCurve::build(&grid, |s| {
                    let (c, _) = evc.coupling(s).expect("grid point");
                    eta.eta(s) * c * c
                }))
            }
            _ => None,
        };
        let tau = match gauge {
            TauGauge::Zero => None,
            TauGauge::EnergyZero => Some(GaugeTau::build(model, scaling, units)?),
        };
        let anchor_t = 0.0f64.clamp(scaling.t_min(), scaling.t_max());
        Ok(Self {
            units,
            gauge,
            ev,
            flow_integral,
            tau,
            anchor_t,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        self.ev.model()
    }

    pub fn scaling(&self) -> &ScalingSolution {
        self.ev.scaling()
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn gauge(&self) -> TauGauge {
        self.gauge
    }

    pub fn evaluator(&self) -> &PairEvaluator<'a> {
        &self.ev
    }

    /// The uniform phase `τ(t)` of the active gauge.
    pub fn tau(&self, t: f64) -> f64 {
        match &self.tau {
            Some(g) => g.value_from(self.anchor_t, t),
            None => 0.0,
        }
    }

    pub fn norm_exponent(&self, t: f64) -> Result<NormExponent, ModelError> {
        let model = self.model();
        let scaling = self.scaling();
        let n = model.n_particles as f64;
        let pairs = model.pair_count() as f64;
        let triples = model.triple_count() as f64;
        let ln_b = (scaling.b(t)? / scaling.b(self.anchor_t)?).ln();
        let one_body = 0.5 * n * ln_b;
        let flow = |c: &CumulativeCurve| c.value(t) - c.value(self.anchor_t);
        let (two_body, three_body) = match &model.family {
            PairFamily::PowerLawCs { lambda0 } => (pairs * lambda0 * ln_b, 0.0),
            PairFamily::LogCs { .. } => {
                (-0.5 * pairs * flow(self.flow_integral.as_ref().unwrap()), 0.0)
            }
            PairFamily::LogHyperbolic { .. } => {
                let i = flow(self.flow_integral.as_ref().unwrap());
                let h_2m = 0.5 * self.units.hbar / self.units.mass;
                (h_2m * pairs * i, h_2m * triples * i)
            }
            _ => (0.0, 0.0),
        };
        Ok(NormExponent {
            total: one_body + two_body + three_body,
            one_body,
            two_body,
            three_body,
        })
    }

    /// `ln Ψ(config, t)` for the normalized flowing state.
    pub fn log_psi(&self, config: &[f64], t: f64) -> Result<LogPsi, ModelError> {
        let model = self.model();
        assert_eq!(config.len(), model.n_particles);
        let scaling = self.scaling();
        let units = self.units;
        let b = scaling.b(t)?;
        let b_dot = scaling.b_dot(t)?;
        let omega = scaling.omega(t)?;
        let (eta, _) = self.ev.eta_at(t);
        let m_h = units.mass / units.hbar;

        let mut pair_sum = 0.0;
        for i in 0..config.len() {
            for j in (i + 1)..config.len() {
                pair_sum += self.ev.eval(config[i] - config[j], t)?.gamma;
            }
        }
        let sq: f64 = config.iter().map(|x| x * x).sum();
        let ln_amp = pair_sum - 0.5 * m_h * omega * sq - self.norm_exponent(t)?.total;
        let phase = eta * pair_sum
            + 0.5 * m_h * b_dot / b * sq
            + model.n_particles as f64 * self.tau(t);
        Ok(LogPsi { ln_amp, phase })
    }

    /// `ln Φ(config, t)` of the instantaneous-equilibrium reference state,
    /// without a normalization term (the zero mode of the reference
    /// Hamiltonian is real and unnormalized).
    pub fn log_phi_unnormalized(&self, config: &[f64], t: f64) -> Result<f64, ModelError> {
        let scaling = self.scaling();
        let omega = scaling.omega(t)?;
        let m_h = self.units.mass / self.units.hbar;
        let mut s = 0.0;
        for i in 0..config.len() {
            for j in (i + 1)..config.len() {
                s += self.ev.eval(config[i] - config[j], t)?.gamma;
            }
        }
        let sq: f64 = config.iter().map(|x| x * x).sum();
        Ok(s - 0.5 * m_h * omega * sq)
    }
}

/// Dimensionless Schrödinger-equation defect of the flowing state at one
/// configuration,
///
/// `|iħ ∂ₜ ln Ψ + (ħ²/2m) Σ_k [(∂_k ln Ψ)² + ∂_k² ln Ψ] - V| / (ħω₀)`,
///
/// with analytic spatial derivatives and a centered difference of width
/// `dt` for the time derivative. The potential is the parent Hamiltonian in
/// the context's gauge, so the residual vanishes (to interpolation
/// accuracy) exactly when the flow is consistent.
pub fn tdse_residual(
    ctx: &StateContext,
    config: &[f64],
    t: f64,
    dt: f64,
) -> Result<f64, ModelError> {
    let scaling = ctx.scaling();
    let units = ctx.units;
    let hbar = units.hbar;
    let n = config.len();

    let plus = ctx.log_psi(config, t + dt)?.as_complex();
    let minus = ctx.log_psi(config, t - dt)?.as_complex();
    let dln = (plus - minus) / (2.0 * dt);

    let b = scaling.b(t)?;
    let b_dot = scaling.b_dot(t)?;
    let omega = scaling.omega(t)?;
    let (eta, _) = ctx.ev.eta_at(t);
    let m_h = units.mass / hbar;
    let one_body = Complex64::new(-m_h * omega, m_h * b_dot / b);
    let phase_factor = Complex64::new(1.0, eta);

    let mut spatial = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for j in 0..n {
            if j == k {
                continue;
            }
            let g = ctx.ev.eval(config[k] - config[j], t)?;
            g1 += g.d1;
            g2 += g.d2;
        }
        let grad = phase_factor * g1 + one_body * config[k];
        let lap = phase_factor * g2 + one_body;
        spatial += grad * grad + lap;
    }

    let v = potential_energy_with(&ctx.ev, units, config, t, ctx.gauge)?;
    let defect = Complex64::new(0.0, hbar) * dln
        + hbar * hbar / (2.0 * units.mass) * spatial
        - v;
    Ok(defect.norm() / (hbar * scaling.omega0()))
}

/// Residual of the reference state as a zero mode of its own Hamiltonian,
/// `|(ℋ₀ Φ)/Φ| / (ħω₀)`, evaluated through the bucket decomposition.
pub fn zero_mode_residual(
    ctx: &StateContext,
    config: &[f64],
    t: f64,
) -> Result<f64, ModelError> {
    let units = ctx.units;
    let scaling = ctx.scaling();
    let omega = scaling.omega(t)?;
    let m_h = units.mass / units.hbar;
    let n = config.len();

    let mut spatial = 0.0;
    for k in 0..n {
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for j in 0..n {
            if j == k {
                continue;
            }
            let g = ctx.ev.eval(config[k] - config[j], t)?;
            g1 += g.d1;
            g2 += g.d2;
        }
        let grad = g1 - m_h * omega * config[k];
        spatial += grad * grad + g2 - m_h * omega;
    }

    let coeffs = crate::hamiltonian::pseudo_parent_coeffs_with(&ctx.ev, units, t)?;
    let v = crate::hamiltonian::bucket_potential(&coeffs, config, units.mass);
    let defect = -units.hbar * units.hbar / (2.0 * units.mass) * spatial + v;
    Ok(defect.abs() / (units.hbar * scaling.omega0()))
}

/// Draws configurations from `|Ψ(·, t)|²` with a single-particle-move
/// Metropolis walk. Deterministic for a fixed seed. Proposals that land on
/// a contact singularity are rejected.
pub fn sample_configs(
    ctx: &StateContext,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, ModelError> {
    const BURN_IN_SWEEPS: usize = 500;
    const THIN_SWEEPS: usize = 10;

    let model = ctx.model();
    let n = model.n_particles;
    let units = ctx.units;
    let b = ctx.scaling().b(t)?;
    let cloud = b * (units.hbar / (units.mass * ctx.scaling().omega0())).sqrt();
    let step = 0.5 * cloud;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config: Vec<f64> = (0..n)
        .map(|i| cloud * (i as f64 - 0.5 * (n as f64 - 1.0)) + 0.1 * cloud * normal(&mut rng))
        .collect();
    let mut ln_amp = ctx.log_psi(&config, t)?.ln_amp;

    let sweep = |config: &mut Vec<f64>, ln_amp: &mut f64, rng: &mut ChaCha8Rng| {
        for k in 0..n {
            let old = config[k];
            config[k] = old + step * normal(rng);
            match ctx.log_psi(config, t) {
                Ok(lp) => {
                    let accept = lp.ln_amp.is_finite()
                        && 2.0 * (lp.ln_amp - *ln_amp) > rng.random::<f64>().ln();
                    if accept {
                        *ln_amp = lp.ln_amp;
                    } else {
                        config[k] = old;
                    }
                }
                Err(ModelError::ContactSingularity { .. }) => config[k] = old,
                Err(_) => config[k] = old,
            }
        }
    };

    for _ in 0..BURN_IN_SWEEPS {
        sweep(&mut config, &mut ln_amp, &mut rng);
    }
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        for _ in 0..THIN_SWEEPS {
            sweep(&mut config, &mut ln_amp, &mut rng);
        }
        out.push(config.clone());
    }
    Ok(out)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

/// Standalone wrapper around [`StateContext::norm_exponent`].
pub fn normalization_exponent(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
) -> Result<NormExponent, ModelError> {
    StateContext::new(model, scaling, units, TauGauge::Zero)?.norm_exponent(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ermakov::{solve_forward, FrequencyProtocol};
    use crate::model::EtaSchedule;

    fn release() -> ScalingSolution {
        let proto = FrequencyProtocol::trap_release(1.0);
        solve_forward(&proto, 1.0, 0.0, 5.0, 1e-3).unwrap()
    }

    #[test]
    fn norm_exponent_tracks_scale_factor() {
        let s = release();
        let m = ModelSpec::power_law_cs(2.0, 4, 1.0);
        let ctx = StateContext::new(&m, &s, Units::default(), TauGauge::Zero).unwrap();
        let e = ctx.norm_exponent(1.0).unwrap();
        let ln_b = 0.5 * (2.0f64).ln();
        assert!((e.one_body - 2.0 * ln_b).abs() < 1e-9);
        assert!((e.two_body - 12.0 * ln_b).abs() < 1e-9);
        assert_eq!(e.three_body, 0.0);
        assert!((e.total - 14.0 * ln_b).abs() < 1e-9);
    }

    #[test]
    fn running_log_norm_matches_quadrature_rate() {
        let s = release();
        let m = ModelSpec::log_cs(EtaSchedule::Constant { value: 0.3 }, 3, 1.0);
        let ctx = StateContext::new(&m, &s, Units::default(), TauGauge::Zero).unwrap();
        let dt = 1e-4;
        let a = ctx.norm_exponent(1.0 - dt).unwrap().total;
        let b = ctx.norm_exponent(1.0 + dt).unwrap().total;
        let ev = PairEvaluator::new(&m, &s);
        let want = crate::consistency::norm_rate(&ev, Units::default(), 1.0).unwrap();
        assert!(((b - a) / (2.0 * dt) - want).abs() < 1e-6);
    }

    #[test]
    fn log_psi_is_permutation_symmetric() {
        let s = release();
        let m = ModelSpec::exp_ll(-1.0, 4, 1.0);
        let ctx = StateContext::new(&m, &s, Units::default(), TauGauge::EnergyZero).unwrap();
        let a = ctx.log_psi(&[-1.0, 0.2, 0.8, 1.7], 1.3).unwrap();
        let b = ctx.log_psi(&[0.8, 1.7, -1.0, 0.2], 1.3).unwrap();
        assert!((a.ln_amp - b.ln_amp).abs() < 1e-12);
        assert!((a.phase - b.phase).abs() < 1e-12);
    }

    #[test]
    fn residual_vanishes_for_consistent_flow() {
        let s = release();
        let u = Units::default();
        let configs = [
            vec![-1.2, -0.3, 0.4, 1.5],
            vec![-2.1, -0.6, 0.9, 2.4],
        ];
        for m in [
            ModelSpec::exp_ll(-1.0, 4, 1.0),
            ModelSpec::power_law_cs(2.0, 4, 1.0),
            ModelSpec::hyperbolic(1.5, -0.8, 4, 1.0),
            ModelSpec::log_cs(EtaSchedule::Constant { value: 0.3 }, 4, 1.0),
        ] {
            for gauge in [TauGauge::Zero, TauGauge::EnergyZero] {
                let ctx = StateContext::new(&m, &s, u, gauge).unwrap();
                for c in &configs {
                    let r = tdse_residual(&ctx, c, 1.0, 1e-5).unwrap();
                    assert!(
                        r < 1e-6,
                        "{} gauge {:?}: residual {r}",
                        m.family.name(),
                        gauge
                    );
                }
            }
        }
    }

    #[test]
    fn generic_profile_flows_exactly_too() {
        let s = release();
        let m = ModelSpec::generic_even(
            1.0,
            crate::model::GenericGamma::Gaussian { amp: 0.7 },
            3,
            1.0,
        );
        let ctx = StateContext::new(&m, &s, Units::default(), TauGauge::Zero).unwrap();
        let r = tdse_residual(&ctx, &[-1.1, 0.3, 1.4], 1.0, 1e-5).unwrap();
        assert!(r < 1e-6, "residual {r}");
    }

    #[test]
    fn reference_state_is_a_zero_mode() {
        let s = release();
        let u = Units::default();
        for m in [
            ModelSpec::exp_ll(-1.0, 4, 1.0),
            ModelSpec::power_law_cs(2.0, 4, 1.0),
            ModelSpec::hyperbolic(1.5, -0.8, 4, 1.0),
        ] {
            let ctx = StateContext::new(&m, &s, u, TauGauge::Zero).unwrap();
            let r = zero_mode_residual(&ctx, &[-1.4, -0.2, 0.7, 1.8], 1.7).unwrap();
            assert!(r < 1e-6, "{}: {r}", m.family.name());
        }
    }

    #[test]
    fn sampler_is_deterministic_and_contact_free() {
        let s = release();
        let m = ModelSpec::power_law_cs(2.0, 3, 1.0);
        let ctx = StateContext::new(&m, &s, Units::default(), TauGauge::Zero).unwrap();
        let a = sample_configs(&ctx, 0.5, 20, 42).unwrap();
        let b = sample_configs(&ctx, 0.5, 20, 42).unwrap();
        assert_eq!(a, b);
        for c in &a {
            for i in 0..3 {
                for j in (i + 1)..3 {
                    assert!((c[i] - c[j]).abs() > 1e-12);
                }
            }
        }
        let c = sample_configs(&ctx, 0.5, 20, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_width_follows_the_cloud() {
        // After release the cloud dilates by b; second moment of the
        // sampled positions should scale with b² between two times.
        let s = release();
        let m = ModelSpec::exp_ll(-0.4, 2, 1.0);
        let ctx = StateContext::new(&m, &s, Units::default(), TauGauge::Zero).unwrap();
        let m2 = |t: f64| {
            let cfgs = sample_configs(&ctx, t, 400, 7).unwrap();
            cfgs.iter().flatten().map(|x| x * x).sum::<f64>() / (2.0 * 400.0)
        };
        let early = m2(0.0);
        let late = m2(3.0);
        let ratio = late / early;
        let b3 = 10.0;
        assert!(
            (ratio / b3 - 1.0).abs() < 0.35,
            "moment ratio {ratio}, expected ≈ {b3}"
        );
    }
}
