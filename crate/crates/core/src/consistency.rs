//! Flow-consistency and Hermiticity diagnostics.
//!
//! A pair-product state follows the scaling flow under a Hermitian
//! Hamiltonian only if the imaginary part of the local energy it demands is
//! position independent; the constant is the log-normalization rate. The
//! checks here evaluate that imaginary part structure by structure (one
//! particle, one pair, one triple of particles) on grids or sampled
//! configurations and report the mean together with its spread. A valid
//! protocol leaves the spread at interpolation-noise level; an inconsistent
//! phase schedule shows up as a spread of order one.
//!
//! All reported quantities are rates (inverse time). Spreads are normalized
//! by the trap frequency `ω₀`.

use serde::Serialize;

use crate::ermakov::ScalingSolution;
use crate::error::ModelError;
use crate::model::{EtaSchedule, ModelSpec, PairEvaluator, PairFamily, Units};

/// Mean and spread of a sampled rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct SpreadStat {
    pub mean: f64,
    /// `max - min` over the samples.
    pub spread: f64,
    /// Spread divided by `ω₀`.
    pub normalized_spread: f64,
}

impl SpreadStat {
    fn from_samples(samples: &[f64], omega0: f64) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &s in samples {
            lo = lo.min(s);
            hi = hi.max(s);
            sum += s;
        }
        let spread = hi - lo;
        Self {
            mean: sum / samples.len() as f64,
            spread,
            normalized_spread: spread / omega0,
        }
    }
}

/// Outcome of [`hermiticity_check`] at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub t: f64,
    /// Per-particle rate; `ḃ/2b` for every admissible protocol.
    pub per_particle: SpreadStat,
    /// Per-pair rate; constant in the pair separation iff admissible.
    pub per_pair: SpreadStat,
    /// Per-triple rate; nonzero only with a running pair phase.
    pub per_triple: SpreadStat,
    /// Total log-normalization rate assembled from the means.
    pub norm_rate: f64,
    /// Largest of the three normalized spreads.
    pub worst_spread: f64,
}

fn particle_rate(scaling: &ScalingSolution, units: Units, t: f64, x: f64) -> Result<f64, ModelError> {
    let b = scaling.b(t)?;
    let b_dot = scaling.b_dot(t)?;
    let omega = scaling.omega(t)?;
    let omega_dot = scaling.omega_dot(t)?;
    let m_h = units.mass / units.hbar;
    Ok(-0.5 * m_h * x * x * (omega_dot + 2.0 * omega * b_dot / b) + 0.5 * b_dot / b)
}

fn pair_rate(
    ev: &PairEvaluator,
    units: Units,
    eta: f64,
    t: f64,
    x: f64,
) -> Result<f64, ModelError> {
    let g = ev.eval(x, t)?;
    let scaling = ev.scaling();
    let b = scaling.b(t)?;
    let b_dot = scaling.b_dot(t)?;
    let omega = scaling.omega(t)?;
    let h_m = units.hbar / units.mass;
    Ok(h_m * eta * (g.d2 + 2.0 * g.d1 * g.d1) + (b_dot / b - eta * omega) * x * g.d1 + g.dt)
}

fn triple_rate(
    ev: &PairEvaluator,
    units: Units,
    eta: f64,
    t: f64,
    xi: f64,
    xj: f64,
    xk: f64,
) -> Result<f64, ModelError> {
    let gij = ev.eval(xi - xj, t)?.d1;
    let gik = ev.eval(xi - xk, t)?.d1;
    let gjk = ev.eval(xj - xk, t)?.d1;
    let w3 = gij * gik - gij * gjk + gik * gjk;
    Ok(2.0 * units.hbar / units.mass * eta * w3)
}

/// Evaluates the per-structure rates of the state on explicit
/// configurations and reports their spreads.
///
/// `eta_override`, when given, replaces the family's phase schedule
/// *without* an admissibility check: feeding an inconsistent schedule and
/// watching the pair spread blow up is the point of the diagnostic.
/// Configurations must avoid coinciding particles for contact-singular
/// families.
pub fn hermiticity_check(
    model: &ModelSpec,
    eta_override: Option<&EtaSchedule>,
    scaling: &ScalingSolution,
    units: Units,
    configs: &[Vec<f64>],
    t: f64,
) -> Result<ConsistencyReport, ModelError> {
    let ev = PairEvaluator::new(model, scaling);
    let eta = match eta_override {
        Some(s) => s.eta(t),
        None => ev.eta_at(t).0,
    };
    let n = model.n_particles;

    let mut ones = Vec::new();
    let mut pairs = Vec::new();
    let mut triples = Vec::new();
    for config in configs {
        assert_eq!(config.len(), n, "configuration size must match the model");
        for &x in config {
            ones.push(particle_rate(scaling, units, t, x)?);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push(pair_rate(&ev, units, eta, t, config[i] - config[j])?);
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    triples.push(triple_rate(&ev, units, eta, t, config[i], config[j], config[k])?);
                }
            }
        }
    }

    let omega0 = model.omega0;
    let per_particle = SpreadStat::from_samples(&ones, omega0);
    let per_pair = SpreadStat::from_samples(&pairs, omega0);
    let per_triple = SpreadStat::from_samples(&triples, omega0);
    let norm_rate = n as f64 * per_particle.mean
        + model.pair_count() as f64 * per_pair.mean
        + model.triple_count() as f64 * per_triple.mean;
    let worst_spread = per_particle
        .normalized_spread
        .max(per_pair.normalized_spread)
        .max(per_triple.normalized_spread);
    Ok(ConsistencyReport {
        t,
        per_particle,
        per_pair,
        per_triple,
        norm_rate,
        worst_spread,
    })
}

/// Per-pair rate statistics over a separation grid, one row per time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRateRow {
    pub t: f64,
    pub mean: f64,
    pub spread: f64,
    pub normalized_spread: f64,
}

/// Sweeps the per-pair rate over `x_grid` at each time in `t_grid`. The
/// rate is constant in `x` exactly when the protocol is admissible.
pub fn two_body_residual(
    model: &ModelSpec,
    eta_override: Option<&EtaSchedule>,
    scaling: &ScalingSolution,
    units: Units,
    x_grid: &[f64],
    t_grid: &[f64],
) -> Result<Vec<PairRateRow>, ModelError> {
    let ev = PairEvaluator::new(model, scaling);
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let eta = match eta_override {
            Some(s) => s.eta(t),
            None => ev.eta_at(t).0,
        };
        let mut samples = Vec::with_capacity(x_grid.len());
        for &x in x_grid {
            samples.push(pair_rate(&ev, units, eta, t, x)?);
        }
        let s = SpreadStat::from_samples(&samples, model.omega0);
        rows.push(PairRateRow {
            t,
            mean: s.mean,
            spread: s.spread,
            normalized_spread: s.normalized_spread,
        });
    }
    Ok(rows)
}

/// One-body phase diagnostics at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseFitRow {
    pub t: f64,
    /// Drift rate extracted from a linear fit of the one-body phase
    /// gradient combination over `x_grid`.
    pub fitted_rate: f64,
    /// The same rate from the flow directly: `ηω - ḃ/b`.
    pub expected_rate: f64,
    /// Fit intercept; vanishes for a centered protocol.
    pub intercept: f64,
    /// Largest deviation from linearity, normalized by `ω₀` and the grid
    /// extent.
    pub nonlinearity: f64,
    /// Uniform imaginary curvature `mḃ/(ħb)` of the one-body exponent.
    pub breathing_rate: f64,
}

/// Fits the one-body phase gradient combination `ηΛ' + φ'` to a line in
/// `x` at each time. The slope recovers `-(m/ħ)(ηω - ḃ/b)`, the intercept
/// and the nonlinearity must vanish for any scaling flow.
pub fn one_body_residual(
    eta: &EtaSchedule,
    scaling: &ScalingSolution,
    units: Units,
    x_grid: &[f64],
    t_grid: &[f64],
) -> Result<Vec<PhaseFitRow>, ModelError> {
    assert!(x_grid.len() >= 2, "need at least two abscissas to fit");
    let m_h = units.mass / units.hbar;
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let b = scaling.b(t)?;
        let b_dot = scaling.b_dot(t)?;
        let omega = scaling.omega(t)?;
        let e = eta.eta(t);

        let s: Vec<f64> = x_grid
            .iter()
            .map(|&x| (e * (-m_h * omega) + m_h * b_dot / b) * x)
            .collect();
        let n = x_grid.len() as f64;
        let mx = x_grid.iter().sum::<f64>() / n;
        let ms = s.iter().sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut sxs = 0.0;
        for (&x, &v) in x_grid.iter().zip(&s) {
            sxx += (x - mx) * (x - mx);
            sxs += (x - mx) * (v - ms);
        }
        let slope = sxs / sxx;
        let intercept = ms - slope * mx;
        let scale = x_grid.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
        let mut dev = 0.0f64;
        for (&x, &v) in x_grid.iter().zip(&s) {
            dev = dev.max((v - (slope * x + intercept)).abs());
        }
        rows.push(PhaseFitRow {
            t,
            fitted_rate: -slope / m_h,
            expected_rate: e * omega - b_dot / b,
            intercept,
            nonlinearity: dev / (m_h * scaling.omega0() * scale),
            breathing_rate: m_h * b_dot / b,
        });
    }
    Ok(rows)
}

/// Closed-form log-normalization rate of the flowing state.
///
/// Every family with a frozen pair phase contributes `ḃ/2b` per particle
/// and nothing per pair; a running phase adds the family's constant pair
/// (and triple) rates.
pub fn norm_rate(ev: &PairEvaluator, units: Units, t: f64) -> Result<f64, ModelError> {
    let model = ev.model();
    let scaling = ev.scaling();
    let n = model.n_particles as f64;
    let pairs = model.pair_count() as f64;
    let triples = model.triple_count() as f64;
    let b = scaling.b(t)?;
    let b_dot = scaling.b_dot(t)?;
    let base = 0.5 * n * b_dot / b;
    let rate = match &model.family {
        PairFamily::PowerLawCs { lambda0 } => base + pairs * lambda0 * b_dot / b,
        PairFamily::LogCs { eta } => {
            let omega = scaling.omega(t)?;
            let c2 = eta.eta(t) * omega - b_dot / b;
            base - 0.5 * pairs * c2
        }
        PairFamily::LogHyperbolic { eta, .. } => {
            let (c, _) = ev.coupling(t)?;
            base + 0.5 * units.hbar / units.mass * eta.eta(t) * c * c * (pairs + triples)
        }
        PairFamily::Hyperbolic { .. } | PairFamily::ExpLl { .. } | PairFamily::GenericEven { .. } => {
            base
        }
    };
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ermakov::{solve_forward, FrequencyProtocol};

    fn release() -> ScalingSolution {
        let proto = FrequencyProtocol::trap_release(1.0);
        solve_forward(&proto, 1.0, 0.0, 5.0, 1e-3).unwrap()
    }

    fn held() -> ScalingSolution {
        let proto = FrequencyProtocol::Constant { omega_sq: 1.0 };
        solve_forward(&proto, 1.0, 0.0, 5.0, 1e-3).unwrap()
    }

    fn sample_configs() -> Vec<Vec<f64>> {
        vec![
            vec![-1.3, -0.4, 0.2, 1.1],
            vec![-2.0, -0.9, 0.5, 1.7],
            vec![-0.8, 0.1, 0.6, 2.3],
        ]
    }

    #[test]
    fn phase_fit_recovers_release_drift() {
        let s = release();
        let xs: Vec<f64> = (0..21).map(|i| -2.0 + 0.2 * i as f64).collect();
        let rows = one_body_residual(&EtaSchedule::Zero, &s, Units::default(), &xs, &[1.0]).unwrap();
        let r = &rows[0];
        // ḃ/b = t/(1+t²) = 1/2 at t = 1, so the drift rate is -1/2.
        assert!((r.fitted_rate + 0.5).abs() < 1e-9, "{}", r.fitted_rate);
        assert!((r.expected_rate + 0.5).abs() < 1e-9);
        assert!(r.intercept.abs() < 1e-12);
        assert!(r.nonlinearity < 1e-12);
        assert!((r.breathing_rate - 0.5).abs() < 1e-9);
    }

    #[test]
    fn pair_rate_family_table() {
        let s = release();
        let u = Units::default();
        let xs: Vec<f64> = (1..40).map(|i| -2.0 + 0.1 * i as f64)
            .filter(|x| x.abs() > 1e-6)
            .collect();
        let t = 1.0;
        let bdot_over_b = 0.5;

        let cs = ModelSpec::power_law_cs(2.0, 4, 1.0);
        let rows = two_body_residual(&cs, None, &s, u, &xs, &[t]).unwrap();
        assert!((rows[0].mean - 2.0 * bdot_over_b).abs() < 1e-8);
        assert!(rows[0].normalized_spread < 1e-8);

        let eta = EtaSchedule::Constant { value: 0.3 };
        let logcs = ModelSpec::log_cs(eta, 4, 1.0);
        let rows = two_body_residual(&logcs, None, &s, u, &xs, &[t]).unwrap();
        // -𝒞₂/2 with 𝒞₂ = ηω - ḃ/b, ω = 1/2 at t = 1.
        let want = -(0.3 * 0.5 - 0.5) / 2.0;
        assert!((rows[0].mean - want).abs() < 1e-8, "{}", rows[0].mean);
        assert!(rows[0].normalized_spread < 1e-8);

        for m in [
            ModelSpec::exp_ll(-1.0, 4, 1.0),
            ModelSpec::hyperbolic(1.5, -0.8, 4, 1.0),
        ] {
            let rows = two_body_residual(&m, None, &s, u, &xs, &[t]).unwrap();
            assert!(rows[0].mean.abs() < 1e-8, "{}", m.family.name());
            assert!(rows[0].normalized_spread < 1e-8);
        }
    }

    #[test]
    fn running_phase_pair_rate_tracks_coupling() {
        // Held trap, constant η: the coupling grows as c₀ e^{ω₀ηt} and the
        // pair rate is ηc²/2.
        let s = held();
        let u = Units::default();
        let eta = EtaSchedule::Constant { value: 0.3 };
        let m = ModelSpec::log_hyperbolic(0.7, eta, 4, 1.0);
        let xs = [-1.5, -0.7, 0.4, 1.2, 2.1];
        let t = 0.5;
        let rows = two_body_residual(&m, None, &s, u, &xs, &[t]).unwrap();
        let c = 0.7 * (0.3f64 * t).exp();
        assert!((rows[0].mean - 0.3 * c * c / 2.0).abs() < 1e-6, "{}", rows[0].mean);
        assert!(rows[0].normalized_spread < 1e-8);
    }

    #[test]
    fn valid_protocol_passes_hermiticity() {
        let s = release();
        let m = ModelSpec::exp_ll(-1.0, 4, 1.0);
        let r = hermiticity_check(&m, None, &s, Units::default(), &sample_configs(), 1.0).unwrap();
        assert!(r.worst_spread < 1e-8, "worst spread {}", r.worst_spread);
        // 𝒩̇ = (N/2)(ḃ/b) = 1 at t = 1.
        assert!((r.norm_rate - 1.0).abs() < 1e-8, "{}", r.norm_rate);
        assert!((r.per_particle.mean - 0.25).abs() < 1e-9);
    }

    #[test]
    fn injected_phase_fails_hermiticity() {
        let s = release();
        let m = ModelSpec::exp_ll(-1.0, 4, 1.0);
        let eta = EtaSchedule::Constant { value: 0.5 };
        let r = hermiticity_check(&m, Some(&eta), &s, Units::default(), &sample_configs(), 1.0)
            .unwrap();
        assert!(
            r.per_pair.normalized_spread > 1e-4,
            "corruption not detected: {}",
            r.per_pair.normalized_spread
        );
    }

    #[test]
    fn triple_rate_constant_for_running_phase() {
        let s = held();
        let eta = EtaSchedule::Constant { value: 0.3 };
        let m = ModelSpec::log_hyperbolic(0.7, eta, 4, 1.0);
        let t = 0.5;
        let r = hermiticity_check(&m, None, &s, Units::default(), &sample_configs(), t).unwrap();
        let c = 0.7 * (0.3f64 * t).exp();
        assert!((r.per_triple.mean - 0.3 * c * c / 2.0).abs() < 1e-6);
        assert!(r.worst_spread < 1e-7, "worst {}", r.worst_spread);
    }

    #[test]
    fn closed_form_norm_rate_matches_sampled() {
        let s = release();
        let u = Units::default();
        for m in [
            ModelSpec::power_law_cs(2.0, 4, 1.0),
            ModelSpec::log_cs(EtaSchedule::Constant { value: 0.3 }, 4, 1.0),
            ModelSpec::exp_ll(-1.0, 4, 1.0),
            ModelSpec::hyperbolic(1.5, -0.8, 4, 1.0),
        ] {
            let ev = PairEvaluator::new(&m, &s);
            let closed = norm_rate(&ev, u, 1.0).unwrap();
            let sampled = hermiticity_check(&m, None, &s, u, &sample_configs(), 1.0)
                .unwrap()
                .norm_rate;
            assert!(
                (closed - sampled).abs() < 1e-8,
                "{}: {closed} vs {sampled}",
                m.family.name()
            );
        }
    }
}
