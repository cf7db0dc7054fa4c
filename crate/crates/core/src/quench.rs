//! Preset quench scenarios: sudden trap release, a smooth interaction
//! switch driven by a sigmoid frequency ramp, and a sudden pair-phase
//! switch-off. Each scenario supplies its exact scaling solution, the
//! matching frequency protocol and phase schedule, a coefficient schedule
//! for the driving Hamiltonian (with any impulsive kick listed separately),
//! and the closed-form uniform phase where one exists.

use serde::{Deserialize, Serialize};

use crate::ermakov::{FrequencyProtocol, ScalingSolution};
use crate::error::{ModelError, ScenarioError};
use crate::hamiltonian::{parent_coeffs_with, GaugeTau, HamiltonianCoeffs, TauGauge};
use crate::model::{EtaSchedule, ModelSpec, PairEvaluator, PairFamily, Units};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum QuenchScenario {
    /// The trap is switched off at `t = 0`; the cloud expands freely with
    /// `b = √(1 + ω₀²t²)`.
    TrapRelease { omega0: f64 },
    /// A sigmoid frequency ramp that carries `b` from `1/2` to exponential
    /// growth at rate `κ`, switching the effective interaction smoothly.
    #[serde(rename = "interaction_sigmoid")]
    InteractionSigmoid { omega0: f64, kappa: f64, t0: f64 },
    /// The pair phase `η` drops from `eta0` to zero at `t = 0` while the
    /// trap stays on; the drive needs one impulsive log-pair kick.
    #[serde(rename = "logcs_phase_slip")]
    LogCsPhaseSlip { omega0: f64, eta0: f64 },
}

impl QuenchScenario {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TrapRelease { .. } => "trap_release",
            Self::InteractionSigmoid { .. } => "interaction_sigmoid",
            Self::LogCsPhaseSlip { .. } => "logcs_phase_slip",
        }
    }

    pub fn omega0(&self) -> f64 {
        match self {
            Self::TrapRelease { omega0 }
            | Self::InteractionSigmoid { omega0, .. }
            | Self::LogCsPhaseSlip { omega0, .. } => *omega0,
        }
    }
}

/// The frequency protocol realizing the scenario.
pub fn scenario_protocol(s: &QuenchScenario) -> FrequencyProtocol {
    match s {
        QuenchScenario::TrapRelease { omega0 } => FrequencyProtocol::trap_release(*omega0),
        QuenchScenario::InteractionSigmoid { omega0, kappa, .. } => FrequencyProtocol::Sigmoid {
            omega0: *omega0,
            kappa: *kappa,
        },
        QuenchScenario::LogCsPhaseSlip { omega0, .. } => FrequencyProtocol::Constant {
            omega_sq: omega0 * omega0,
        },
    }
}

/// The pair-phase schedule the scenario assumes of the model.
pub fn scenario_eta(s: &QuenchScenario) -> EtaSchedule {
    match s {
        QuenchScenario::LogCsPhaseSlip { eta0, .. } => EtaSchedule::Step { before: *eta0 },
        _ => EtaSchedule::Zero,
    }
}

/// The exact scaling solution on an explicit grid. The grid should contain
/// `t = 0` as a node for the sudden scenarios so that interpolation never
/// straddles the switch.
pub fn scenario_scaling(
    s: &QuenchScenario,
    t_grid: &[f64],
) -> Result<ScalingSolution, ScenarioError> {
    if t_grid.len() < 2 {
        return Err(ScenarioError::IncompatibleScenario {
            reason: "time grid needs at least two nodes".into(),
        });
    }
    let sol = match s {
        QuenchScenario::TrapRelease { omega0 } => {
            let w = *omega0;
            let mut sol = ScalingSolution::from_analytic(w, t_grid.to_vec(), |t| {
                if t <= 0.0 {
                    (1.0, 0.0, 0.0)
                } else {
                    let b = (1.0 + w * w * t * t).sqrt();
                    (b, w * w * t / b, w * w / (b * b * b))
                }
            });
            sol.set_r0_hint(Some(0.0));
            sol
        }
        QuenchScenario::InteractionSigmoid { omega0, kappa, .. } => {
            let k = *kappa;
            let mut sol = ScalingSolution::from_analytic(*omega0, t_grid.to_vec(), |t| {
                let b = 0.5 * (1.0 + (k * t).exp());
                (b, k * (b - 0.5), k * k * (b - 0.5))
            });
            sol.set_r0_hint(Some(k));
            sol
        }
        QuenchScenario::LogCsPhaseSlip { omega0, .. } => {
            ScalingSolution::from_analytic(*omega0, t_grid.to_vec(), |_| (1.0, 0.0, 0.0))
        }
    };
    Ok(sol)
}

fn check_model(s: &QuenchScenario, model: &ModelSpec) -> Result<(), ScenarioError> {
    if (model.omega0 - s.omega0()).abs() > 1e-12 * s.omega0().abs().max(1.0) {
        return Err(ScenarioError::IncompatibleScenario {
            reason: format!(
                "model trap frequency {} does not match the scenario's {}",
                model.omega0,
                s.omega0()
            ),
        });
    }
    match s {
        QuenchScenario::LogCsPhaseSlip { eta0, .. } => match &model.family {
            PairFamily::LogCs {
                eta: EtaSchedule::Step { before },
            } if (before - eta0).abs() < 1e-12 => Ok(()),
            _ => Err(ScenarioError::IncompatibleScenario {
                reason: format!(
                    "the phase-slip scenario needs the logarithmic family with a step \
                     schedule dropping from {eta0} to zero; got {}",
                    model.family.name()
                ),
            }),
        },
        _ => {
            if model.family.eta().is_zero() {
                Ok(())
            } else {
                Err(ScenarioError::IncompatibleScenario {
                    reason: format!(
                        "scenario {} drives a frozen-phase flow but the model carries a \
                         running pair phase",
                        s.name()
                    ),
                })
            }
        }
    }
}

/// An impulsive term in the drive, `prefactor · δ(t - time) · (operator)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpulseRecord {
    pub time: f64,
    pub prefactor: f64,
    pub kind: ImpulseKind,
}

/// Operator attached to an impulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpulseKind {
    /// `Σ_{i<j} ln|x_i - x_j|`.
    LogPairSum,
}

/// A coefficient schedule along a time grid plus any impulsive kicks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleResult {
    pub rows: Vec<HamiltonianCoeffs>,
    pub impulses: Vec<ImpulseRecord>,
}

/// Tabulates the driving Hamiltonian of the scenario over `t_grid`.
pub fn scenario_schedule(
    s: &QuenchScenario,
    model: &ModelSpec,
    units: Units,
    t_grid: &[f64],
    gauge: TauGauge,
) -> Result<ScheduleResult, ScenarioError> {
    check_model(s, model)?;
    let scaling = scenario_scaling(s, t_grid)?;
    let ev = PairEvaluator::new(model, &scaling);
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        rows.push(parent_coeffs_with(&ev, None, units, t, gauge)?);
    }
    let impulses = match s {
        QuenchScenario::LogCsPhaseSlip { eta0, .. } => vec![ImpulseRecord {
            time: 0.0,
            prefactor: 0.5 * units.hbar * eta0,
            kind: ImpulseKind::LogPairSum,
        }],
        _ => Vec::new(),
    };
    Ok(ScheduleResult { rows, impulses })
}

/// `∫ ω dt` from `0` to `t` for the release flow: `arctan(ω₀t)` after the
/// switch, `ω₀ t` while the trap is still on.
fn release_omega_integral(omega0: f64, t: f64) -> f64 {
    if t <= 0.0 {
        omega0 * t
    } else {
        (omega0 * t).atan()
    }
}

/// The uniform phase `τ(t)` of the zero-offset gauge, anchored at
/// `τ(0) = 0`, in closed form where the scenario admits one.
///
/// The release and phase-slip scenarios integrate exactly for every
/// closed-form family. The sigmoid scenario falls back to quadrature from
/// `t0` (anchored at `τ(t0) = 0`); see [`sigmoid_tau_infinity_estimate`]
/// for its leading late-time value.
pub fn scenario_tau(
    s: &QuenchScenario,
    model: &ModelSpec,
    units: Units,
    t: f64,
) -> Result<f64, ScenarioError> {
    check_model(s, model)?;
    let n = model.n_particles as f64;
    let hbar = units.hbar;
    let mass = units.mass;
    match s {
        QuenchScenario::TrapRelease { omega0 } => {
            let i_omega = release_omega_integral(*omega0, t);
            // ∫ c² dt rides the same integral: c² = c₀²/b² = (c₀²/ω₀) ω.
            let i_c2_over_c0sq = i_omega / omega0;
            let tau = match &model.family {
                PairFamily::PowerLawCs { lambda0 } => {
                    -0.5 * (1.0 + lambda0 * (n - 1.0)) * i_omega
                }
                PairFamily::LogCs { .. } => -(0.5 + 0.25 * (n - 1.0)) * i_omega,
                PairFamily::Hyperbolic { lambda0, c0 } => {
                    -0.5 * i_omega
                        + hbar * lambda0 * lambda0 * c0 * c0 * (n * n - 1.0) / (6.0 * mass)
                            * i_c2_over_c0sq
                }
                PairFamily::ExpLl { c0 } => {
                    -0.5 * i_omega
                        + hbar * c0 * c0 * (n * n - 1.0) / (6.0 * mass) * i_c2_over_c0sq
                }
                PairFamily::LogHyperbolic { c0, .. } => {
                    -0.5 * i_omega
                        + hbar * c0 * c0 * (n * n - 1.0) / (24.0 * mass) * i_c2_over_c0sq
                }
                PairFamily::GenericEven { .. } => {
                    return Err(ScenarioError::IncompatibleScenario {
                        reason: "no closed-form uniform phase for generic pair profiles".into(),
                    })
                }
            };
            Ok(tau)
        }
        QuenchScenario::LogCsPhaseSlip { omega0, .. } => {
            Ok(-0.25 * (n + 1.0) * omega0 * t)
        }
        QuenchScenario::InteractionSigmoid { kappa, t0, .. } => {
            if matches!(model.family, PairFamily::GenericEven { .. }) {
                return Err(ScenarioError::IncompatibleScenario {
                    reason: "no closed-form uniform phase for generic pair profiles".into(),
                });
            }
            let t_end = t.max(*t0 + 1.0);
            let n_nodes = (((t_end - t0) / (0.01 / kappa)).ceil() as usize).clamp(64, 400_000);
            let grid: Vec<f64> = (0..=n_nodes)
                .map(|i| t0 + (t_end - t0) * i as f64 / n_nodes as f64)
                .collect();
            let scaling = scenario_scaling(s, &grid)?;
            let gt = GaugeTau::build(model, &scaling, units).map_err(ModelError::from)?;
            Ok(gt.value_from(*t0, t))
        }
    }
}

/// Leading late-time value of the sigmoid scenario's uniform phase for the
/// contact family, `τ(∞) ≈ (2ω₀ - 2ħ(N²-1)c₀²/3m) t₀`, valid for
/// `κ|t₀| ≫ 1`. The subleading correction is `-4/κ` on the integral of
/// `1/b²`.
pub fn sigmoid_tau_infinity_estimate(
    s: &QuenchScenario,
    model: &ModelSpec,
    units: Units,
) -> Result<f64, ScenarioError> {
    let QuenchScenario::InteractionSigmoid { omega0, t0, .. } = s else {
        return Err(ScenarioError::IncompatibleScenario {
            reason: "late-time phase estimate applies to the sigmoid scenario only".into(),
        });
    };
    check_model(s, model)?;
    let PairFamily::ExpLl { c0 } = model.family else {
        return Err(ScenarioError::IncompatibleScenario {
            reason: "late-time phase estimate is derived for the contact family".into(),
        });
    };
    let n = model.n_particles as f64;
    Ok((2.0 * omega0 - 2.0 * units.hbar * (n * n - 1.0) * c0 * c0 / (3.0 * units.mass)) * t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }

    #[test]
    fn release_scaling_matches_closed_form() {
        let s = QuenchScenario::TrapRelease { omega0: 2.0 };
        let sol = scenario_scaling(&s, &grid(-1.0, 3.0, 4000)).unwrap();
        assert_relative_eq!(sol.b(-0.5).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            sol.b(1.5).unwrap(),
            (1.0 + 4.0 * 2.25f64).sqrt(),
            max_relative = 1e-9
        );
        assert_eq!(sol.r0_hint(), Some(0.0));
    }

    #[test]
    fn sigmoid_scaling_growth_rate() {
        let s = QuenchScenario::InteractionSigmoid {
            omega0: 1.0,
            kappa: 5.0,
            t0: -10.0,
        };
        let sol = scenario_scaling(&s, &grid(-10.0, 4.0, 14000)).unwrap();
        assert_relative_eq!(sol.b(-10.0).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(sol.b(0.0).unwrap(), 1.0, max_relative = 1e-12);
        let late = sol.b_dot(3.5).unwrap() / sol.b(3.5).unwrap();
        assert_relative_eq!(late, 5.0, max_relative = 1e-6);
        assert_eq!(sol.r0_hint(), Some(5.0));
    }

    #[test]
    fn phase_slip_needs_matching_model() {
        let s = QuenchScenario::LogCsPhaseSlip {
            omega0: 1.0,
            eta0: 0.4,
        };
        let good = ModelSpec::log_cs(EtaSchedule::Step { before: 0.4 }, 3, 1.0);
        let bad = ModelSpec::exp_ll(-1.0, 3, 1.0);
        let ts = grid(-1.0, 1.0, 100);
        assert!(scenario_schedule(&s, &good, Units::default(), &ts, TauGauge::Zero).is_ok());
        let err = scenario_schedule(&s, &bad, Units::default(), &ts, TauGauge::Zero);
        assert!(matches!(
            err,
            Err(ScenarioError::IncompatibleScenario { .. })
        ));
    }

    #[test]
    fn phase_slip_schedule_has_one_log_impulse() {
        let s = QuenchScenario::LogCsPhaseSlip {
            omega0: 2.0,
            eta0: 0.4,
        };
        let model = ModelSpec::log_cs(EtaSchedule::Step { before: 0.4 }, 3, 2.0);
        let ts = grid(-1.0, 1.0, 200);
        let sched = scenario_schedule(&s, &model, Units::default(), &ts, TauGauge::Zero).unwrap();
        assert_eq!(sched.impulses.len(), 1);
        let imp = &sched.impulses[0];
        assert_eq!(imp.time, 0.0);
        assert_relative_eq!(imp.prefactor, 0.2, max_relative = 1e-12);
        assert_eq!(imp.kind, ImpulseKind::LogPairSum);
        // Inverse-square coefficient strengthens when the phase drops.
        let before = sched.rows[0].inv_sq;
        let after = sched.rows.last().unwrap().inv_sq;
        assert!((before - (-(1.0 + 0.16) / 4.0)).abs() < 1e-12);
        assert!((after - (-0.25)).abs() < 1e-12);
    }

    #[test]
    fn release_tau_closed_forms() {
        let u = Units::default();
        let s = QuenchScenario::TrapRelease { omega0: 1.0 };
        // Contact family, N = 4, c₀ = -1: τ(1) = 2 arctan(1) = π/2.
        let ll = ModelSpec::exp_ll(-1.0, 4, 1.0);
        let tau = scenario_tau(&s, &ll, u, 1.0).unwrap();
        assert_relative_eq!(tau, std::f64::consts::FRAC_PI_2, max_relative = 1e-12);
        // And against the quadrature gauge on the solver flow.
        let sol = scenario_scaling(&s, &(0..=4000).map(|i| -1.0 + i as f64 * 1e-3).collect::<Vec<_>>()).unwrap();
        let quad = crate::hamiltonian::gauge_tau(&ll, &sol, u, 1.0).unwrap();
        assert_relative_eq!(tau, quad, max_relative = 1e-6);

        let cs = ModelSpec::power_law_cs(2.0, 3, 1.0);
        let tau_cs = scenario_tau(&s, &cs, u, 2.0).unwrap();
        assert_relative_eq!(tau_cs, -2.5 * (2.0f64).atan(), max_relative = 1e-12);
    }

    #[test]
    fn phase_slip_tau_is_linear_through_the_kick() {
        let s = QuenchScenario::LogCsPhaseSlip {
            omega0: 2.0,
            eta0: 0.4,
        };
        let model = ModelSpec::log_cs(EtaSchedule::Step { before: 0.4 }, 3, 2.0);
        let u = Units::default();
        for &t in &[-0.5, 0.0, 0.5, 1.0] {
            let tau = scenario_tau(&s, &model, u, t).unwrap();
            assert_relative_eq!(tau, -2.0 * t, max_relative = 1e-12);
        }
    }

    #[test]
    fn sigmoid_tau_approaches_estimate() {
        let s = QuenchScenario::InteractionSigmoid {
            omega0: 1.0,
            kappa: 5.0,
            t0: -10.0,
        };
        let model = ModelSpec::exp_ll(-1.0, 4, 1.0);
        let u = Units::default();
        let est = sigmoid_tau_infinity_estimate(&s, &model, u).unwrap();
        assert_relative_eq!(est, 80.0, max_relative = 1e-12);
        let tau = scenario_tau(&s, &model, u, 8.0).unwrap();
        // Exact: (2.5 - 0.5)(−4t₀ − 4/κ) = 2 · 39.2 = 78.4.
        assert_relative_eq!(tau, 78.4, max_relative = 1e-4);
        assert!((tau - est).abs() < 2.0);
    }

    #[test]
    fn scenario_json_round_trip() {
        let scenarios = [
            QuenchScenario::TrapRelease { omega0: 1.0 },
            QuenchScenario::InteractionSigmoid {
                omega0: 1.0,
                kappa: 5.0,
                t0: -10.0,
            },
            QuenchScenario::LogCsPhaseSlip {
                omega0: 1.0,
                eta0: 0.4,
            },
        ];
        for s in &scenarios {
            let j = serde_json::to_string(s).unwrap();
            let back: QuenchScenario = serde_json::from_str(&j).unwrap();
            assert_eq!(*s, back);
        }
        let j: QuenchScenario =
            serde_json::from_str(r#"{"preset":"trap_release","omega0":2.0}"#).unwrap();
        assert_eq!(j, QuenchScenario::TrapRelease { omega0: 2.0 });
    }
}
