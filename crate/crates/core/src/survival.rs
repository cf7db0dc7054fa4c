//! Survival probabilities after a quench: the squared overlap between the
//! flowing state at time `t` and the same state at a reference time `t₀`,
//! normalized by both norms.
//!
//! All three Gaussian integrals involved share one complex width
//!
//! `α²(t, t₀) = (mω₀/2ħ) [ 1/b² + 1/b₀² - (i/ω₀)(ḃ₀/b₀ - ḃ/b) ]`,
//!
//! and the overlap reduces to expectations of pair-exponent products over
//! independent real Gaussians with the separations rescaled by `|α|`. The
//! sampling measure stays positive for every frozen-phase family, so no
//! sign problem ever appears. For homogeneous pair functions the estimator
//! is exact sample by sample; the direct quadrature in
//! [`sp_direct_quadrature`] keeps the complex width and is the independent
//! cross-check.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ermakov::ScalingSolution;
use crate::error::{ModelError, SurvivalError};
use crate::model::{ModelSpec, PairEvaluator, PairFamily, Units};
use crate::quadrature::{gauss_hermite, normal_inverse_cdf};
use crate::sobol::SobolSeq;

/// The complex Gaussian width shared by the overlap integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFactor {
    /// `α²` itself.
    pub sq: Complex64,
    /// `|α²|`.
    pub abs_sq: f64,
}

/// `α²(t, t₀)` of the scaling flow.
pub fn alpha(
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
    t0: f64,
) -> Result<AlphaFactor, ModelError> {
    let omega0 = scaling.omega0();
    let b = scaling.b(t)?;
    let b0 = scaling.b(t0)?;
    let v = scaling.b_dot(t)?;
    let v0 = scaling.b_dot(t0)?;
    let k = 0.5 * units.mass * omega0 / units.hbar;
    let sq = k * Complex64::new(
        1.0 / (b * b) + 1.0 / (b0 * b0),
        -(v0 / b0 - v / b) / omega0,
    );
    debug_assert!(sq.re > 0.0);
    Ok(AlphaFactor {
        sq,
        abs_sq: sq.norm(),
    })
}

/// The one-body overlap factor `mω₀ / (ħ b b₀ |α²|)`; the survival
/// probability carries its `N`-th power.
pub fn base_factor(
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
    t0: f64,
) -> Result<f64, ModelError> {
    let a = alpha(scaling, units, t, t0)?;
    let b = scaling.b(t)?;
    let b0 = scaling.b(t0)?;
    Ok(units.mass * scaling.omega0() / (units.hbar * b * b0 * a.abs_sq))
}

/// Closed-form survival probability of the inverse-square family:
/// `base^(N + λ₀ N(N-1))`.
pub fn sp_closed_form_cs(
    n: usize,
    lambda0: f64,
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
    t0: f64,
) -> Result<f64, ModelError> {
    let base = base_factor(scaling, units, t, t0)?;
    let nf = n as f64;
    Ok(base.powf(nf + lambda0 * nf * (nf - 1.0)))
}

/// Upper bound for the running-phase logarithmic family: the phase factor
/// can only reduce the overlap below its frozen-phase value
/// `base^(N + N(N-1)/2)`.
pub fn sp_upper_bound_logcs(
    n: usize,
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
    t0: f64,
) -> Result<f64, ModelError> {
    let base = base_factor(scaling, units, t, t0)?;
    let nf = n as f64;
    Ok(base.powf(nf + 0.5 * nf * (nf - 1.0)))
}

/// Random-number source for the overlap estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Counter-based pseudorandom streams, one per batch.
    Pseudo,
    /// Low-discrepancy points with an independent digital shift per batch.
    Sobol,
}

/// Monte Carlo configuration. Results are bitwise reproducible for a fixed
/// spec regardless of thread count: every batch owns an independent stream
/// keyed by its index, and batches are reduced in index order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub n_samples: usize,
    pub seed: u64,
    pub n_batches: usize,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Pseudo,
            n_samples: 1 << 16,
            seed: 7,
            n_batches: 32,
        }
    }
}

/// Survival probability estimate with a batch-spread error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpResult {
    pub sp: f64,
    pub stderr: f64,
    /// One-body factor entering as `base^N`.
    pub base: f64,
    /// Mean pair-expectation ratio across batches.
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub n_samples: usize,
}

const MASK30: u32 = (1 << 30) - 1;

struct BatchAccumulator {
    sum_num: f64,
    sum_den_t: f64,
    sum_den_t0: f64,
}

fn rescale_to_gaussian(u: f64) -> f64 {
    normal_inverse_cdf(u) * std::f64::consts::FRAC_1_SQRT_2
}

/// Uniform draw on the open interval `(0, 1)`: 53-bit mantissa plus a half
/// step, so the Gaussian transform never sees an endpoint.
fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

fn pair_product(
    ev: &PairEvaluator,
    y: &[f64],
    inv_scale: f64,
    terms: &mut dyn FnMut(&PairEvaluator, f64) -> Result<f64, ModelError>,
) -> Result<f64, ModelError> {
    let mut ln = 0.0;
    for i in 0..y.len() {
        for j in (i + 1)..y.len() {
            ln += terms(ev, (y[i] - y[j]) * inv_scale)?;
        }
    }
    Ok(ln.exp())
}

fn reject_running_phase(model: &ModelSpec) -> Result<(), SurvivalError> {
    match &model.family {
        PairFamily::LogCs { .. } | PairFamily::LogHyperbolic { .. } => {
            Err(SurvivalError::Model(ModelError::InadmissibleProtocol {
                reason: format!(
                    "family {} carries a running pair phase; the positive-measure \
                     estimator applies to frozen-phase families only (a closed form \
                     or bound is available instead)",
                    model.family.name()
                ),
            }))
        }
        _ => Ok(()),
    }
}

/// Estimates the survival probability `SP(t, t₀)` by positive-measure Monte
/// Carlo. Frozen-phase families only.
pub fn sp_montecarlo(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
    t0: f64,
    sampler: &SamplerSpec,
) -> Result<SpResult, SurvivalError> {
    reject_running_phase(model)?;
    let ev = PairEvaluator::new(model, scaling);
    let n = model.n_particles;
    let a = alpha(scaling, units, t, t0)?;
    let base = base_factor(scaling, units, t, t0)?;
    let inv_num = 1.0 / a.abs_sq.sqrt();
    // Each norm integral is rescaled by its own real width. For families
    // whose pair function rides the scale factor the two per-sample norm
    // products coincide exactly; keeping both stays correct for the
    // scale-invariant family too.
    let inv_den_t = 1.0 / alpha(scaling, units, t, t)?.abs_sq.sqrt();
    let inv_den_t0 = 1.0 / alpha(scaling, units, t0, t0)?.abs_sq.sqrt();

    let n_batches = sampler.n_batches.max(1);
    let per_batch = sampler.n_samples.div_ceil(n_batches).max(1);

    let stats: Result<Vec<BatchAccumulator>, SurvivalError> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let mut acc = BatchAccumulator {
                sum_num: 0.0,
                sum_den_t: 0.0,
                sum_den_t0: 0.0,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
            rng.set_stream(batch as u64);
            let mut sobol = match sampler.kind {
                SamplerKind::Pseudo => None,
                SamplerKind::Sobol => {
                    let shifts: Vec<u32> =
                        (0..n).map(|_| rng.random::<u32>() & MASK30).collect();
                    Some(SobolSeq::with_shift(n, &shifts))
                }
            };
            let mut y = vec![0.0f64; n];
            let mut point = vec![0.0f64; n];
            for _ in 0..per_batch {
                match &mut sobol {
                    Some(seq) => {
                        seq.next_point(&mut point);
                        for (yy, &u) in y.iter_mut().zip(&point) {
                            *yy = rescale_to_gaussian(u);
                        }
                    }
                    None => {
                        for yy in y.iter_mut() {
                            *yy = rescale_to_gaussian(uniform_open(&mut rng));
                        }
                    }
                }
                let num = pair_product(&ev, &y, inv_num, &mut |e, x| {
                    Ok(e.eval(x, t)?.gamma + e.eval(x, t0)?.gamma)
                })?;
                let den_t = pair_product(&ev, &y, inv_den_t, &mut |e, x| {
                    Ok(2.0 * e.eval(x, t)?.gamma)
                })?;
                let den_t0 = pair_product(&ev, &y, inv_den_t0, &mut |e, x| {
                    Ok(2.0 * e.eval(x, t0)?.gamma)
                })?;
                if !num.is_finite() || !den_t.is_finite() || !den_t0.is_finite() {
                    return Err(SurvivalError::SamplerDivergence {
                        detail: format!(
                            "non-finite pair product at t = {t}: {num} / {den_t} / {den_t0}"
                        ),
                    });
                }
                acc.sum_num += num;
                acc.sum_den_t += den_t;
                acc.sum_den_t0 += den_t0;
            }
            Ok(acc)
        })
        .collect();
    let stats = stats?;

    let ratios: Vec<f64> = stats
        .iter()
        .map(|s| {
            if s.sum_den_t <= 0.0 || s.sum_den_t0 <= 0.0 {
                return Err(SurvivalError::SamplerDivergence {
                    detail: "normalization estimate is not positive".into(),
                });
            }
            Ok(s.sum_num / (s.sum_den_t * s.sum_den_t0).sqrt())
        })
        .collect::<Result<_, _>>()?;
    let nb = ratios.len() as f64;
    let ratio = ratios.iter().sum::<f64>() / nb;
    let var = if ratios.len() > 1 {
        ratios.iter().map(|r| (r - ratio) * (r - ratio)).sum::<f64>() / (nb - 1.0)
    } else {
        0.0
    };
    let ratio_stderr = (var / nb).sqrt();
    let base_n = base.powi(n as i32);
    Ok(SpResult {
        sp: base_n * ratio * ratio,
        stderr: base_n * 2.0 * ratio * ratio_stderr,
        base,
        ratio,
        ratio_stderr,
        n_samples: per_batch * n_batches,
    })
}

const QUADRATURE_MAX_N: usize = 3;
const QUADRATURE_NODES: usize = 128;

/// Evaluates the three overlap integrals by tensor-product quadrature with
/// the complex Gaussian width kept exactly. Available up to three
/// particles.
pub fn sp_direct_quadrature(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    units: Units,
    t: f64,
    t0: f64,
) -> Result<f64, SurvivalError> {
    reject_running_phase(model)?;
    let n = model.n_particles;
    if n > QUADRATURE_MAX_N {
        return Err(SurvivalError::DimensionTooLarge {
            n,
            max: QUADRATURE_MAX_N,
        });
    }
    let ev = PairEvaluator::new(model, scaling);
    let (nodes, weights) = gauss_hermite(QUADRATURE_NODES);

    let overlap = |ta: f64, tb: f64| -> Result<Complex64, SurvivalError> {
        let a = alpha(scaling, units, ta, tb)?;
        let re = a.sq.re;
        let im_over_re = a.sq.im / re;
        let scale = 1.0 / re.sqrt();
        let mut idx = vec![0usize; n];
        let mut total = Complex64::new(0.0, 0.0);
        loop {
            let mut w = 1.0;
            let mut sq = 0.0;
            let mut x = [0.0f64; QUADRATURE_MAX_N];
            for (d, &i) in idx.iter().enumerate() {
                w *= weights[i];
                let xd = nodes[i] * scale;
                x[d] = xd;
                sq += nodes[i] * nodes[i];
            }
            let mut ln = 0.0;
            let mut vanished = false;
            'pairs: for i in 0..n {
                for j in (i + 1)..n {
                    match ev.eval(x[i] - x[j], ta) {
                        Ok(g) => ln += g.gamma,
                        Err(ModelError::ContactSingularity { .. }) => {
                            vanished = true;
                            break 'pairs;
                        }
                        Err(e) => return Err(e.into()),
                    }
                    match ev.eval(x[i] - x[j], tb) {
                        Ok(g) => ln += g.gamma,
                        Err(ModelError::ContactSingularity { .. }) => {
                            vanished = true;
                            break 'pairs;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            if !vanished {
                let phase = Complex64::new(0.0, -im_over_re * sq).exp();
                total += w * ln.exp() * phase;
            }
            // odometer over the tensor grid
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < QUADRATURE_NODES {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == n {
                    return Ok(total * Complex64::from(scale.powi(n as i32)));
                }
            }
        }
    };

    let num = overlap(t, t0)?;
    let den_t = overlap(t, t)?;
    let den_t0 = overlap(t0, t0)?;
    Ok(num.norm_sqr() / (den_t.re * den_t0.re))
}

/// Late-time decay law `SP(t) ≈ C / b(t)^p` after a release or an
/// interaction switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoteModel {
    /// Late-time logarithmic expansion rate `ḃ/b → r₀` (zero for a free
    /// expansion).
    pub r0: f64,
    /// `|α²(∞, t₀)|`.
    pub alpha_inf_abs_sq: f64,
    /// Decay exponent `p`.
    pub decay_power: f64,
    /// Prefactor `C`.
    pub prefactor: f64,
}

impl AsymptoteModel {
    /// Predicted survival probability at scale factor `b`.
    pub fn predict(&self, b: f64) -> f64 {
        self.prefactor * b.powf(-self.decay_power)
    }
}

fn tail_rate(scaling: &ScalingSolution) -> Result<f64, SurvivalError> {
    if let Some(r0) = scaling.r0_hint() {
        return Ok(r0);
    }
    let grid = crate::model::dedup_grid(scaling.grid());
    let m = grid.len();
    if m < 8 {
        return Err(SurvivalError::NoAsymptote {
            reason: "grid too short to estimate the late-time expansion rate".into(),
        });
    }
    let tail = &grid[m - m / 5 - 1..];
    let mut rates = Vec::with_capacity(tail.len());
    for &s in tail {
        let b = scaling.b(s).map_err(ModelError::from)?;
        let v = scaling.b_dot(s).map_err(ModelError::from)?;
        rates.push(v / b);
    }
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let scale = mean.abs().max(scaling.omega0() * 1e-6);
    if (hi - lo) / scale > 0.01 {
        return Err(SurvivalError::NoAsymptote {
            reason: format!(
                "late-time expansion rate has not settled: spread {:.3e} around {:.3e}",
                hi - lo,
                mean
            ),
        });
    }
    Ok(mean)
}

/// Fits the late-time decay law of the survival probability. Requires a
/// trapped reference (`ω₀ > 0`), a frozen-phase family, and a settled
/// late-time expansion rate (an explicit hint on the scaling solution or a
/// flat tail).
pub fn sp_asymptote(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    units: Units,
    t0: f64,
    sampler: &SamplerSpec,
) -> Result<AsymptoteModel, SurvivalError> {
    reject_running_phase(model)?;
    if scaling.omega0() <= 0.0 {
        return Err(SurvivalError::NoAsymptote {
            reason: "no trap scale: ω₀ must be positive for a reference state".into(),
        });
    }
    let r0 = tail_rate(scaling)?;
    let b0 = scaling.b(t0).map_err(ModelError::from)?;
    let v0 = scaling.b_dot(t0).map_err(ModelError::from)?;
    let omega0 = scaling.omega0();
    let k = 0.5 * units.mass * omega0 / units.hbar;
    let alpha_inf = Complex64::new(k / (b0 * b0), -k * (v0 / b0 - r0) / omega0);
    let alpha_inf_abs_sq = alpha_inf.norm();
    let kb = units.mass * omega0 / (units.hbar * b0 * alpha_inf_abs_sq);

    let n = model.n_particles;
    let nf = n as f64;
    let pairs_f = model.pair_count() as f64;

    let (decay_power, prefactor) = match &model.family {
        PairFamily::PowerLawCs { lambda0 } => {
            let p = nf + lambda0 * nf * (nf - 1.0);
            (p, kb.powf(p))
        }
        PairFamily::Hyperbolic { lambda0, c0 } => {
            // At late times the pair function degenerates to its power-law
            // core plus a scale term per pair; the scale term joins the
            // decay power, the core joins the prefactor expectation.
            let p = nf + lambda0 * nf * (nf - 1.0);
            let ratio = asymptote_ratio(
                model,
                scaling,
                units,
                t0,
                sampler,
                alpha_inf_abs_sq,
                &mut |y: f64| lambda0 * y.abs().ln(),
            )?;
            let c = kb.powf(nf)
                * (c0.abs() / alpha_inf_abs_sq.sqrt()).powf(2.0 * lambda0 * pairs_f)
                * ratio
                * ratio;
            (p, c)
        }
        PairFamily::ExpLl { .. } | PairFamily::GenericEven { .. } => {
            let ratio = asymptote_ratio(
                model,
                scaling,
                units,
                t0,
                sampler,
                alpha_inf_abs_sq,
                &mut |_| 0.0,
            )?;
            (nf, kb.powf(nf) * ratio * ratio)
        }
        PairFamily::LogCs { .. } | PairFamily::LogHyperbolic { .. } => unreachable!(),
    };

    Ok(AsymptoteModel {
        r0,
        alpha_inf_abs_sq,
        decay_power,
        prefactor,
    })
}

/// `E[Π f_∞(y_ij) e^{Γ(y_ij/|α_∞|, t₀)}] / E[Π e^{2Γ(y_ij/|α₀₀|, t₀)}]`
/// with the late-time pair limit `f_∞` supplied per family.
fn asymptote_ratio(
    model: &ModelSpec,
    scaling: &ScalingSolution,
    units: Units,
    t0: f64,
    sampler: &SamplerSpec,
    alpha_inf_abs_sq: f64,
    limit_log: &mut dyn FnMut(f64) -> f64,
) -> Result<f64, SurvivalError> {
    let ev = PairEvaluator::new(model, scaling);
    let n = model.n_particles;
    let inv_num = 1.0 / alpha_inf_abs_sq.sqrt();
    let a00 = alpha(scaling, units, t0, t0)?;
    let inv_den = 1.0 / a00.abs_sq.sqrt();

    let n_batches = sampler.n_batches.max(1);
    let per_batch = sampler.n_samples.div_ceil(n_batches).max(1);
    let mut sum_num = 0.0;
    let mut sum_den = 0.0;
    for batch in 0..n_batches {
        let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
        rng.set_stream(batch as u64);
        let mut sobol = match sampler.kind {
            SamplerKind::Pseudo => None,
            SamplerKind::Sobol => {
                let shifts: Vec<u32> = (0..n).map(|_| rng.random::<u32>() & MASK30).collect();
                Some(SobolSeq::with_shift(n, &shifts))
            }
        };
        let mut y = vec![0.0f64; n];
        let mut point = vec![0.0f64; n];
        for _ in 0..per_batch {
            match &mut sobol {
                Some(seq) => {
                    seq.next_point(&mut point);
                    for (yy, &u) in y.iter_mut().zip(&point) {
                        *yy = rescale_to_gaussian(u);
                    }
                }
                None => {
                    for yy in y.iter_mut() {
                        *yy = rescale_to_gaussian(uniform_open(&mut rng));
                    }
                }
            }
            let mut ln_num = 0.0;
            let mut ln_den = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = y[i] - y[j];
                    ln_num += limit_log(d) + ev.eval(d * inv_num, t0)?.gamma;
                    ln_den += 2.0 * ev.eval(d * inv_den, t0)?.gamma;
                }
            }
            let (num, den) = (ln_num.exp(), ln_den.exp());
            if !num.is_finite() || !den.is_finite() {
                return Err(SurvivalError::SamplerDivergence {
                    detail: format!("non-finite late-time pair product: {num} / {den}"),
                });
            }
            sum_num += num;
            sum_den += den;
        }
    }
    if sum_den <= 0.0 {
        return Err(SurvivalError::SamplerDivergence {
            detail: "late-time normalization estimate is not positive".into(),
        });
    }
    Ok(sum_num / sum_den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ermakov::{solve_forward, FrequencyProtocol};

    fn release() -> ScalingSolution {
        let proto = FrequencyProtocol::trap_release(1.0);
        solve_forward(&proto, 1.0, 0.0, 5.0, 1e-3).unwrap()
    }

    #[test]
    fn alpha_release_frozen_value() {
        let s = release();
        let a = alpha(&s, Units::default(), 1.0, 0.0).unwrap();
        assert!((a.abs_sq - 0.79056941504209483).abs() < 1e-9, "{}", a.abs_sq);
        let base = base_factor(&s, Units::default(), 1.0, 0.0).unwrap();
        assert!((base - 0.89442719099991588).abs() < 1e-9, "{base}");
    }

    #[test]
    fn survival_is_one_at_the_reference_time() {
        let s = release();
        let m = ModelSpec::exp_ll(-1.0, 3, 1.0);
        let r = sp_montecarlo(
            &m,
            &s,
            Units::default(),
            0.0,
            0.0,
            &SamplerSpec {
                n_samples: 1024,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((r.sp - 1.0).abs() < 1e-12, "{}", r.sp);
        assert!(r.stderr < 1e-12);
    }

    #[test]
    fn inverse_square_estimator_has_zero_variance() {
        let s = release();
        let m = ModelSpec::power_law_cs(2.0, 4, 1.0);
        let r = sp_montecarlo(
            &m,
            &s,
            Units::default(),
            1.0,
            0.0,
            &SamplerSpec {
                n_samples: 2048,
                ..Default::default()
            },
        )
        .unwrap();
        let exact = sp_closed_form_cs(4, 2.0, &s, Units::default(), 1.0, 0.0).unwrap();
        assert!((r.sp - exact).abs() < 1e-12 * exact, "{} vs {exact}", r.sp);
        assert!(r.stderr < 1e-14, "stderr {}", r.stderr);
    }

    #[test]
    fn quadrature_matches_closed_form_for_polynomial_pairs() {
        let s = release();
        let u = Units::default();
        let m = ModelSpec::power_law_cs(2.0, 2, 1.0);
        let q = sp_direct_quadrature(&m, &s, u, 1.0, 0.0).unwrap();
        let exact = sp_closed_form_cs(2, 2.0, &s, u, 1.0, 0.0).unwrap();
        assert!((q - exact).abs() < 1e-12, "{q} vs {exact}");

        let m3 = ModelSpec::power_law_cs(1.0, 3, 1.0);
        let q3 = sp_direct_quadrature(&m3, &s, u, 2.0, 0.0).unwrap();
        let exact3 = sp_closed_form_cs(3, 1.0, &s, u, 2.0, 0.0).unwrap();
        assert!((q3 - exact3).abs() < 1e-10, "{q3} vs {exact3}");
    }

    #[test]
    fn estimators_are_thread_count_invariant_and_seeded() {
        let s = release();
        let m = ModelSpec::exp_ll(-1.0, 3, 1.0);
        let spec = SamplerSpec {
            n_samples: 4096,
            ..Default::default()
        };
        let r1 = sp_montecarlo(&m, &s, Units::default(), 1.0, 0.0, &spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let r2 = pool.install(|| sp_montecarlo(&m, &s, Units::default(), 1.0, 0.0, &spec).unwrap());
        assert_eq!(r1.sp.to_bits(), r2.sp.to_bits());
        assert_eq!(r1.stderr.to_bits(), r2.stderr.to_bits());

        let other = SamplerSpec {
            seed: 8,
            ..spec
        };
        let r3 = sp_montecarlo(&m, &s, Units::default(), 1.0, 0.0, &other).unwrap();
        assert_ne!(r1.sp.to_bits(), r3.sp.to_bits());
    }

    #[test]
    fn sobol_and_pseudo_agree() {
        let s = release();
        let m = ModelSpec::exp_ll(-1.0, 3, 1.0);
        let u = Units::default();
        let pseudo = sp_montecarlo(
            &m,
            &s,
            u,
            1.0,
            0.0,
            &SamplerSpec {
                n_samples: 1 << 15,
                ..Default::default()
            },
        )
        .unwrap();
        let sobol = sp_montecarlo(
            &m,
            &s,
            u,
            1.0,
            0.0,
            &SamplerSpec {
                kind: SamplerKind::Sobol,
                n_samples: 1 << 15,
                ..Default::default()
            },
        )
        .unwrap();
        let tol = 4.0 * (pseudo.stderr + sobol.stderr) + 1e-6;
        assert!(
            (pseudo.sp - sobol.sp).abs() < tol,
            "{} vs {} (tol {tol})",
            pseudo.sp,
            sobol.sp
        );
    }

    #[test]
    fn running_phase_families_are_rejected() {
        let s = release();
        let m = ModelSpec::log_cs(crate::model::EtaSchedule::Zero, 3, 1.0);
        let err = sp_montecarlo(&m, &s, Units::default(), 1.0, 0.0, &SamplerSpec::default());
        assert!(matches!(
            err,
            Err(SurvivalError::Model(ModelError::InadmissibleProtocol { .. }))
        ));
    }

    #[test]
    fn quadrature_dimension_gate() {
        let s = release();
        let m = ModelSpec::power_law_cs(2.0, 4, 1.0);
        let err = sp_direct_quadrature(&m, &s, Units::default(), 1.0, 0.0);
        assert!(matches!(
            err,
            Err(SurvivalError::DimensionTooLarge { n: 4, max: 3 })
        ));
    }

    #[test]
    fn release_asymptote_matches_closed_form_for_cs() {
        // Free expansion: r₀ = 0, b₀ = 1, ḃ₀ = 0, |α∞²| = mω₀/2ħ.
        let mut s = release();
        s.set_r0_hint(Some(0.0));
        let u = Units::default();
        let m = ModelSpec::power_law_cs(2.0, 3, 1.0);
        let a = sp_asymptote(&m, &s, u, 0.0, &SamplerSpec::default()).unwrap();
        assert_eq!(a.r0, 0.0);
        assert!((a.alpha_inf_abs_sq - 0.5).abs() < 1e-12);
        assert!((a.decay_power - 15.0).abs() < 1e-12);
        assert!((a.prefactor - 2.0f64.powi(15)).abs() < 1e-9);
        assert!((a.predict(2.0) - 2.0f64.powi(15) / 2.0f64.powi(15)).abs() < 1e-9);
    }
}
