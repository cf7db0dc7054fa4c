//! Scaling-factor dynamics.
//!
//! A time-dependent trap frequency `Ω(t)` drives the scaling factor `b(t)`
//! through
//!
//! `b̈ + Ω²(t) b = ω₀² / b³,  b(0) = 1`
//!
//! and every equilibrium-preserving flow in this crate is built from a
//! solution of that equation. The solver integrates forward with classical
//! RK4, splits the time axis at protocol discontinuities so no step
//! straddles a frequency jump, and accepts a solution only after an
//! independent finite-difference defect check; failing that, it halves the
//! step and retries.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{ErmakovError, ModelError};
use crate::quadrature::{cubic_hermite, cubic_hermite_deriv};

/// The squared trap frequency `Ω²(t)` as a function of time. Negative values
/// describe an inverted (expelling) trap.
#[derive(Clone)]
pub enum FrequencyProtocol {
    /// `Ω² ≡ ω²` for all times.
    Constant { omega_sq: f64 },
    /// Constant segments separated by instantaneous jumps. `omega_sq` has one
    /// more entry than `switch_times`; at a switch time the new value applies.
    PiecewiseConstant {
        switch_times: Vec<f64>,
        omega_sq: Vec<f64>,
    },
    /// The interaction-ramp profile `Ω²(t) = 16 ω₀² u⁴ - κ² (1 - u)` with
    /// `u = 1 / (1 + e^{κt})`. It interpolates from `ω₀² - κ²/2` at `t = 0`
    /// to `-κ²` as `t → ∞` and admits the closed-form scaling factor
    /// `b(t) = (1 + e^{κt}) / 2`.
    Sigmoid { omega0: f64, kappa: f64 },
    /// Linear interpolation through tabulated `(t, Ω²)` samples, clamped
    /// outside the table.
    Tabulated { times: Vec<f64>, omega_sq: Vec<f64> },
    /// An arbitrary profile. `jumps` lists times where it is discontinuous.
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        jumps: Vec<f64>,
    },
}

impl std::fmt::Debug for FrequencyProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant { omega_sq } => write!(f, "Constant {{ omega_sq: {omega_sq} }}"),
            Self::PiecewiseConstant {
                switch_times,
                omega_sq,
            } => write!(
                f,
                "PiecewiseConstant {{ switch_times: {switch_times:?}, omega_sq: {omega_sq:?} }}"
            ),
            Self::Sigmoid { omega0, kappa } => {
                write!(f, "Sigmoid {{ omega0: {omega0}, kappa: {kappa} }}")
            }
            Self::Tabulated { times, .. } => {
                write!(f, "Tabulated {{ {} samples }}", times.len())
            }
            Self::Custom { jumps, .. } => write!(f, "Custom {{ jumps: {jumps:?} }}"),
        }
    }
}

impl FrequencyProtocol {
    /// Sudden trap removal at `t = 0`: `Ω² = ω₀²` before, `0` after.
    pub fn trap_release(omega0: f64) -> Self {
        Self::PiecewiseConstant {
            switch_times: vec![0.0],
            omega_sq: vec![omega0 * omega0, 0.0],
        }
    }

    /// `Ω²(t)`. At a discontinuity the right-sided value is returned.
    pub fn omega_sq(&self, t: f64) -> f64 {
        self.omega_sq_biased(t, false)
    }

    fn omega_sq_biased(&self, t: f64, left: bool) -> f64 {
        match self {
            Self::Constant { omega_sq } => *omega_sq,
            Self::PiecewiseConstant {
                switch_times,
                omega_sq,
            } => {
                let k = if left {
                    switch_times.partition_point(|&s| s < t)
                } else {
                    switch_times.partition_point(|&s| s <= t)
                };
                omega_sq[k]
            }
            Self::Sigmoid { omega0, kappa } => {
                let u = 1.0 / (1.0 + (kappa * t).exp());
                16.0 * omega0 * omega0 * u.powi(4) - kappa * kappa * (1.0 - u)
            }
            Self::Tabulated { times, omega_sq } => {
                let n = times.len();
                if t <= times[0] {
                    return omega_sq[0];
                }
                if t >= times[n - 1] {
                    return omega_sq[n - 1];
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                omega_sq[i] * (1.0 - w) + omega_sq[i + 1] * w
            }
            Self::Custom { f, .. } => f(t),
        }
    }

    /// Times where `Ω²` jumps.
    pub fn jumps(&self) -> Vec<f64> {
        match self {
            Self::PiecewiseConstant { switch_times, .. } => switch_times.clone(),
            Self::Custom { jumps, .. } => jumps.clone(),
            _ => Vec::new(),
        }
    }
}

/// A scaling factor trajectory: `b`, `ḃ`, and `b̈` tabulated on a grid, with
/// cubic Hermite interpolation between nodes. Consecutive duplicate grid
/// times mark protocol discontinuities; the duplicated node stores the
/// left- and right-sided `b̈`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingSolution {
    omega0: f64,
    ts: Vec<f64>,
    b: Vec<f64>,
    b_dot: Vec<f64>,
    b_ddot: Vec<f64>,
    /// Inclusive node ranges with uniform spacing.
    segments: Vec<(usize, usize)>,
    /// Late-time growth rate `ḃ/b → r₀`, when known analytically.
    r0_hint: Option<f64>,
}

impl ScalingSolution {
    /// Builds a solution from closed-form `(b, ḃ, b̈)` at each grid time.
    pub fn from_analytic(
        omega0: f64,
        ts: Vec<f64>,
        mut f: impl FnMut(f64) -> (f64, f64, f64),
    ) -> Self {
        assert!(ts.len() >= 2);
        let mut b = Vec::with_capacity(ts.len());
        let mut b_dot = Vec::with_capacity(ts.len());
        let mut b_ddot = Vec::with_capacity(ts.len());
        for &t in &ts {
            let (bi, vi, ai) = f(t);
            b.push(bi);
            b_dot.push(vi);
            b_ddot.push(ai);
        }
        let segments = vec![(0, ts.len() - 1)];
        Self {
            omega0,
            ts,
            b,
            b_dot,
            b_ddot,
            segments,
            r0_hint: None,
        }
    }

    /// Builds a solution from uniformly spaced `(t, b, ḃ)` samples,
    /// reconstructing `b̈` by fourth-order finite differences of `ḃ`
    /// (second-order one-sided at the edges).
    pub fn from_samples(
        omega0: f64,
        ts: Vec<f64>,
        b: Vec<f64>,
        b_dot: Vec<f64>,
    ) -> Result<Self, ErmakovError> {
        let n = ts.len();
        assert!(n >= 5, "need at least five samples");
        assert_eq!(b.len(), n);
        assert_eq!(b_dot.len(), n);
        let h = ts[1] - ts[0];
        for w in ts.windows(2) {
            assert!(
                ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs(),
                "samples must be uniformly spaced"
            );
        }
        for (i, &bi) in b.iter().enumerate() {
            if bi <= 0.0 {
                return Err(ErmakovError::NonPositiveScaling { t: ts[i], b: bi });
            }
        }
        let mut b_ddot = vec![0.0; n];
        for i in 0..n {
            b_ddot[i] = if i >= 2 && i + 2 < n {
                (-b_dot[i + 2] + 8.0 * b_dot[i + 1] - 8.0 * b_dot[i - 1] + b_dot[i - 2])
                    / (12.0 * h)
            } else if i + 2 < n {
                (-3.0 * b_dot[i] + 4.0 * b_dot[i + 1] - b_dot[i + 2]) / (2.0 * h)
            } else {
                (3.0 * b_dot[i] - 4.0 * b_dot[i - 1] + b_dot[i - 2]) / (2.0 * h)
            };
        }
        let segments = vec![(0, n - 1)];
        Ok(Self {
            omega0,
            ts,
            b,
            b_dot,
            b_ddot,
            segments,
            r0_hint: None,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn t_min(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn grid(&self) -> &[f64] {
        &self.ts
    }

    pub fn nodes(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        (&self.ts, &self.b, &self.b_dot, &self.b_ddot)
    }

    pub fn segments(&self) -> &[(usize, usize)] {
        &self.segments
    }

    pub fn r0_hint(&self) -> Option<f64> {
        self.r0_hint
    }

    pub fn set_r0_hint(&mut self, r0: Option<f64>) {
        self.r0_hint = r0;
    }

    fn locate(&self, t: f64) -> Result<(usize, f64, f64), ModelError> {
        let lo = self.t_min();
        let hi = self.t_max();
        let grace = 1e-9 * (1.0 + (hi - lo).abs());
        if t < lo - grace || t > hi + grace {
            return Err(ModelError::OutOfGrid { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        let n = self.ts.len();
        let mut i = match self.ts.partition_point(|&u| u <= t) {
            0 => 0,
            k => (k - 1).min(n - 2),
        };
        if self.ts[i + 1] == self.ts[i] {
            i = if i + 2 < n { i + 1 } else { i - 1 };
        }
        let h = self.ts[i + 1] - self.ts[i];
        Ok((i, (t - self.ts[i]) / h, h))
    }

    pub fn b(&self, t: f64) -> Result<f64, ModelError> {
        let (i, s, h) = self.locate(t)?;
        Ok(cubic_hermite(
            s,
            h,
            self.b[i],
            self.b[i + 1],
            self.b_dot[i],
            self.b_dot[i + 1],
        ))
    }

    pub fn b_dot(&self, t: f64) -> Result<f64, ModelError> {
        let (i, s, h) = self.locate(t)?;
        Ok(cubic_hermite(
            s,
            h,
            self.b_dot[i],
            self.b_dot[i + 1],
            self.b_ddot[i],
            self.b_ddot[i + 1],
        ))
    }

    pub fn b_ddot(&self, t: f64) -> Result<f64, ModelError> {
        let (i, s, h) = self.locate(t)?;
        Ok(cubic_hermite_deriv(
            s,
            h,
            self.b_dot[i],
            self.b_dot[i + 1],
            self.b_ddot[i],
            self.b_ddot[i + 1],
        ))
    }

    /// Instantaneous frequency `ω(t) = ω₀ / b²`.
    pub fn omega(&self, t: f64) -> Result<f64, ModelError> {
        Ok(self.omega0 / self.b(t)?.powi(2))
    }

    /// `ω̇(t) = -2 ω ḃ / b`.
    pub fn omega_dot(&self, t: f64) -> Result<f64, ModelError> {
        let b = self.b(t)?;
        let v = self.b_dot(t)?;
        Ok(-2.0 * self.omega0 * v / b.powi(3))
    }

    /// The squeezing rate `ḃ / 2b`.
    pub fn squeeze(&self, t: f64) -> Result<f64, ModelError> {
        Ok(0.5 * self.b_dot(t)? / self.b(t)?)
    }

    /// The trap curvature this trajectory realizes: `Ω² = ω₀²/b⁴ - b̈/b`.
    pub fn omega_sq_effective(&self, t: f64) -> Result<f64, ModelError> {
        let b = self.b(t)?;
        Ok(self.omega0.powi(2) / b.powi(4) - self.b_ddot(t)? / b)
    }
}

const B_FLOOR: f64 = 1e-8;
const B_CEIL: f64 = 1e8;
const MAX_HALVINGS: u32 = 12;

/// Integrates the scaling equation forward from `b(0) = 1, ḃ(0) = b_dot0`
/// to `t_end`, storing nodes roughly `dt` apart. The result is checked by an
/// independent finite-difference defect; the step is halved (up to twelve
/// times) until the defect passes `1e-8 · max(ω₀², |Ω²|) · b` pointwise.
pub fn solve_forward(
    proto: &FrequencyProtocol,
    omega0: f64,
    b_dot0: f64,
    t_end: f64,
    dt: f64,
) -> Result<ScalingSolution, ErmakovError> {
    assert!(omega0 > 0.0, "reference frequency must be positive");
    assert!(t_end > 0.0 && dt > 0.0);

    let mut jumps: Vec<f64> = proto
        .jumps()
        .into_iter()
        .filter(|&s| s > 0.0 && s < t_end)
        .collect();
    jumps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    jumps.dedup();
    let mut bounds = vec![0.0];
    bounds.extend(jumps);
    bounds.push(t_end);

    let mut h_target = dt;
    let mut last_err = None;
    for _ in 0..=MAX_HALVINGS {
        match integrate(proto, omega0, b_dot0, &bounds, h_target) {
            Ok(sol) => {
                let (worst_t, worst_res, worst_tol) = worst_defect(&sol, proto);
                if worst_res <= worst_tol {
                    return Ok(sol);
                }
                last_err = Some(ErmakovError::StepFailure {
                    t: worst_t,
                    residual: worst_res,
                    tolerance: worst_tol,
                });
            }
            Err(e @ ErmakovError::BlowUp { .. }) => return Err(e),
            Err(e) => last_err = Some(e),
        }
        h_target *= 0.5;
    }
    Err(last_err.unwrap())
}

fn integrate(
    proto: &FrequencyProtocol,
    omega0: f64,
    b_dot0: f64,
    bounds: &[f64],
    h_target: f64,
) -> Result<ScalingSolution, ErmakovError> {
    let om_sq = omega0 * omega0;
    let rhs = |t: f64, b: f64, v: f64, left: bool| -> (f64, f64) {
        (v, om_sq / (b * b * b) - proto.omega_sq_biased(t, left) * b)
    };

    let mut ts = Vec::new();
    let mut bs = Vec::new();
    let mut vs = Vec::new();
    let mut accs = Vec::new();
    let mut segments = Vec::new();

    let mut b = 1.0;
    let mut v = b_dot0;
    for (si, w) in bounds.windows(2).enumerate() {
        let (a, z) = (w[0], w[1]);
        let n = ((z - a) / h_target).ceil().max(1.0) as usize;
        let h = (z - a) / n as f64;

        let seg_start = ts.len();
        ts.push(a);
        bs.push(b);
        vs.push(v);
        accs.push(rhs(a, b, v, false).1);

        for k in 0..n {
            let t = a + k as f64 * h;
            let at_end = k + 1 == n;
            // Sample the final stage left-biased so a step never reads the
            // next segment's frequency.
            let (k1b, k1v) = rhs(t, b, v, false);
            let (k2b, k2v) = rhs(t + 0.5 * h, b + 0.5 * h * k1b, v + 0.5 * h * k1v, false);
            let (k3b, k3v) = rhs(t + 0.5 * h, b + 0.5 * h * k2b, v + 0.5 * h * k2v, false);
            let (k4b, k4v) = rhs(t + h, b + h * k3b, v + h * k3v, at_end);
            b += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            let t_next = if at_end { z } else { a + (k + 1) as f64 * h };
            if !(B_FLOOR..B_CEIL).contains(&b) || !b.is_finite() || !v.is_finite() {
                return Err(ErmakovError::BlowUp { t: t_next, b });
            }
            ts.push(t_next);
            bs.push(b);
            vs.push(v);
            accs.push(rhs(t_next, b, v, at_end).1);
        }
        segments.push((seg_start, ts.len() - 1));
        let _ = si;
    }

    Ok(ScalingSolution {
        omega0,
        ts,
        b: bs,
        b_dot: vs,
        b_ddot: accs,
        segments,
        r0_hint: None,
    })
}

fn worst_defect(sol: &ScalingSolution, proto: &FrequencyProtocol) -> (f64, f64, f64) {
    let mut worst = (sol.t_min(), 0.0, f64::INFINITY);
    let mut worst_ratio = -1.0;
    for &(i0, i1) in &sol.segments {
        if i1 - i0 < 4 {
            continue;
        }
        let h = sol.ts[i0 + 1] - sol.ts[i0];
        for i in (i0 + 2)..=(i1 - 2) {
            let fd = (-sol.b_dot[i + 2] + 8.0 * sol.b_dot[i + 1] - 8.0 * sol.b_dot[i - 1]
                + sol.b_dot[i - 2])
                / (12.0 * h);
            let om_sq = proto.omega_sq_biased(sol.ts[i], false);
            let defect =
                (fd + om_sq * sol.b[i] - sol.omega0.powi(2) / sol.b[i].powi(3)).abs();
            let tol = 1e-8 * sol.omega0.powi(2).max(om_sq.abs()) * sol.b[i];
            if defect / tol > worst_ratio {
                worst_ratio = defect / tol;
                worst = (sol.ts[i], defect, tol);
            }
        }
    }
    worst
}

/// The maximum finite-difference defect `|b̈ + Ω²b - ω₀²/b³|` over the
/// interior grid nodes, with `b̈` reconstructed from the stored `ḃ` samples
/// rather than taken from the solution.
pub fn ermakov_residual(sol: &ScalingSolution, proto: &FrequencyProtocol) -> f64 {
    let mut max_defect: f64 = 0.0;
    for &(i0, i1) in &sol.segments {
        if i1 - i0 < 4 {
            continue;
        }
        let h = sol.ts[i0 + 1] - sol.ts[i0];
        for i in (i0 + 2)..=(i1 - 2) {
            let fd = (-sol.b_dot[i + 2] + 8.0 * sol.b_dot[i + 1] - 8.0 * sol.b_dot[i - 1]
                + sol.b_dot[i - 2])
                / (12.0 * h);
            let om_sq = proto.omega_sq_biased(sol.ts[i], false);
            let defect = (fd + om_sq * sol.b[i] - sol.omega0.powi(2) / sol.b[i].powi(3)).abs();
            max_defect = max_defect.max(defect);
        }
    }
    max_defect
}

/// Recovers the driving protocol from a trajectory as tabulated
/// `Ω²(t) = ω₀²/b⁴ - b̈/b`, with `b̈` from fourth-order finite differences
/// of the stored `ḃ` inside each segment.
pub fn frequency_from_scaling(sol: &ScalingSolution) -> FrequencyProtocol {
    let mut times = Vec::new();
    let mut omega_sq = Vec::new();
    for &(i0, i1) in &sol.segments {
        if i1 - i0 < 4 {
            continue;
        }
        let h = sol.ts[i0 + 1] - sol.ts[i0];
        for i in (i0 + 2)..=(i1 - 2) {
            let fd = (-sol.b_dot[i + 2] + 8.0 * sol.b_dot[i + 1] - 8.0 * sol.b_dot[i - 1]
                + sol.b_dot[i - 2])
                / (12.0 * h);
            times.push(sol.ts[i]);
            omega_sq.push(sol.omega0.powi(2) / sol.b[i].powi(4) - fd / sol.b[i]);
        }
    }
    FrequencyProtocol::Tabulated { times, omega_sq }
}

/// Relative drift of the first integral
/// `E = ½ḃ² + ½Ω²b² + ω₀²/(2b²)`
/// over the grid nodes in `[t0, t1]`, where `Ω²` must be constant on that
/// window. Exact solutions keep `E` constant.
pub fn conserved_energy_drift(sol: &ScalingSolution, omega_sq: f64, t0: f64, t1: f64) -> f64 {
    let om0_sq = sol.omega0 * sol.omega0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, &t) in sol.ts.iter().enumerate() {
        if t < t0 || t > t1 {
            continue;
        }
        let e = 0.5 * sol.b_dot[i].powi(2)
            + 0.5 * omega_sq * sol.b[i].powi(2)
            + 0.5 * om0_sq / sol.b[i].powi(2);
        lo = lo.min(e);
        hi = hi.max(e);
    }
    assert!(lo.is_finite(), "window contains no grid nodes");
    (hi - lo) / lo.abs().max(f64::MIN_POSITIVE)
}
