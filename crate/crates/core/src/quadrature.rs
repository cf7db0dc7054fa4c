//! Quadrature rules and special functions used throughout the crate.
//!
//! Three independent pieces live here:
//!
//! - Gauss–Hermite rules for integrals of the form `∫ f(x) e^{-x²} dx`,
//!   built from the orthonormal Hermite recurrence with Newton-refined
//!   nodes and Christoffel weights.
//! - The inverse of the standard normal CDF (Wichura's rational
//!   approximations, accurate to ~1e-15), used to map low-discrepancy
//!   points onto Gaussian samples.
//! - [`CumulativeCurve`], a running integral `F(t) = ∫_{t₀}^t f` tabulated
//!   on a grid with two-point Gauss–Legendre panels and evaluated off-grid
//!   by cubic Hermite interpolation. Both the panel rule and the
//!   interpolant are fourth-order, so the curve inherits O(h⁴) accuracy
//!   uniformly.

/// Nodes and weights of the n-point Gauss–Hermite rule with weight `e^{-x²}`:
///
/// `∫ f(x) e^{-x²} dx ≈ Σ_i w_i f(x_i)`
///
/// Nodes are returned in increasing order. The rule integrates polynomials
/// of degree `2n - 1` exactly; the weights sum to `√π`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = Vec::with_capacity(n);

    // All roots of the degree-n Hermite polynomial lie inside
    // |x| < sqrt(2n + 1); adjacent roots are separated by at least ~pi/sqrt(2n).
    let bound = (2.0 * n as f64 + 1.0).sqrt() + 1.0;
    let step = 0.5 / (2.0 * n as f64 + 1.0).sqrt();

    if n % 2 == 1 {
        nodes.push(0.0);
    }
    let mut x_prev = if n % 2 == 1 { step * 0.5 } else { 0.0 };
    let mut p_prev = hermite_eval(n, x_prev).0;
    let mut x = x_prev + step;
    while x <= bound {
        let p = hermite_eval(n, x).0;
        if p_prev != 0.0 && p.signum() != p_prev.signum() {
            nodes.push(newton_root(n, x_prev, x));
        }
        x_prev = x;
        p_prev = p;
        x += step;
    }
    debug_assert_eq!(nodes.len(), n.div_ceil(2));

    let half = nodes.clone();
    nodes.clear();
    for &r in half.iter().rev() {
        if r > 0.0 {
            nodes.push(-r);
        }
    }
    nodes.extend(half.iter().copied().filter(|&r| r >= 0.0));

    let weights = nodes.iter().map(|&r| {
        // Christoffel weight: 1 / sum_{k<n} p_k(x)^2 for the orthonormal family.
        1.0 / hermite_eval(n, r).2
    });
    let weights: Vec<f64> = weights.collect();
    (nodes, weights)
}

/// Evaluates the orthonormal Hermite family at `x`: returns
/// `(p_n(x), p_{n-1}(x), Σ_{k<n} p_k(x)²)`.
fn hermite_eval(n: usize, x: f64) -> (f64, f64, f64) {
    let mut p_km1 = std::f64::consts::PI.powf(-0.25);
    let mut kernel = p_km1 * p_km1;
    if n == 0 {
        return (p_km1, 0.0, 0.0);
    }
    let mut p_k = (2.0f64).sqrt() * x * p_km1;
    for k in 1..n {
        kernel += p_k * p_k;
        let kf = k as f64;
        let p_kp1 = (2.0 / (kf + 1.0)).sqrt() * x * p_k - (kf / (kf + 1.0)).sqrt() * p_km1;
        p_km1 = p_k;
        p_k = p_kp1;
    }
    (p_k, p_km1, kernel)
}

fn newton_root(n: usize, lo: f64, hi: f64) -> f64 {
    let mut a = lo;
    let mut b = hi;
    let (mut pa, ..) = hermite_eval(n, a);
    for _ in 0..20 {
        let mid = 0.5 * (a + b);
        let (pm, ..) = hermite_eval(n, mid);
        if pm.signum() == pa.signum() {
            a = mid;
            pa = pm;
        } else {
            b = mid;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..50 {
        let (p, p_prev, _) = hermite_eval(n, x);
        // p_n'(x) = sqrt(2n) p_{n-1}(x)
        let dp = (2.0 * n as f64).sqrt() * p_prev;
        let dx = p / dp;
        x -= dx;
        if dx.abs() <= 1e-16 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// Inverse of the standard normal cumulative distribution function.
///
/// `normal_inverse_cdf(p)` returns the x with `Φ(x) = p`, accurate to about
/// fifteen significant digits over the full open interval (0, 1). Arguments
/// at or beyond the endpoints map to ±∞.
pub fn normal_inverse_cdf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = horner(
            r,
            &[
                3.387_132_872_796_366_608,
                1.331_416_678_917_843_774_5e2,
                1.971_590_950_306_551_442_7e3,
                1.373_169_376_550_946_112_5e4,
                4.592_195_393_154_987_145_7e4,
                6.726_577_092_700_870_085_3e4,
                3.343_057_558_358_812_810_5e4,
                2.509_080_928_730_122_672_7e3,
            ],
        );
        let den = horner(
            r,
            &[
                1.0,
                4.231_333_070_160_091_125_2e1,
                6.871_870_074_920_579_083e2,
                5.394_196_021_424_751_107_7e3,
                2.121_379_430_158_659_586_7e4,
                3.930_789_580_009_271_061e4,
                2.872_908_573_572_194_267_4e4,
                5.226_495_278_852_854_561e3,
            ],
        );
        return q * num / den;
    }

    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        let num = horner(
            r,
            &[
                1.423_437_110_749_683_577_3,
                4.630_337_846_156_545_295_9,
                5.769_497_221_460_691_405_5,
                3.647_848_324_763_204_605,
                1.270_458_252_452_368_382_6,
                2.417_807_251_774_506_117_7e-1,
                2.272_384_498_926_918_458_3e-2,
                7.745_450_142_783_414_076_4e-4,
            ],
        );
        let den = horner(
            r,
            &[
                1.0,
                2.053_191_626_637_758_821_9,
                1.676_384_830_183_803_849_4,
                6.897_673_349_851_000_045_5e-1,
                1.481_039_764_274_800_745_9e-1,
                1.519_866_656_361_645_719_7e-2,
                5.475_938_084_995_344_946e-4,
                1.050_750_071_644_416_843_2e-9,
            ],
        );
        num / den
    } else {
        let r = r - 5.0;
        let num = horner(
            r,
            &[
                6.657_904_643_501_103_777_2,
                5.463_784_911_164_114_369_9,
                1.784_826_539_917_291_335_8,
                2.965_605_718_285_048_912_3e-1,
                2.653_218_952_657_612_309_3e-2,
                1.242_660_947_388_078_438_6e-3,
                2.711_555_568_743_487_578_2e-5,
                2.010_334_399_292_288_132_6e-7,
            ],
        );
        let den = horner(
            r,
            &[
                1.0,
                5.998_322_065_558_879_376_9e-1,
                1.369_298_809_227_358_053_1e-1,
                1.487_536_129_085_061_485_2e-2,
                7.868_691_311_456_132_591e-4,
                1.846_318_317_510_054_681_8e-5,
                1.421_511_758_316_445_888_7e-7,
                2.044_263_103_389_939_785_6e-15,
            ],
        );
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn horner(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// A running integral `F(t) = F(t₀) + ∫_{t₀}^t f(s) ds` tabulated on a grid.
///
/// Panel values come from two-point Gauss–Legendre; off-grid evaluation uses
/// the cubic Hermite interpolant through the tabulated values with slopes
/// `F'(t_i) = f(t_i)`.
#[derive(Debug, Clone)]
pub struct CumulativeCurve {
    ts: Vec<f64>,
    val: Vec<f64>,
    deriv: Vec<f64>,
}

impl CumulativeCurve {
    /// Tabulates `∫_{grid[0]}^t f` on `grid`, which must be strictly increasing.
    pub fn build(grid: &[f64], mut f: impl FnMut(f64) -> f64) -> Self {
        assert!(grid.len() >= 2, "need at least two grid points");
        let deriv: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
        let mut val = Vec::with_capacity(grid.len());
        val.push(0.0);
        let gl = 0.5 / (3.0f64).sqrt();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(b > a, "grid must be strictly increasing");
            let h = b - a;
            let mid = 0.5 * (a + b);
            let panel = 0.5 * h * (f(mid - gl * h) + f(mid + gl * h));
            let last = *val.last().unwrap();
            val.push(last + panel);
        }
        Self {
            ts: grid.to_vec(),
            val,
            deriv,
        }
    }

    /// The grid the curve was built on.
    pub fn grid(&self) -> &[f64] {
        &self.ts
    }

    /// F(t). Clamps to the tabulated range.
    pub fn value(&self, t: f64) -> f64 {
        let (i, s, h) = self.locate(t);
        cubic_hermite(
            s,
            h,
            self.val[i],
            self.val[i + 1],
            self.deriv[i],
            self.deriv[i + 1],
        )
    }

    /// F'(t) from the interpolant.
    pub fn derivative(&self, t: f64) -> f64 {
        let (i, s, h) = self.locate(t);
        cubic_hermite_deriv(
            s,
            h,
            self.val[i],
            self.val[i + 1],
            self.deriv[i],
            self.deriv[i + 1],
        )
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let n = self.ts.len();
        let t = t.clamp(self.ts[0], self.ts[n - 1]);
        let i = match self.ts.partition_point(|&u| u <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.ts[i + 1] - self.ts[i];
        (i, (t - self.ts[i]) / h, h)
    }
}

/// Cubic Hermite interpolation on one interval. `s ∈ [0, 1]` is the
/// normalized abscissa, `h` the interval width, `y0, y1` the endpoint values
/// and `m0, m1` the endpoint slopes (per unit of the original variable).
pub fn cubic_hermite(s: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * m1
}

/// Derivative of [`cubic_hermite`] with respect to the original variable.
pub fn cubic_hermite_deriv(s: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let s2 = s * s;
    (6.0 * s2 - 6.0 * s) * (y0 - y1) / h
        + (3.0 * s2 - 4.0 * s + 1.0) * m0
        + (3.0 * s2 - 2.0 * s) * m1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_weights_sum_to_sqrt_pi() {
        for n in [1, 2, 7, 32, 128] {
            let (_, w) = gauss_hermite(n);
            let sum: f64 = w.iter().sum();
            assert!(
                (sum - std::f64::consts::PI.sqrt()).abs() < 1e-13,
                "n = {n}: weight sum {sum}"
            );
        }
    }

    #[test]
    fn hermite_128_matches_reference_nodes() {
        let (x, w) = gauss_hermite(128);
        assert_eq!(x.len(), 128);
        assert!((x[0] - (-15.29181976688274)).abs() < 1e-12);
        assert!((w[0] - 1.7990659801093173e-102).abs() < 1e-114);
        assert!((x[1] - (-14.733842473589299)).abs() < 1e-12);
        assert!((w[1] - 2.6081724024092033e-95).abs() < 1e-107);
        assert!((x[63] - (-0.09798382195581895)).abs() < 1e-14);
        assert!((w[63] - 0.19409761186408767).abs() < 1e-14);
        for i in 0..64 {
            assert!((x[i] + x[127 - i]).abs() < 1e-13);
            assert!((w[i] - w[127 - i]).abs() <= 1e-13 * w[i].abs());
        }
    }

    #[test]
    fn hermite_integrates_cosine() {
        let (x, w) = gauss_hermite(128);
        let got: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.cos()).sum();
        assert!((got - 1.380388447043143).abs() < 1e-14);
    }

    #[test]
    fn hermite_exactness_on_moments() {
        let (x, w) = gauss_hermite(8);
        // ∫ x^2 e^{-x²} = √π/2, ∫ x^4 e^{-x²} = 3√π/4
        let m2: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi * xi).sum();
        let m4: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(4)).sum();
        let sp = std::f64::consts::PI.sqrt();
        assert!((m2 - sp / 2.0).abs() < 1e-14);
        assert!((m4 - 3.0 * sp / 4.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_cdf_matches_reference_values() {
        let cases = [
            (1e-12, -7.034483825301131),
            (0.025, -1.9599639845400545),
            (0.3, -0.5244005127080409),
            (0.5, 0.0),
            (0.7, 0.5244005127080407),
            (0.975, 1.959963984540054),
            (1.0 - 1e-12, 7.0344869100478356),
            (1e-300, -37.0470962993612),
        ];
        for (p, want) in cases {
            let got = normal_inverse_cdf(p);
            assert!(
                (got - want).abs() <= 1e-13 * (1.0 + want.abs()),
                "p = {p}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn inverse_cdf_endpoints() {
        assert_eq!(normal_inverse_cdf(0.0), f64::NEG_INFINITY);
        assert_eq!(normal_inverse_cdf(1.0), f64::INFINITY);
        assert!(normal_inverse_cdf(-0.1).is_nan());
    }

    #[test]
    fn cumulative_curve_reproduces_sine() {
        let grid: Vec<f64> = (0..=2000).map(|i| i as f64 * 1e-3).collect();
        let curve = CumulativeCurve::build(&grid, f64::cos);
        for &t in &[0.0, 0.1234, 0.77775, 1.5, 1.99999] {
            assert!((curve.value(t) - t.sin()).abs() < 1e-12, "t = {t}");
            assert!((curve.derivative(t) - t.cos()).abs() < 1e-9, "t = {t}");
        }
    }
}
