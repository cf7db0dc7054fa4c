//! Sobol low-discrepancy sequences in up to 40 dimensions.
//!
//! Direction numbers follow Bratley and Fox: the first few per-dimension
//! integers are tabulated, the rest come from the recurrence of each
//! dimension's primitive polynomial, and points are emitted in Gray-code
//! order so each draw costs one XOR per dimension.
//!
//! A sequence can carry a digital shift: a per-dimension bitmask XORed into
//! every point. Randomly drawn shifts turn the deterministic sequence into a
//! randomized one whose batches admit an honest spread estimate while each
//! batch keeps its low-discrepancy structure.

const DIM_MAX: usize = 40;
const LOG_MAX: usize = 30;

const INITIAL_V: [[u32; DIM_MAX]; 8] = [
    [1; DIM_MAX],
    [
        0, 0, 1, 3, 1, 3, 1, 3, 3, 1, 3, 1, 3, 1, 3, 1, 1, 3, 1, 3, 1, 3, 1, 3, 3, 1, 3, 1, 3, 1,
        3, 1, 1, 3, 1, 3, 1, 3, 1, 3,
    ],
    [
        0, 0, 0, 7, 5, 1, 3, 3, 7, 5, 5, 7, 7, 1, 3, 3, 7, 5, 1, 1, 5, 3, 3, 1, 7, 5, 1, 3, 3, 7,
        5, 1, 1, 5, 7, 7, 5, 1, 3, 3,
    ],
    [
        0, 0, 0, 0, 0, 1, 7, 9, 13, 11, 1, 3, 7, 9, 5, 13, 13, 11, 3, 15, 5, 3, 15, 7, 9, 13, 9,
        1, 11, 7, 5, 15, 1, 15, 11, 5, 3, 1, 7, 9,
    ],
    [
        0, 0, 0, 0, 0, 0, 0, 9, 3, 27, 15, 29, 21, 23, 19, 11, 25, 7, 13, 17, 1, 25, 29, 3, 31,
        11, 5, 23, 27, 19, 21, 5, 1, 17, 13, 7, 15, 9, 31, 9,
    ],
    [
        0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 37, 33, 7, 5, 11, 39, 63, 27, 17, 15, 23, 29, 3,
        21, 13, 31, 25, 9, 49, 33, 19, 29, 11, 19, 27, 15, 25,
    ],
    [
        0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 13, 33, 115, 41, 79, 17, 29,
        119, 75, 73, 105, 7, 59, 65, 21, 3, 113, 61, 89, 45, 107,
    ],
    [
        0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
        0, 0, 0, 0, 0, 0, 0, 7, 23, 39,
    ],
];

const POLY: [u32; DIM_MAX] = [
    1, 3, 7, 11, 13, 19, 25, 37, 59, 47, 61, 55, 41, 67, 97, 91, 109, 103, 115, 131, 193, 137,
    145, 143, 241, 157, 185, 167, 229, 171, 213, 191, 253, 203, 211, 239, 247, 285, 369, 299,
];

fn most_significant_bit(n: u32) -> u32 {
    32 - n.leading_zeros()
}

fn lowest_zero_bit(n: u64) -> u32 {
    (!n).trailing_zeros() + 1
}

/// Sobol sequence over the unit cube `(0, 1)^dim`.
pub struct SobolSeq {
    dim: usize,
    v: Vec<[u32; LOG_MAX]>,
    lastq: Vec<u32>,
    shift: Vec<u32>,
    index: u64,
}

impl SobolSeq {
    /// The unshifted sequence. Its first point is the cube center offset,
    /// `(2^-31, ..., 2^-31)` up to the half-cell nudge described in
    /// [`Self::next_point`].
    pub fn new(dim: usize) -> Self {
        Self::with_shift(dim, &vec![0; dim])
    }

    /// The sequence with a per-dimension digital shift. Each mask's low 30
    /// bits are XORed into the fixed-point representation of every point.
    pub fn with_shift(dim: usize, shift: &[u32]) -> Self {
        assert!(
            dim >= 1 && dim <= DIM_MAX,
            "dimension {dim} outside supported range 1..={DIM_MAX}"
        );
        assert_eq!(shift.len(), dim);

        let mut v = vec![[0u32; LOG_MAX]; dim];
        for row in 0..8 {
            for (d, vd) in v.iter_mut().enumerate() {
                vd[row] = INITIAL_V[row][d];
            }
        }
        // The first dimension is the van der Corput sequence: every direction
        // integer is 1.
        v[0] = [1; LOG_MAX];

        for (d, vd) in v.iter_mut().enumerate().skip(1) {
            let poly = POLY[d];
            let degree = (most_significant_bit(poly) - 1) as usize;
            // Coefficient a_k multiplies v[j-k]; a_k is bit (degree - k) of
            // the polynomial, leading and constant bits excluded from the mask
            // walk but the constant term always contributes through a_degree.
            for j in degree..LOG_MAX {
                let mut newv = vd[j - degree];
                for k in 1..=degree {
                    let a_k = (poly >> (degree - k)) & 1;
                    if a_k == 1 {
                        newv ^= vd[j - k] << k;
                    }
                }
                vd[j] = newv;
            }
        }

        // Scale row j (0-based) by 2^(LOG_MAX-1-j) so everything shares the
        // denominator 2^LOG_MAX.
        for vd in v.iter_mut() {
            for (j, x) in vd.iter_mut().enumerate() {
                *x <<= LOG_MAX - 1 - j;
            }
        }

        let shift = shift.iter().map(|s| s & ((1 << LOG_MAX) - 1)).collect();
        Self {
            dim,
            v,
            lastq: vec![0; dim],
            shift,
            index: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes the next point into `out`. Coordinates carry a half-cell nudge
    /// of `2^-31` so they stay strictly inside `(0, 1)` even for the zero
    /// word, which keeps inverse-CDF maps finite.
    pub fn next_point(&mut self, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim);
        const RECIP: f64 = 1.0 / (1u64 << LOG_MAX) as f64;
        for (d, o) in out.iter_mut().enumerate() {
            let word = self.lastq[d] ^ self.shift[d];
            *o = (word as f64 + 0.5) * RECIP;
        }
        let l = lowest_zero_bit(self.index) as usize;
        assert!(l <= LOG_MAX, "sequence exhausted after 2^30 points");
        for d in 0..self.dim {
            self.lastq[d] ^= self.v[d][l - 1];
        }
        self.index += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn take(seq: &mut SobolSeq, n: usize) -> Vec<Vec<f64>> {
        let mut out = vec![0.0; seq.dim()];
        (0..n)
            .map(|_| {
                seq.next_point(&mut out);
                out.clone()
            })
            .collect()
    }

    #[test]
    fn matches_two_dimensional_reference() {
        let expected = [
            [0.0, 0.0],
            [0.5, 0.5],
            [0.75, 0.25],
            [0.25, 0.75],
            [0.375, 0.375],
            [0.875, 0.875],
            [0.625, 0.125],
            [0.125, 0.625],
            [0.1875, 0.3125],
            [0.6875, 0.8125],
        ];
        let mut seq = SobolSeq::new(2);
        for (i, row) in take(&mut seq, 10).into_iter().enumerate() {
            for d in 0..2 {
                assert!(
                    (row[d] - expected[i][d]).abs() < 1e-8,
                    "point {i} dim {d}: {} vs {}",
                    row[d],
                    expected[i][d]
                );
            }
        }
    }

    #[test]
    fn direction_integers_follow_polynomial_recurrence() {
        // Dimension 4 uses x^3 + x + 1 (binary 1011): m_j = 4 m_{j-2} XOR
        // 9 m_{j-3}, seeded with 1, 3, 7. Hence 5, 7, 43, ...
        let seq = SobolSeq::new(4);
        let m: Vec<u32> = (0..6)
            .map(|j| seq.v[3][j] >> (LOG_MAX - 1 - j))
            .collect();
        assert_eq!(m, vec![1, 3, 7, 5, 7, 43]);
    }

    #[test]
    fn first_block_is_stratified_in_every_dimension() {
        let mut seq = SobolSeq::new(DIM_MAX);
        let pts = take(&mut seq, 64);
        for d in 0..DIM_MAX {
            let mut cells: Vec<usize> = pts.iter().map(|p| (p[d] * 64.0) as usize).collect();
            cells.sort_unstable();
            let want: Vec<usize> = (0..64).collect();
            assert_eq!(cells, want, "dimension {d} is not a dyadic permutation");
        }
    }

    #[test]
    fn digital_shift_preserves_stratification() {
        let shift: Vec<u32> = (0..5).map(|d| 0x2ABF_11C3u32.rotate_left(d)).collect();
        let mut seq = SobolSeq::with_shift(5, &shift);
        let pts = take(&mut seq, 256);
        for d in 0..5 {
            let mut cells: Vec<usize> = pts.iter().map(|p| (p[d] * 256.0) as usize).collect();
            cells.sort_unstable();
            let want: Vec<usize> = (0..256).collect();
            assert_eq!(cells, want, "dimension {d}");
        }
    }

    #[test]
    fn integrates_product_of_sines() {
        use std::f64::consts::PI;
        let mut seq = SobolSeq::new(2);
        let n = 1 << 16;
        let mut sum = 0.0;
        let mut p = [0.0; 2];
        for _ in 0..n {
            seq.next_point(&mut p);
            sum += (PI * p[0]).sin() * (PI * p[1]).sin();
        }
        let est = sum / n as f64;
        assert!((est - 4.0 / (PI * PI)).abs() < 1e-4);
    }

    #[test]
    fn points_stay_strictly_inside_unit_cube() {
        let mut seq = SobolSeq::new(3);
        let mut p = [0.0; 3];
        for _ in 0..1000 {
            seq.next_point(&mut p);
            for &x in &p {
                assert!(x > 0.0 && x < 1.0);
            }
        }
    }
}
