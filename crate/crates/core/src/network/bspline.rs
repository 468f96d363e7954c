use crate::autodiff::{Basis1d, Lift, Real};

use super::NetworkError;

pub const MAX_DEGREE: usize = 7;

/// B-spline basis of degree `k` on a grid of `G` intervals, extended by `k`
/// knots on each side so that there are `G + k` basis functions and the sum
/// of all of them is one on the base grid.
///
/// Outside the base grid each basis function keeps its polynomial pieces
/// over the extension knots and vanishes beyond them, so the spline stays
/// `k - 1` times continuously differentiable on the whole real line.
#[derive(Clone, Debug, PartialEq)]
pub struct BSplineBasis {
    degree: usize,
    intervals: usize,
    knots: Vec<f64>,
    /// `knots` with `k` further knots on each side, so that every
    /// extension cell has a full set of neighbours for the recursion.
    padded: Vec<f64>,
}

impl BSplineBasis {
    /// Uniform grid of `intervals` cells on `[lo, hi]`.
    pub fn uniform(degree: usize, intervals: usize, lo: f64, hi: f64) -> Result<Self, NetworkError> {
        if !(lo < hi) || intervals == 0 {
            return Err(NetworkError::InvalidGrid(format!(
                "need lo < hi and at least one interval, got [{lo}, {hi}] with {intervals}"
            )));
        }
        let h = (hi - lo) / intervals as f64;
        let grid: Vec<f64> = (0..=intervals).map(|i| lo + h * i as f64).collect();
        Self::with_grid(degree, &grid)
    }

    /// Arbitrary strictly increasing grid. The extension knots repeat the
    /// first and last cell widths.
    pub fn with_grid(degree: usize, grid: &[f64]) -> Result<Self, NetworkError> {
        if degree > MAX_DEGREE {
            return Err(NetworkError::InvalidGrid(format!(
                "degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(NetworkError::InvalidGrid(
                "grid must have at least two strictly increasing points".into(),
            ));
        }
        let g = grid.len() - 1;
        let h_lo = grid[1] - grid[0];
        let h_hi = grid[g] - grid[g - 1];
        let mut knots = Vec::with_capacity(grid.len() + 2 * degree);
        for i in (1..=degree).rev() {
            knots.push(grid[0] - h_lo * i as f64);
        }
        knots.extend_from_slice(grid);
        for i in 1..=degree {
            knots.push(grid[g] + h_hi * i as f64);
        }
        let mut padded = Vec::with_capacity(knots.len() + 2 * degree);
        for i in (1..=degree).rev() {
            padded.push(knots[0] - h_lo * i as f64);
        }
        padded.extend_from_slice(&knots);
        let last = knots[knots.len() - 1];
        for i in 1..=degree {
            padded.push(last + h_hi * i as f64);
        }
        Ok(BSplineBasis {
            degree,
            intervals: g,
            knots,
            padded,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of basis functions, `G + k`.
    pub fn len(&self) -> usize {
        self.intervals + self.degree
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Bounds of the base (unextended) grid.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.degree + self.intervals])
    }

    /// Greville abscissa of basis function `i`: the average of its `k`
    /// interior knots. Coefficients equal to `f` at these points reproduce
    /// any linear `f` exactly.
    pub fn greville(&self, i: usize) -> f64 {
        if self.degree == 0 {
            return 0.5 * (self.knots[i] + self.knots[i + 1]);
        }
        let s: f64 = self.knots[i + 1..=i + self.degree].iter().sum();
        s / self.degree as f64
    }

    /// Cell `s` of the extended knot vector with `knots[s] <= x < knots[s + 1]`,
    /// or `None` outside the extended range.
    fn cell(&self, x: f64) -> Option<usize> {
        let u = &self.knots;
        if !(x >= u[0] && x < u[u.len() - 1]) {
            return None;
        }
        Some(u.partition_point(|t| *t <= x) - 1)
    }

    /// Derivatives of order `0..=n` of the `k + 1` active basis functions,
    /// following the classic triangular scheme for B-spline derivatives.
    fn ders(&self, x: f64, span: usize, n: usize, out: &mut [[f64; MAX_DEGREE + 1]]) {
        let p = self.degree;
        let u = &self.padded;
        let mut ndu = [[0.0; MAX_DEGREE + 1]; MAX_DEGREE + 1];
        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        for j in 0..=p {
            out[0][j] = ndu[j][p];
        }
        let mut a = [[0.0; MAX_DEGREE + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=n.min(p) {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1: usize = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2: usize = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                out[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for k in 1..=n.min(p) {
            for j in 0..=p {
                out[k][j] *= fac;
            }
            fac *= (p - k) as f64;
        }
        for row in out.iter_mut().take(n + 1).skip(p + 1) {
            row[..=p].fill(0.0);
        }
    }

    /// Values of all `G + k` basis functions at `x` (dense, for tests and fitting).
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let mut local = [0.0; MAX_DEGREE + 1];
        let first = self.eval_derivative(x, 0, &mut local[..=self.degree]);
        out[first..first + self.degree + 1].copy_from_slice(&local[..=self.degree]);
        out
    }
}

impl Basis1d for BSplineBasis {
    fn support(&self) -> usize {
        self.degree + 1
    }

    fn eval_derivative(&self, x: f64, order: usize, out: &mut [f64]) -> usize {
        let k = self.degree;
        let n = self.len();
        out[..=k].fill(0.0);
        let Some(cell) = self.cell(x) else {
            return 0;
        };
        let first = cell.saturating_sub(k).min(n - k - 1);
        if order > k {
            return first;
        }
        let mut ders = [[0.0; MAX_DEGREE + 1]; MAX_DEGREE + 1];
        self.ders(x, cell + k, order, &mut ders);
        // local j is basis function cell - k + j
        for (j, v) in ders[order][..=k].iter().enumerate() {
            let idx = cell + j;
            if idx >= k && idx - k < n {
                out[idx - k - first] = *v;
            }
        }
        first
    }
}

/// `sum_i c_i B_i(x)`, differentiable in both `x` and the coefficients.
pub fn spline_eval<P: Real, T: Lift<P>>(basis: &BSplineBasis, coeffs: &[P], x: T) -> T {
    T::combine(basis, coeffs, x, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degree_zero_indicator() {
        let b = BSplineBasis::uniform(0, 1, 0.0, 1.0).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(spline_eval(&b, &[1.0], 0.5), 1.0);
    }

    #[test]
    fn counts_and_domain() {
        let b = BSplineBasis::uniform(3, 5, -1.0, 1.0).unwrap();
        assert_eq!(b.len(), 8);
        assert_eq!(b.knots().len(), 12);
        assert_eq!(b.domain(), (-1.0, 1.0));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(BSplineBasis::with_grid(3, &[0.0, 0.0, 1.0]).is_err());
        assert!(BSplineBasis::with_grid(3, &[0.0]).is_err());
        assert!(BSplineBasis::uniform(9, 5, -1.0, 1.0).is_err());
        assert!(BSplineBasis::uniform(3, 5, 1.0, -1.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = BSplineBasis::with_grid(3, &[-1.0, -0.6, -0.1, 0.3, 0.55, 1.0]).unwrap();
        let c = [0.3, -1.2, 0.8, 2.0, -0.4, 0.1, 1.5, -0.7];
        for i in 1..200 {
            let x = -1.0 + 2.0 * i as f64 / 200.0 + 1e-3;
            if x >= 1.0 {
                continue;
            }
            for k in 0..3 {
                let h = 1e-6;
                let fd = (f64::combine(&b, &c, x + h, k) - f64::combine(&b, &c, x - h, k)) / (2.0 * h);
                let exact = f64::combine(&b, &c, x, k + 1);
                // skip points straddling a knot where the derivative jumps
                if b.knots().iter().any(|t| (t - x).abs() < 2.0 * h) {
                    continue;
                }
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "k={k} x={x}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn extension_cells_follow_the_cardinal_spline() {
        // uniform cubic B-spline takes 1/6, 2/3, 1/6 at its interior knots
        let b = BSplineBasis::uniform(3, 5, -1.0, 1.0).unwrap();
        let u = b.knots().to_vec();
        let mut first = vec![0.0; 8];
        first[0] = 1.0;
        let mut last = vec![0.0; 8];
        last[7] = 1.0;
        for (x, want) in [(u[1], 1.0 / 6.0), (u[2], 2.0 / 3.0), (u[3], 1.0 / 6.0)] {
            assert!((spline_eval(&b, &first, x) - want).abs() < 1e-12);
        }
        for (x, want) in [(u[8], 1.0 / 6.0), (u[9], 2.0 / 3.0), (u[10], 1.0 / 6.0)] {
            assert!((spline_eval(&b, &last, x) - want).abs() < 1e-12);
        }
        let c: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        for x in [u[0] - 1e-9, -5.0, u[11], 3.0, 1e300, -1e300] {
            for k in 0..3 {
                assert_eq!(f64::combine(&b, &c, x, k), 0.0);
            }
        }
    }

    #[test]
    fn continuous_derivatives_across_grid_edges() {
        let b = BSplineBasis::uniform(3, 5, -1.0, 1.0).unwrap();
        let c: Vec<f64> = (0..8).map(|i| (1.3 * i as f64).cos()).collect();
        let u = b.knots().to_vec();
        for x in [u[0], u[3], u[8], u[11]] {
            for k in 0..3 {
                let lo = f64::combine(&b, &c, x - 1e-9, k);
                let hi = f64::combine(&b, &c, x + 1e-9, k);
                assert!((lo - hi).abs() < 1e-6, "x {x} order {k}: {lo} vs {hi}");
            }
        }
    }

    /// Brute-force oracle: evaluate the reproduced line on a dense grid.
    #[test]
    fn cubic_reproduces_linear_function_from_greville_coefficients() {
        let b = BSplineBasis::uniform(3, 5, -1.0, 1.0).unwrap();
        let c: Vec<f64> = (0..b.len()).map(|i| b.greville(i)).collect();
        for i in 0..=2000 {
            let x = -1.0 + 2.0 * i as f64 / 2000.0;
            assert!((spline_eval(&b, &c, x) - x).abs() < 1e-10);
        }
        let c: Vec<f64> = (0..b.len()).map(|i| 3.0 - 2.0 * b.greville(i)).collect();
        assert!((spline_eval(&b, &c, 0.37) - (3.0 - 0.74)).abs() < 1e-12);
    }

    fn random_grid() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..=3, prop::collection::vec(0.05f64..1.0, 3..=10)).prop_map(|(k, widths)| {
            let mut grid = vec![-1.0];
            for w in widths {
                let last = *grid.last().unwrap();
                grid.push(last + w);
            }
            (k, grid)
        })
    }

    proptest! {
        #[test]
        fn partition_of_unity((k, grid) in random_grid(), t in 0.0f64..1.0) {
            let b = BSplineBasis::with_grid(k, &grid).unwrap();
            let (lo, hi) = b.domain();
            let x = lo + t * (hi - lo);
            let all = b.eval_all(x);
            prop_assert!(all.iter().all(|v| *v >= -1e-15));
            let s: f64 = all.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn linear_reproduction((k, grid) in random_grid(), t in 0.0f64..1.0) {
            let b = BSplineBasis::with_grid(k, &grid).unwrap();
            let (lo, hi) = b.domain();
            let x = lo + t * (hi - lo);
            let c: Vec<f64> = (0..b.len()).map(|i| b.greville(i)).collect();
            prop_assert!((spline_eval(&b, &c, x) - x).abs() < 1e-10);
        }
    }
}
