//! Truncated bivariate power series in two formal variables `a`, `b`.
//!
//! Coefficients are kept for `a^i b^j` with `i, j < order`. Products above
//! [`COMPENSATED_ABOVE`] use compensated dot products.

use crate::error::{param, Result};
use crate::numeric::Dot2;
use crate::par;

/// Orders above which products switch to compensated accumulation.
pub const COMPENSATED_ABOVE: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct BiSeries {
    order: usize,
    coeffs: Vec<f64>,
    even: bool,
}

impl BiSeries {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![0.0; order * order],
            even: true,
        }
    }

    /// Series with the given `(i, j, value)` terms; terms beyond the order
    /// are dropped.
    pub fn from_terms(order: usize, terms: &[(usize, usize, f64)]) -> Self {
        let mut s = Self::zeros(order);
        for &(i, j, v) in terms {
            if i < order && j < order {
                s.coeffs[i * order + j] += v;
                if v != 0.0 && (i + j) % 2 == 1 {
                    s.even = false;
                }
            }
        }
        s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coeffs[i * self.order + j]
    }

    /// Whether every nonzero coefficient has even total degree.
    pub fn is_even(&self) -> bool {
        self.even
    }

    fn nonzero_terms(&self) -> Vec<(usize, usize, f64)> {
        let n = self.order;
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = self.coeffs[i * n + j];
                (v != 0.0).then_some((i, j, v))
            })
            .collect()
    }

    /// Truncated product, computing only coefficients of total degree
    /// `≤ max_degree`.
    pub fn mul_to_degree(&self, other: &Self, max_degree: usize) -> Self {
        assert_eq!(self.order, other.order, "series orders differ");
        let n = self.order;
        let even = self.even && other.even;
        let compensated = n > COMPENSATED_ABOVE;
        let rows = par::map_range(0..n, |i| {
            let mut row = vec![0.0; n];
            for (j, out) in row.iter_mut().enumerate() {
                if i + j > max_degree || (even && (i + j) % 2 == 1) {
                    continue;
                }
                *out = if compensated {
                    let mut acc = Dot2::default();
                    self.gather(other, i, j, even, |a, b| acc.add_product(a, b));
                    acc.value()
                } else {
                    let mut acc = 0.0;
                    self.gather(other, i, j, even, |a, b| acc += a * b);
                    acc
                };
            }
            row
        });
        Self {
            order: n,
            coeffs: rows.concat(),
            even,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_to_degree(other, 2 * self.order)
    }

    #[inline]
    fn gather(&self, other: &Self, i: usize, j: usize, even: bool, mut f: impl FnMut(f64, f64)) {
        let n = self.order;
        let step = if even { 2 } else { 1 };
        for i1 in 0..=i {
            let start = if even { i1 % 2 } else { 0 };
            let row = &self.coeffs[i1 * n..i1 * n + n];
            let orow = &other.coeffs[(i - i1) * n..(i - i1) * n + n];
            let mut j1 = start;
            while j1 <= j {
                f(row[j1], orow[j - j1]);
                j1 += step;
            }
        }
    }

    /// Product with a series that has only a handful of nonzero terms.
    fn mul_sparse(&self, sparse: &[(usize, usize, f64)], max_degree: usize, even: bool) -> Self {
        let n = self.order;
        let mut out = Self::zeros(n);
        out.even = even;
        for i in 0..n {
            for j in 0..n {
                if i + j > max_degree {
                    continue;
                }
                let mut acc = Dot2::default();
                for &(si, sj, v) in sparse {
                    if si <= i && sj <= j {
                        acc.add_product(v, self.coeffs[(i - si) * n + (j - sj)]);
                    }
                }
                out.coeffs[i * n + j] = acc.value();
            }
        }
        out
    }

    /// `self^{-1/2}` by Newton iteration `y ← y + y (1 - s y²) / 2`, which
    /// doubles the number of correct total degrees each step.
    pub fn inv_sqrt(&self) -> Result<Self> {
        let c0 = self.get(0, 0);
        if !(c0 > 0.0) {
            return Err(param("series", "constant term must be positive for a real inverse square root"));
        }
        let n = self.order;
        let sparse = self.nonzero_terms();
        let even = self.even;
        let top = 2 * (n - 1);
        let mut y = Self::from_terms(n, &[(0, 0, 1.0 / c0.sqrt())]);
        let mut degree = 0usize;
        while degree < top {
            degree = (2 * degree + 1).min(top);
            let y2 = y.mul_to_degree(&y, degree);
            let sy2 = y2.mul_sparse(&sparse, degree, even);
            let mut residual = Self::zeros(n);
            residual.even = even;
            for (r, s) in residual.coeffs.iter_mut().zip(&sy2.coeffs) {
                *r = -s;
            }
            residual.coeffs[0] += 1.0;
            let correction = y.mul_to_degree(&residual, degree);
            for idx in 0..n * n {
                let (i, j) = (idx / n, idx % n);
                if i + j <= degree {
                    y.coeffs[idx] += 0.5 * correction.coeffs[idx];
                }
            }
            y.even = even;
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_hand_expansion() {
        // (1 + a)(1 + b) = 1 + a + b + ab
        let p = BiSeries::from_terms(4, &[(0, 0, 1.0), (1, 0, 1.0)]);
        let q = BiSeries::from_terms(4, &[(0, 0, 1.0), (0, 1, 1.0)]);
        let r = p.mul(&q);
        assert_eq!(r.get(0, 0), 1.0);
        assert_eq!(r.get(1, 0), 1.0);
        assert_eq!(r.get(0, 1), 1.0);
        assert_eq!(r.get(1, 1), 1.0);
        assert_eq!(r.get(2, 2), 0.0);
    }

    #[test]
    fn inv_sqrt_of_square() {
        // ((1 - ab)^2)^{-1/2} = Σ (ab)^k
        let s = BiSeries::from_terms(12, &[(0, 0, 1.0), (1, 1, -2.0), (2, 2, 1.0)]);
        let y = s.inv_sqrt().unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((y.get(i, j) - expected).abs() < 1e-13, "({i},{j}) = {}", y.get(i, j));
            }
        }
    }

    #[test]
    fn inv_sqrt_univariate_binomial() {
        // (1 - 4a)^{-1/2} = Σ C(2k, k) a^k
        let s = BiSeries::from_terms(10, &[(0, 0, 1.0), (1, 0, -4.0)]);
        let y = s.inv_sqrt().unwrap();
        let mut central = 1.0f64;
        for k in 0..10 {
            assert!((y.get(k, 0) - central).abs() < 1e-9 * central, "k={k}");
            central = central * (2 * k + 1) as f64 * (2 * k + 2) as f64 / ((k + 1) * (k + 1)) as f64;
        }
    }

    #[test]
    fn inv_sqrt_squares_back() {
        let s = BiSeries::from_terms(16, &[(0, 0, 2.0), (2, 0, -0.3), (0, 2, 0.4), (1, 1, -1.1), (2, 2, 0.7)]);
        let y = s.inv_sqrt().unwrap();
        let back = y.mul(&y).mul(&s);
        for i in 0..16 {
            for j in 0..16 {
                let expected = if (i, j) == (0, 0) { 1.0 } else { 0.0 };
                assert!((back.get(i, j) - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nonpositive_constant_rejected() {
        let s = BiSeries::from_terms(4, &[(0, 0, -1.0)]);
        assert!(s.inv_sqrt().is_err());
    }
}
