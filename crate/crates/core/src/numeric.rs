//! Small numerical kernels shared across modules.

/// `ln Σ exp(x_i)` without overflow. Empty input or all `-∞` gives `-∞`.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// `ln(2 cosh z)`.
pub fn ln_2cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Compensated dot-product accumulator (Ogita-Rump-Oishi `Dot2`): the
/// product error is recovered with an FMA and the sum error with TwoSum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dot2 {
    sum: f64,
    err: f64,
}

impl Dot2 {
    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let s = self.sum + p;
        let bp = s - self.sum;
        let se = (self.sum - (s - bp)) + (p - bp);
        self.sum = s;
        self.err += pe + se;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.err
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_handles_large_arguments() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, 0.0]), 0.0);
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_2cosh_matches_direct() {
        for z in [-3.0, -0.2, 0.0, 0.7, 5.0] {
            let direct = (2.0 * f64::cosh(z)).ln();
            assert!((ln_2cosh(z) - direct).abs() < 1e-14);
        }
        assert!((ln_2cosh(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn dot2_recovers_cancellation() {
        let mut acc = Dot2::default();
        acc.add_product(1e16, 1.0);
        acc.add_product(1.0, 1.0);
        acc.add_product(-1e16, 1.0);
        assert_eq!(acc.value(), 1.0);
        assert_eq!(compensated_sum([1e16, 1.0, -1e16]), 1.0);
    }
}
