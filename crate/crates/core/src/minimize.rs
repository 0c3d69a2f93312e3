//! Scalar golden-section search and a finite-difference BFGS ascent.
//!
//! Objective values of `+∞` (minimization) or `-∞` (maximization) mark points
//! outside the domain; both routines step back from them.

/// `(√5 - 1) / 2`
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Golden-section minimization on `[a, b]` until the bracket is shorter than
/// `tol`. Deterministic: the sequence of probes depends only on `a`, `b`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> ScalarMinimum {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a).abs() > tol && iterations < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    ScalarMinimum { x, fx, iterations }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentConfig {
    pub max_iterations: usize,
    /// Stop when the gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// Finite-difference step.
    pub step: f64,
    /// Abandon the run once `|x|` exceeds this (objective unbounded above).
    pub radius: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-9,
            step: 1e-6,
            radius: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ascent {
    pub x: [f64; 2],
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The iterate left the search radius while still climbing.
    pub escaped: bool,
}

/// Maximizes a concave function of two variables with BFGS on central
/// finite-difference gradients and Armijo backtracking.
pub fn bfgs_maximize<F: Fn([f64; 2]) -> f64>(f: F, start: [f64; 2], cfg: &AscentConfig) -> Ascent {
    let neg = |x: [f64; 2]| -f(x);
    let grad = |x: [f64; 2]| -> [f64; 2] {
        let h = cfg.step * (1.0 + x[0].abs().max(x[1].abs()));
        let gx = (neg([x[0] + h, x[1]]) - neg([x[0] - h, x[1]])) / (2.0 * h);
        let gy = (neg([x[0], x[1] + h]) - neg([x[0], x[1] - h])) / (2.0 * h);
        [gx, gy]
    };
    let mut x = start;
    let mut fx = neg(x);
    let mut g = grad(x);
    // inverse Hessian approximation
    let mut h = [[1.0, 0.0], [0.0, 1.0]];
    let mut iterations = 0;
    let mut converged = false;
    let mut escaped = false;
    while iterations < cfg.max_iterations {
        if !g[0].is_finite() || !g[1].is_finite() {
            break;
        }
        let gnorm = g[0].hypot(g[1]);
        if gnorm < cfg.gradient_tolerance {
            converged = true;
            break;
        }
        let mut p = [-(h[0][0] * g[0] + h[0][1] * g[1]), -(h[1][0] * g[0] + h[1][1] * g[1])];
        let mut slope = p[0] * g[0] + p[1] * g[1];
        if !(slope < 0.0) {
            h = [[1.0, 0.0], [0.0, 1.0]];
            p = [-g[0], -g[1]];
            slope = -gnorm * gnorm;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = [x[0] + t * p[0], x[1] + t * p[1]];
            let fxn = neg(xn);
            if fxn.is_finite() && fxn <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fxn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            // No descent possible at this resolution.
            converged = gnorm < cfg.gradient_tolerance.sqrt();
            break;
        };
        let gn = grad(xn);
        let s = [xn[0] - x[0], xn[1] - x[1]];
        let y = [gn[0] - g[0], gn[1] - g[1]];
        let sy = s[0] * y[0] + s[1] * y[1];
        if sy > 1e-300 {
            let hy = [h[0][0] * y[0] + h[0][1] * y[1], h[1][0] * y[0] + h[1][1] * y[1]];
            let yhy = y[0] * hy[0] + y[1] * hy[1];
            let rho = 1.0 / sy;
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let progress = (fx - fxn).abs();
        x = xn;
        fx = fxn;
        g = gn;
        iterations += 1;
        if x[0].hypot(x[1]) > cfg.radius {
            escaped = true;
            break;
        }
        if progress == 0.0 && s[0] == 0.0 && s[1] == 0.0 {
            break;
        }
    }
    Ascent {
        x,
        fx: -fx,
        iterations,
        converged,
        escaped,
    }
}
