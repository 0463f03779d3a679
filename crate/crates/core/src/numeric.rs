//! Small numerical kernels shared by the solver, the measure catalog and the
//! verification layer: adaptive Simpson quadrature, an embedded
//! Dormand–Prince integrator for scalar autonomous ODEs, and monotone
//! piecewise-cubic (PCHIP) interpolation.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` over `[a, b]` with absolute tolerance
/// `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol.max(f64::MIN_POSITIVE), 32)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (m - a) <= f64::EPSILON * m.abs() {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const GAUSS_ORDER: usize = 20;

/// Nodes and weights of the Gauss–Legendre rule on `[-1, 1]`, found by
/// Newton iteration on the Legendre polynomial.
fn gauss_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_ORDER;
        (0..n)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let kf = k as f64;
                        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// Fixed-order Gauss–Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * gauss_rule().iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>()
}

/// Outcome of one call to [`integrate_autonomous`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOutcome {
    pub value: f64,
    /// Sum of the embedded local error estimates over accepted steps.
    pub error_estimate: f64,
    pub steps: usize,
    pub rejected: usize,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 200_000;

/// Integrates `dy/dτ = g(y)` from `τ = 0` to `τ = span` with adaptive
/// Dormand–Prince steps, landing exactly on `span`.
pub fn integrate_autonomous<G: Fn(f64) -> f64>(
    g: &G,
    y0: f64,
    span: f64,
    rtol: f64,
    atol: f64,
) -> Result<OdeOutcome> {
    let mut out = OdeOutcome {
        value: y0,
        error_estimate: 0.0,
        steps: 0,
        rejected: 0,
    };
    if span <= 0.0 {
        return Ok(out);
    }
    let mut y = y0;
    let mut tau = 0.0;
    let mut k1 = g(y);
    if !k1.is_finite() {
        return Err(Error::ToleranceNotMet(format!("non-finite rate at y = {y}")));
    }
    let scale0 = atol + rtol * y.abs();
    let mut h = if k1 != 0.0 {
        (0.01 * scale0 / k1.abs()).powf(0.2).min(1.0) * span
    } else {
        span
    }
    .clamp(span * 1e-12, span);

    while tau < span {
        if out.steps + out.rejected > MAX_STEPS {
            return Err(Error::ToleranceNotMet(format!(
                "step budget exhausted at tau = {tau} of {span}"
            )));
        }
        let last = tau + h >= span * (1.0 - 1e-14);
        if last {
            h = span - tau;
        }
        let k2 = g(y + h * A21 * k1);
        let k3 = g(y + h * (A31 * k1 + A32 * k2));
        let k4 = g(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = g(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = g(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = g(y_new);
        let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let sc = atol + rtol * y.abs().max(y_new.abs());
        let ratio = if err.is_finite() && y_new.is_finite() {
            err.abs() / sc
        } else {
            f64::INFINITY
        };
        if ratio <= 1.0 {
            tau = if last { span } else { tau + h };
            y = y_new;
            k1 = k7;
            out.steps += 1;
            out.error_estimate += err.abs();
            let fac = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            out.rejected += 1;
            let fac = if ratio.is_finite() {
                (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            if h < span * 1e-15 {
                return Err(Error::ToleranceNotMet(format!(
                    "step size underflow at tau = {tau}"
                )));
            }
        }
    }
    out.value = y;
    Ok(out)
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidArgument(
                "pchip needs at least two matching nodes".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "pchip nodes must be strictly increasing".into(),
            ));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&v| v <= xq) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// `e^{-x} - 1 + x` without cancellation for small `x`.
pub fn exp_compensated(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Taylor series: sum_{n>=2} (-x)^n / n!
        let mut term = x * x / 2.0;
        let mut sum = term;
        let mut n = 2.0;
        while term.abs() > 1e-18 * sum.abs() {
            n += 1.0;
            term *= -x / n;
            sum += term;
        }
        sum
    } else {
        (-x).exp_m1() + x
    }
}

/// `1 - e^{-x}`.
pub fn one_minus_exp(x: f64) -> f64 {
    -(-x).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
        let v = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 40.0, 1e-14);
        assert!((v - (1.0 - (-40.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let w: f64 = gauss_rule().iter().map(|p| p.1).sum();
        assert!((w - 2.0).abs() < 1e-14);
        let v = gauss_legendre(&|x: f64| x.powi(39) + x.powi(10), -1.0, 1.0);
        assert!((v - 2.0 / 11.0).abs() < 1e-14);
        let v = gauss_legendre(&|x: f64| (-x).exp(), 1.0, 2.0);
        assert!((v - ((-1.0f64).exp() - (-2.0f64).exp())).abs() < 1e-16);
    }

    #[test]
    fn dopri_solves_logistic_decay() {
        // dy/dτ = -y^2, y(0) = 10 → y(τ) = 10 / (1 + 10 τ)
        let out = integrate_autonomous(&|y: f64| -y * y, 10.0, 2.0, 1e-12, 1e-15).unwrap();
        assert!((out.value - 10.0 / 21.0).abs() < 1e-11);
        assert!(out.error_estimate < 1e-9);
    }

    #[test]
    fn dopri_handles_zero_span_and_constant_rate() {
        let out = integrate_autonomous(&|_| 1.0, 3.0, 0.0, 1e-10, 1e-12).unwrap();
        assert_eq!(out.value, 3.0);
        let out = integrate_autonomous(&|_| 2.0, 3.0, 1.5, 1e-10, 1e-12).unwrap();
        assert!((out.value - 6.0).abs() < 1e-13);
    }

    #[test]
    fn pchip_is_monotone_and_interpolates() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| v / (1.0 + v)).collect();
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-15);
        }
        let mut prev = p.eval(0.0);
        for i in 1..=450 {
            let v = p.eval(i as f64 * 0.01);
            assert!(v >= prev);
            prev = v;
        }
        assert!((p.eval(2.25) - 2.25 / 3.25).abs() < 1e-3);
    }

    #[test]
    fn compensated_exponentials_are_accurate() {
        for &x in &[1e-9f64, 1e-4, 0.05, 0.099, 0.1, 1.0, 30.0] {
            let exact = (-x).exp() - 1.0 + x;
            let got = exp_compensated(x);
            if x > 1e-3 {
                assert!((got - exact).abs() <= 1e-14 * exact.abs().max(1.0));
            } else {
                assert!((got - x * x / 2.0).abs() <= x * x * x);
            }
        }
        assert!((one_minus_exp(1e-12) - 1e-12).abs() < 1e-24);
    }
}
