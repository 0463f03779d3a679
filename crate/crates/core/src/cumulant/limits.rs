use serde::{Deserialize, Serialize};

use super::solver::{sweep, SolveOptions};
use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};

/// Relative change between consecutive ladder values accepted as converged.
const LADDER_RTOL: f64 = 1e-6;
/// Largest argument tried for `λ → ∞`.
const LAMBDA_CAP: f64 = 1e16;
/// Smallest argument tried for `λ → 0`.
const LAMBDA_FLOOR: f64 = 1e-60;

/// A `λ → 0` or `λ → ∞` limit of `v_{0,t}(λ)` read off a decade ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    /// The limit; `+∞` when the ladder diverges.
    pub value: f64,
    /// Size of the last ladder step, a bound on the remaining change.
    pub error: f64,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
}

/// `v_{0,t}(λ)`, zero when a bottleneck lies in `(0, t]`.
fn endpoint(env: &EnvironmentSpec, t: f64, lambda: f64) -> Result<f64> {
    let report = env.validate_until(t);
    if !report.weakly_admissible {
        return Err(Error::WeaklyMalformed(report.violations.join("; ")));
    }
    if report.last_bottleneck(t).is_some() {
        return Ok(0.0);
    }
    Ok(sweep(env, None, 0.0, t, lambda, &SolveOptions::endpoint())?.values[0])
}

/// Extrapolates a geometrically converging ladder by Aitken's rule; falls
/// back to the last value when the steps are not contracting.
fn extrapolate(values: &[f64]) -> f64 {
    let n = values.len();
    let last = values[n - 1];
    if n < 3 {
        return last;
    }
    let d1 = values[n - 1] - values[n - 2];
    let d0 = values[n - 2] - values[n - 3];
    let q = d1 / d0;
    if d0 != 0.0 && q > 0.0 && q < 1.0 {
        last + d1 * q / (1.0 - q)
    } else {
        last
    }
}

/// `v_{0,t}(∞)`: the extinction exponent, `P(X(t) = 0 | X(0) = x) =
/// e^{−x v_{0,t}(∞)}`.
///
/// Solves at `λ = 10², 10³, …` until consecutive values differ by less than
/// `1e-6` relative. Growth by more than a factor 5 twice in a row is read as
/// divergence (extinction impossible) and returns `+∞`.
pub fn extinction_exponent(env: &EnvironmentSpec, t: f64) -> Result<LimitEstimate> {
    let mut lambdas = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut fast_growth = 0;
    let mut lambda: f64 = 1e2;
    while lambda <= LAMBDA_CAP {
        let v = endpoint(env, t, lambda)?;
        lambdas.push(lambda);
        values.push(v);
        if let [.., prev, last] = values[..] {
            if last == 0.0 {
                return Ok(LimitEstimate {
                    value: 0.0,
                    error: 0.0,
                    lambdas,
                    values,
                });
            }
            if (last - prev).abs() < LADDER_RTOL * last {
                return Ok(LimitEstimate {
                    value: extrapolate(&values),
                    error: (last - prev).abs(),
                    lambdas,
                    values,
                });
            }
            fast_growth = if last > 5.0 * prev { fast_growth + 1 } else { 0 };
            if fast_growth >= 2 {
                return Ok(LimitEstimate {
                    value: f64::INFINITY,
                    error: f64::INFINITY,
                    lambdas,
                    values,
                });
            }
        }
        lambda *= 10.0;
    }
    let lower = *values.last().expect("ladder is nonempty");
    let upper = extrapolate(&values);
    Err(Error::NoConvergenceBelowCap {
        lower,
        upper: if upper > lower { upper } else { f64::INFINITY },
    })
}

/// `v_{0,t}(0+)`: the explosion exponent, `P(X(t) < ∞ | X(0) = x) =
/// e^{−x v_{0,t}(0)}`; zero iff the semigroup is conservative.
///
/// Solves at `λ = 10⁻², 10⁻³, …`. Values shrinking by a factor 5 or more
/// twice in a row mark `v ∝ λ` and the limit is 0.
pub fn survival_exponent(env: &EnvironmentSpec, t: f64) -> Result<LimitEstimate> {
    let mut lambdas = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut fast_decay = 0;
    let mut lambda: f64 = 1e-2;
    while lambda >= LAMBDA_FLOOR {
        let v = endpoint(env, t, lambda)?;
        lambdas.push(lambda);
        values.push(v);
        if v == 0.0 {
            break;
        }
        if let [.., prev, last] = values[..] {
            if (last - prev).abs() < LADDER_RTOL * last {
                return Ok(LimitEstimate {
                    value: extrapolate(&values),
                    error: (last - prev).abs(),
                    lambdas,
                    values,
                });
            }
            fast_decay = if last <= 0.2 * prev { fast_decay + 1 } else { 0 };
            if fast_decay >= 2 {
                return Ok(LimitEstimate {
                    value: 0.0,
                    error: last,
                    lambdas,
                    values,
                });
            }
        }
        lambda *= 0.1;
    }
    let last = *values.last().expect("ladder is nonempty");
    let error = match values[..] {
        [.., prev, last] => (prev - last).abs(),
        _ => last,
    };
    Ok(LimitEstimate {
        value: extrapolate(&values).max(0.0),
        error,
        lambdas,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{LevyMeasureSpec, PiecewiseDensity};

    #[test]
    fn zero_environment_limits() {
        let env = EnvironmentSpec::zero(1.0);
        assert_eq!(extinction_exponent(&env, 1.0).unwrap().value, f64::INFINITY);
        assert_eq!(survival_exponent(&env, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn pure_drift_never_dies_out() {
        let env = EnvironmentSpec::feller(0.7, 0.0, 1.0);
        assert_eq!(extinction_exponent(&env, 1.0).unwrap().value, f64::INFINITY);
    }

    #[test]
    fn feller_extinction_matches_limit_formula() {
        let (b, c, t) = (0.5, 0.8, 1.0);
        let env = EnvironmentSpec::feller(b, c, t);
        let est = extinction_exponent(&env, t).unwrap();
        let exact = b / (c * ((b * t).exp() - 1.0));
        assert!((est.value - exact).abs() < 1e-7 * exact, "{} vs {exact}", est.value);
        let critical = extinction_exponent(&EnvironmentSpec::feller(0.0, 1.0, 2.0), 2.0).unwrap();
        assert!((critical.value - 0.5).abs() < 1e-7);
    }

    #[test]
    fn heavy_tail_explodes() {
        let env = EnvironmentSpec::zero(1.0).with_continuous_jumps(
            PiecewiseDensity::constant(0.0, 1.0, 1.0),
            LevyMeasureSpec::power_law(0.5, 0.7, None),
        );
        let est = survival_exponent(&env, 1.0).unwrap();
        // With y = v^{0.3} the equation dv/dτ = a v^{0.7} − k v is linear.
        let (k, a): (f64, f64) = (0.5 / 0.3, 0.5 * 2.991_568_987_687_59 / 0.7);
        let exact = (a / k * (1.0 - (-0.3 * k).exp())).powf(1.0 / 0.3);
        assert!((est.value - exact).abs() < 1e-5 * exact, "{est:?} vs {exact}");
        let light = EnvironmentSpec::zero(1.0).with_continuous_jumps(
            PiecewiseDensity::constant(0.0, 1.0, 1.0),
            LevyMeasureSpec::power_law(0.5, 1.5, None),
        );
        assert_eq!(survival_exponent(&light, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn bottleneck_gives_zero_exponents() {
        let env = EnvironmentSpec::feller(0.5, 0.5, 1.0).with_b1_atom(0.5, 1.0);
        assert_eq!(extinction_exponent(&env, 1.0).unwrap().value, 0.0);
    }
}
