use rayon::prelude::*;

use super::solver::{sweep, SolveOptions};
use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::numeric::Pchip;

/// `λ ↦ v_{r,s}(λ)` on a solved set of arguments, interpolated by a monotone
/// cubic in `(log λ, log v)`.
#[derive(Debug, Clone)]
pub struct LambdaProfile {
    pub r: f64,
    pub s: f64,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    /// Solver error bound at each argument.
    pub errors: Vec<f64>,
    fine: Option<Pchip>,
    /// Built on every other node; its distance to `fine` estimates the
    /// interpolation error.
    coarse: Option<Pchip>,
}

/// `n` arguments spaced evenly in `log λ` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

impl LambdaProfile {
    /// Solves `v_{r,s}(λ)` for every argument in parallel.
    pub fn solve(env: &EnvironmentSpec, r: f64, s: f64, lambdas: &[f64], opts: &SolveOptions) -> Result<Self> {
        let solved: Vec<(f64, f64)> = lambdas
            .par_iter()
            .map(|&l| {
                let c = sweep(env, None, r, s, l, opts)?;
                Ok((c.values[0], c.error_bound()))
            })
            .collect::<Result<_>>()?;
        let (values, errors) = solved.into_iter().unzip();
        Self::from_values(r, s, lambdas.to_vec(), values, errors)
    }

    pub fn from_values(r: f64, s: f64, lambdas: Vec<f64>, values: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        if lambdas.len() < 3 {
            return Err(Error::InvalidArgument("a lambda profile needs at least three arguments".into()));
        }
        // A bottleneck in (r, s] makes the profile identically zero.
        let (fine, coarse) = if values.iter().all(|&v| v == 0.0) {
            (None, None)
        } else {
            let x: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
            let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
            let mut xc: Vec<f64> = x.iter().step_by(2).copied().collect();
            let mut yc: Vec<f64> = y.iter().step_by(2).copied().collect();
            if x.len().is_multiple_of(2) {
                xc.push(x[x.len() - 1]);
                yc.push(y[y.len() - 1]);
            }
            (Some(Pchip::new(x, y)?), Some(Pchip::new(xc, yc)?))
        };
        Ok(Self {
            r,
            s,
            lambdas,
            values,
            errors,
            fine,
            coarse,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lambdas[0], self.lambdas[self.lambdas.len() - 1])
    }

    fn check_range(&self, lambda: f64) -> Result<()> {
        let (lo, hi) = self.range();
        if !(lambda >= lo * (1.0 - 1e-12) && lambda <= hi * (1.0 + 1e-12)) {
            return Err(Error::ArgumentOutOfSolvedRange { arg: lambda, lo, hi });
        }
        Ok(())
    }

    /// Interpolated `v_{r,s}(λ)`.
    pub fn eval(&self, lambda: f64) -> Result<f64> {
        self.check_range(lambda)?;
        Ok(match &self.fine {
            Some(p) => p.eval(lambda.ln()).exp(),
            None => 0.0,
        })
    }

    /// Interpolation error estimate plus the largest solver error bound of
    /// the bracketing arguments.
    pub fn error_bound(&self, lambda: f64) -> Result<f64> {
        self.check_range(lambda)?;
        let (Some(fine), Some(coarse)) = (&self.fine, &self.coarse) else {
            return Ok(0.0);
        };
        let x = lambda.ln();
        let interp = (fine.eval(x).exp() - coarse.eval(x).exp()).abs();
        let i = self.lambdas.partition_point(|&l| l < lambda).min(self.lambdas.len() - 1);
        let lo = i.saturating_sub(1);
        let solver = self.errors[lo].max(self.errors[i]);
        Ok(interp + solver)
    }
}

/// `v_{r,s}(v_{s,t}(λ))` from a profile of `v_{r,s}` and the value
/// `v_{s,t}(λ)`.
pub fn compose(profile: &LambdaProfile, inner: f64) -> Result<f64> {
    profile.eval(inner)
}
