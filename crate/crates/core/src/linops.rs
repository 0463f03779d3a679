//! Closed-form solutions of the linear backward/forward equations and the
//! explicit bounds `l ≤ v ≤ U` for the nonlinear cumulant.

use crate::environment::{BvFunction, EnvironmentSpec, LevyMeasureSpec, PiecewiseDensity};
use crate::error::{Error, Result};

/// Products over more atoms than this are accumulated as sums of logs.
const LOG_PRODUCT_THRESHOLD: usize = 50;

/// Linear coefficient `α` with `Δα > −1` at every atom.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoefficient {
    alpha: BvFunction,
}

impl LinearCoefficient {
    pub fn new(alpha: BvFunction) -> Result<Self> {
        alpha.check("alpha")?;
        if let Some(a) = alpha.atoms.iter().find(|a| a[1] <= -1.0) {
            return Err(Error::JumpAtMinusOne {
                time: a[0],
                jump: a[1],
            });
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &BvFunction {
        &self.alpha
    }

    /// `ζ(t) = α_c(t) + Σ_{s ≤ t} log(1 + Δα(s))`.
    pub fn zeta(&self, t: f64) -> f64 {
        self.alpha.continuous_part(t) + log_product(&self.alpha, 0.0, t)
    }

    /// `ζ` as a BV function.
    pub fn zeta_function(&self) -> BvFunction {
        BvFunction {
            density: self.alpha.density.clone(),
            atoms: self
                .alpha
                .atoms
                .iter()
                .map(|a| [a[0], a[1].ln_1p()])
                .collect(),
        }
    }
}

fn log_product(alpha: &BvFunction, r: f64, t: f64) -> f64 {
    alpha.atoms_in(r, t).map(|a| a[1].ln_1p()).sum()
}

/// `Π_{s ∈ (r,t]} (1 + Δα(s))`, in log space for long products.
fn atom_product(alpha: &BvFunction, r: f64, t: f64) -> f64 {
    if alpha.atoms_in(r, t).count() > LOG_PRODUCT_THRESHOLD {
        log_product(alpha, r, t).exp()
    } else {
        alpha.atoms_in(r, t).map(|a| 1.0 + a[1]).product()
    }
}

/// `π_{r,t}(λ) = λ Π_{(r,t]}(1 + Δα) exp{α_c(t) − α_c(r)}`.
pub fn solve_linear_backward(coef: &LinearCoefficient, lambda: f64, r: f64, t: f64) -> Result<f64> {
    if r > t {
        return Err(Error::InvalidArgument(format!("need r <= t, got r = {r}, t = {t}")));
    }
    let a = &coef.alpha;
    Ok(lambda * atom_product(a, r, t) * a.density.integral(r, t).exp())
}

/// `π_t(λ)`: the forward solution on `(0, t]`.
pub fn solve_linear_forward(coef: &LinearCoefficient, lambda: f64, t: f64) -> Result<f64> {
    solve_linear_backward(coef, lambda, 0.0, t)
}

/// Right side of the backward linear equation
/// `λ + ∫_{(r,t]} π_{s,t} α(ds)` evaluated with the closed-form `π` and a
/// composite Simpson rule on `n` panels per constant-density segment. The
/// difference to `π_{r,t}(λ)` is the residual of the closed form.
pub fn linear_backward_rhs(coef: &LinearCoefficient, lambda: f64, r: f64, t: f64, n: usize) -> Result<f64> {
    let a = &coef.alpha;
    let pi = |s: f64| solve_linear_backward(coef, lambda, s, t);
    let mut total = lambda;
    for e in a.atoms_in(r, t) {
        total += pi(e[0])? * e[1];
    }
    let mut bps: Vec<f64> = a.breakpoints();
    bps.extend([r, t]);
    bps.retain(|&p| p >= r && p <= t);
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    for w in bps.windows(2) {
        let d = a.density.value_on(w[0], w[1]);
        if d == 0.0 {
            continue;
        }
        let h = (w[1] - w[0]) / n as f64;
        // Sample just inside the segment so atoms at its ends are excluded.
        let nudge = |s: f64| s.clamp(w[0], w[1] - 1e-15 * w[1].abs().max(1.0));
        let mut acc = 0.0;
        for k in 0..n {
            let x0 = w[0] + k as f64 * h;
            let x1 = x0 + h;
            acc += h / 6.0 * (pi(nudge(x0))? + 4.0 * pi(0.5 * (x0 + x1))? + pi(nudge(x1))?);
        }
        total += d * acc;
    }
    Ok(total)
}

/// `π_{r,t}(1)` for `α = −b`: the mean factor `E[X(t) | X(r) = x] / x`.
pub fn mean_factor(env: &EnvironmentSpec, r: f64, t: f64) -> Result<f64> {
    env.check_time(t)?;
    let b = env.mean_drift(t)?;
    // Δb = 1 at a bottleneck sends the mean to zero.
    if b.atoms_in(r, t).any(|a| a[1] >= 1.0) {
        return Ok(0.0);
    }
    solve_linear_backward(&LinearCoefficient::new(b.scaled(-1.0))?, 1.0, r, t)
}

/// `U_{r,t}(λ) = [λ + m((0,t] × (1,∞))] exp{‖b₁‖(t) − ‖b₁‖(r)}`.
pub fn upper_bound_u(env: &EnvironmentSpec, lambda: f64, r: f64, t: f64) -> Result<f64> {
    let mass = env.large_jump_mass(0.0, t)?;
    Ok((lambda + mass) * env.b1.variation_between(r, t).exp())
}

/// Constants entering the lower bound at a given `(t, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundParams {
    pub u0: f64,
    pub eta: f64,
    pub f: f64,
    pub h: f64,
    pub eps: f64,
    /// The coefficient `α(·, t, λ)` on `[0, t]`.
    pub alpha: BvFunction,
}

/// Smallest `η ∈ {2, 4, 8, …}` such that every atom with `Δb₁ = 1` charges
/// `(1, η]`.
fn choose_eta(env: &EnvironmentSpec, t: f64) -> Result<f64> {
    let mut eta: f64 = 2.0;
    let j_atoms: Vec<LevyMeasureSpec> = env
        .atom_events(0.0, t)
        .into_iter()
        .filter(|e| e.delta_b1 == 1.0)
        .map(|e| e.measure.unwrap_or_else(LevyMeasureSpec::empty))
        .collect();
    for nu in &j_atoms {
        while nu.mass(1.0, eta)? <= 0.0 {
            eta *= 2.0;
            if eta > 2f64.powi(200) {
                return Err(Error::NotAdmissible {
                    bottlenecks: env.validate_until(t).bottlenecks,
                });
            }
        }
    }
    Ok(eta)
}

pub fn lower_bound_params(env: &EnvironmentSpec, lambda: f64, t: f64) -> Result<LowerBoundParams> {
    let report = env.validate_until(t);
    if !report.admissible {
        return Err(Error::NotAdmissible {
            bottlenecks: report.bottlenecks,
        });
    }
    let u0 = upper_bound_u(env, lambda, 0.0, t)?;
    let eta = choose_eta(env, t)?;
    let f = -(-u0).exp_m1() / u0;
    let h = -(-eta * u0).exp_m1() / (eta * u0);
    let eps = (f / u0).min(1.0);
    // Density of α for the measure ν integrated against time weight 1.
    let kernel = |nu: &LevyMeasureSpec| -> Result<f64> {
        Ok(-0.5 * u0 * nu.moment(2, 0.0, eps)? + h * nu.moment(1, 1.0, eta)?
            - (1.0 - f) * nu.moment(1, eps, 1.0)?)
    };
    let mut segments = Vec::new();
    for cell in env.cells(0.0, t) {
        let mut d = -cell.b1 - u0 * cell.c;
        for &(sigma, i) in &cell.jumps {
            d += sigma * kernel(&env.m.continuous[i].measure)?;
        }
        if d != 0.0 {
            segments.push([cell.t0, cell.t1, d]);
        }
    }
    let mut atoms = Vec::new();
    for e in env.atom_events(0.0, t) {
        let mut jump = -e.delta_b1;
        if let Some(nu) = &e.measure {
            jump += kernel(nu)?;
        }
        atoms.push([e.time, jump]);
    }
    Ok(LowerBoundParams {
        u0,
        eta,
        f,
        h,
        eps,
        alpha: BvFunction {
            density: PiecewiseDensity::new(segments)?,
            atoms,
        },
    })
}

/// `l_{r,t}(λ) = λ Π_{(r,t]}[1 + (0 ∧ Δα)] exp{‖α‖(r) − ‖α‖(t)}`.
pub fn lower_bound_l(env: &EnvironmentSpec, lambda: f64, r: f64, t: f64) -> Result<f64> {
    let p = lower_bound_params(env, lambda, t)?;
    Ok(lower_bound_from(&p, lambda, r, t))
}

pub fn lower_bound_from(p: &LowerBoundParams, lambda: f64, r: f64, t: f64) -> f64 {
    let a = &p.alpha;
    let prod: f64 = a.atoms_in(r, t).map(|x| (1.0 + x[1].min(0.0)).ln()).sum();
    lambda * (prod - a.variation_between(r, t)).exp()
}
