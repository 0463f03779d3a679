use super::curve::CumulantCurve;
use crate::environment::{BvFunction, EnvironmentSpec, Kernel, PiecewiseDensity};
use crate::error::{Error, Result};

/// A BV function shifted by a constant: `ζ(s) = zeta0 + shape(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zeta {
    pub zeta0: f64,
    pub shape: BvFunction,
}

impl Zeta {
    pub fn new(zeta0: f64, shape: BvFunction) -> Self {
        Self { zeta0, shape }
    }

    pub fn constant(kappa: f64) -> Self {
        Self::new(kappa, BvFunction::zero())
    }

    pub fn value(&self, s: f64) -> f64 {
        self.zeta0 + self.shape.value(s)
    }

    pub fn left_limit(&self, s: f64) -> f64 {
        self.zeta0 + self.shape.left_limit(s)
    }

    pub fn jump_at(&self, s: f64) -> f64 {
        self.shape.jump_at(s)
    }

    /// The value just left of `s` inside the cell starting at `x0`.
    fn inside(&self, x0: f64, s: f64) -> f64 {
        self.value(x0) + self.shape.density.integral(x0, s)
    }
}

/// `u_{r,t}(λ') = e^{ζ(r)} v_{r,t}(e^{−ζ(t)} λ')`, where the curve was solved
/// at `λ = e^{−ζ(t)} λ'`. Every atom of `ζ` in `(r₀, t]` must be a grid node.
pub fn h_transform(curve: &CumulantCurve, zeta: &Zeta) -> Result<CumulantCurve> {
    let r0 = curve.grid[0];
    for a in zeta.shape.atoms_in(r0, curve.t) {
        if curve.node_index(a[0]).is_none() {
            return Err(Error::InvalidArgument(format!(
                "zeta jumps at {} which is not a grid node of the curve",
                a[0]
            )));
        }
    }
    let scale = |z: f64, v: f64| if v == 0.0 { 0.0 } else { z.exp() * v };
    let mut atom_times = curve.atom_times.clone();
    atom_times.extend(zeta.shape.atoms_in(r0, curve.t).map(|a| a[0]));
    atom_times.sort_by(f64::total_cmp);
    atom_times.dedup();
    Ok(CumulantCurve {
        lambda: zeta.value(curve.t).exp() * curve.lambda,
        values: curve.grid.iter().zip(&curve.values).map(|(&s, &v)| scale(zeta.value(s), v)).collect(),
        left_values: curve
            .grid
            .iter()
            .zip(&curve.left_values)
            .map(|(&s, &v)| scale(zeta.left_limit(s), v))
            .collect(),
        mid_values: curve
            .grid
            .windows(2)
            .zip(&curve.mid_values)
            .map(|(w, &v)| scale(zeta.inside(w[0], 0.5 * (w[0] + w[1])), v))
            .collect(),
        atom_times,
        residual: 0.0,
        integration_error: 0.0,
        ..curve.clone()
    })
}

/// Coefficients of the linear terms of the transformed equation: the
/// density `ζ_c' + b_c'` on each cell and the factor
/// `(1 − e^{−Δζ}) + e^{−Δζ} Δb` at each atom of `b` or `ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedLinearTerms {
    /// `[t0, t1, density]` per cell.
    pub densities: Vec<[f64; 3]>,
    /// `[time, factor]` per atom.
    pub atoms: Vec<[f64; 2]>,
}

impl TransformedLinearTerms {
    pub fn sup_abs(&self) -> f64 {
        self.densities
            .iter()
            .map(|d| d[2].abs())
            .chain(self.atoms.iter().map(|a| a[1].abs()))
            .fold(0.0, f64::max)
    }
}

fn cell_bounds(env: &EnvironmentSpec, zeta: &Zeta, t: f64) -> Vec<f64> {
    let mut bps = env.breakpoints(0.0, t);
    bps.extend(zeta.shape.breakpoints().into_iter().filter(|&s| s > 0.0 && s < t));
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    bps
}

pub fn transformed_linear_terms(env: &EnvironmentSpec, zeta: &Zeta, t: f64) -> Result<TransformedLinearTerms> {
    let b = env.mean_drift(t)?;
    let densities = cell_bounds(env, zeta, t)
        .windows(2)
        .map(|w| {
            [
                w[0],
                w[1],
                zeta.shape.density.value_on(w[0], w[1]) + b.density.value_on(w[0], w[1]),
            ]
        })
        .collect();
    let mut times: Vec<f64> = b.atoms_in(0.0, t).map(|a| a[0]).collect();
    times.extend(zeta.shape.atoms_in(0.0, t).map(|a| a[0]));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let atoms = times
        .into_iter()
        .map(|s| {
            let q = (-zeta.jump_at(s)).exp();
            [s, (1.0 - q) + q * b.jump_at(s)]
        })
        .collect();
    Ok(TransformedLinearTerms { densities, atoms })
}

/// The `ζ` that removes the linear drift: `ζ_c = −b_c` and
/// `Δζ = log(1 − Δb)`. Requires `Δb < 1` on `(0, t]`.
pub fn drift_removing_zeta(env: &EnvironmentSpec, t: f64) -> Result<Zeta> {
    let b = env.mean_drift(t)?;
    let mut atoms = Vec::new();
    for a in b.atoms_in(0.0, t) {
        if a[1] >= 1.0 {
            return Err(Error::JumpAtMinusOne { time: a[0], jump: -a[1] });
        }
        atoms.push([a[0], (-a[1]).ln_1p()]);
    }
    let segments = b.density.segments().iter().map(|s| [s[0], s[1], -s[2]]).collect();
    Ok(Zeta::new(
        0.0,
        BvFunction {
            density: PiecewiseDensity::new(segments)?,
            atoms,
        },
    ))
}

/// Residual of the transformed equation
/// `u_r = λ − ∫ u dβ − ∫ u e^{−Δζ} db − ∫ u² e^{−ζ} dc − ∫∫ e^{ζ(s−)} K(e^{−ζ(s)} u, z) m(ds, dz)`
/// with `β = ζ_c + Σ (1 − e^{−Δζ})`, evaluated on the grid of `u`.
pub fn transformed_residual(env: &EnvironmentSpec, zeta: &Zeta, u: &CumulantCurve) -> Result<f64> {
    let b = env.mean_drift(u.t)?;
    let events = env.atom_events(0.0, u.t);
    let k = |nu: &crate::environment::LevyMeasureSpec, x: f64| nu.atom_integral(Kernel::K, x);
    // Collect integrand failures instead of unwinding through the closures.
    let failure = std::cell::Cell::new(None);
    let note = |r: Result<f64>| {
        r.unwrap_or_else(|e| {
            failure.set(Some(e.to_string()));
            0.0
        })
    };
    let raw = u.integral_residual(
        |x0, x1, s, w| {
            let cell = env.cell(x0, x1);
            let z = zeta.inside(x0, s);
            let linear = zeta.shape.density.value_on(x0, x1) + b.density.value_on(x0, x1);
            let mut jumps = 0.0;
            for &(sigma, i) in &cell.jumps {
                jumps += sigma * note(k(&env.m.continuous[i].measure, (-z).exp() * w));
            }
            linear * w + cell.c * (-z).exp() * w * w + z.exp() * jumps
        },
        |s, w| {
            let q = (-zeta.jump_at(s)).exp();
            let mut d = w * ((1.0 - q) + q * b.jump_at(s));
            if let Some(nu) = events.iter().find(|e| e.time == s).and_then(|e| e.measure.as_ref()) {
                d += zeta.left_limit(s).exp() * note(k(nu, (-zeta.value(s)).exp() * w));
            }
            d
        },
    );
    if let Some(msg) = failure.take() {
        return Err(Error::InvalidArgument(msg));
    }
    let vmax = u.values.iter().chain(&u.left_values).fold(0.0_f64, |a, &v| a.max(v.abs()));
    Ok(raw + u.grid.len() as f64 * f64::EPSILON * vmax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::{solve_cumulant, SolveOptions};
    use crate::environment::LevyMeasureSpec;

    fn jump_env() -> EnvironmentSpec {
        let mut env = EnvironmentSpec::feller(0.6, 0.4, 1.0).with_continuous_jumps(
            PiecewiseDensity::constant(0.0, 1.0, 0.5),
            LevyMeasureSpec::finite_atoms(vec![[0.5, 1.0], [2.0, 0.3]]),
        );
        env = env
            .with_b1_atom(0.3, 0.2)
            .with_measure_atom(0.6, LevyMeasureSpec::finite_atoms(vec![[0.4, 0.5], [1.5, 0.1]]));
        env
    }

    #[test]
    fn zero_zeta_is_identity() {
        let env = jump_env();
        let v = solve_cumulant(&env, 1.0, 1.3, &SolveOptions::default()).unwrap();
        let u = h_transform(&v, &Zeta::constant(0.0)).unwrap();
        assert_eq!(u.values, v.values);
        assert_eq!(u.left_values, v.left_values);
        assert_eq!(u.lambda, v.lambda);
    }

    #[test]
    fn constant_zeta_scales() {
        let env = jump_env();
        let kappa = 0.4_f64;
        let v = solve_cumulant(&env, 1.0, (-kappa).exp() * 2.0, &SolveOptions::default()).unwrap();
        let u = h_transform(&v, &Zeta::constant(kappa)).unwrap();
        assert!((u.lambda - 2.0).abs() < 1e-15);
        for (a, b) in u.values.iter().zip(&v.values) {
            assert!((a - kappa.exp() * b).abs() < 1e-15);
        }
        assert!(transformed_residual(&env, &Zeta::constant(kappa), &u).unwrap() < 1e-8);
    }

    #[test]
    fn drift_removing_zeta_kills_linear_terms() {
        let env = jump_env();
        let zeta = drift_removing_zeta(&env, 1.0).unwrap();
        let terms = transformed_linear_terms(&env, &zeta, 1.0).unwrap();
        assert!(terms.sup_abs() < 1e-15, "{terms:?}");
        let plain = transformed_linear_terms(&env, &Zeta::constant(0.0), 1.0).unwrap();
        assert!(plain.sup_abs() > 0.1);
        let v = solve_cumulant(&env, 1.0, 1.0, &SolveOptions::default()).unwrap();
        let u = h_transform(&v, &zeta).unwrap();
        let res = transformed_residual(&env, &zeta, &u).unwrap();
        assert!(res < 1e-8, "{res}");
    }

    #[test]
    fn off_grid_zeta_atom_is_rejected() {
        let env = EnvironmentSpec::feller(1.0, 0.5, 1.0);
        let v = solve_cumulant(&env, 1.0, 1.0, &SolveOptions::default()).unwrap();
        let zeta = Zeta::new(0.0, BvFunction::zero().with_atom(0.12345, 0.1));
        assert!(h_transform(&v, &zeta).is_err());
    }
}
