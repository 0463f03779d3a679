use serde::{Deserialize, Serialize};

use super::curve::CumulantCurve;
use super::solver::{equation_residual, node_plan, require_admissible, SolveOptions};
use crate::environment::{AtomEvent, BvFunction, EnvironmentSpec, LevyMeasureSpec, PiecewiseDensity};
use crate::error::{Error, Result};
use crate::linops::LinearCoefficient;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    /// Stop once the sup-norm increment between iterates drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub grid_step: f64,
    /// Keep every iterate's node values in the outcome.
    pub keep_iterates: bool,
    /// Re-run on a doubled step to estimate the quadrature error.
    pub estimate_error: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
            grid_step: 0.01,
            keep_iterates: false,
            estimate_error: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub curve: CumulantCurve,
    pub iterations: usize,
    /// Sup-norm increment of each iteration.
    pub increments: Vec<f64>,
    /// Node values of `v⁽¹⁾, v⁽²⁾, …` in the original coordinates, when kept.
    pub iterates: Vec<Vec<f64>>,
}

/// The environment rewritten as
/// `u_r = λ + ∫ u α(ds) + ∫∫ (1 − e^{−uz}) μ(ds, dz)` with
/// `α = −b₁ − ∫₀¹ z m` and `μ = m`.
struct LinearForm<'a> {
    env: &'a EnvironmentSpec,
    coef: LinearCoefficient,
}

impl<'a> LinearForm<'a> {
    fn new(env: &'a EnvironmentSpec, t: f64) -> Result<Self> {
        if env.c.density.integral(0.0, t) != 0.0 {
            return Err(Error::InvalidArgument(
                "Picard iteration needs a vanishing diffusion clock".into(),
            ));
        }
        let first = |nu: &LevyMeasureSpec, lo: f64, hi: f64| {
            nu.moment(1, lo, hi)
                .map_err(|_| Error::FirstMomentInfinite { horizon: t })
        };
        let mut segments = Vec::new();
        for cell in env.cells(0.0, t) {
            let mut d = -cell.b1;
            for &(sigma, i) in &cell.jumps {
                let nu = &env.m.continuous[i].measure;
                first(nu, 1.0, f64::INFINITY)?;
                d -= sigma * first(nu, 0.0, 1.0)?;
            }
            if d != 0.0 {
                segments.push([cell.t0, cell.t1, d]);
            }
        }
        let mut atoms = Vec::new();
        for e in env.atom_events(0.0, t) {
            let mut jump = -e.delta_b1;
            if let Some(nu) = &e.measure {
                first(nu, 1.0, f64::INFINITY)?;
                jump -= first(nu, 0.0, 1.0)?;
            }
            atoms.push([e.time, jump]);
        }
        let alpha = BvFunction {
            density: PiecewiseDensity::new(segments)?,
            atoms,
        };
        Ok(Self {
            env,
            coef: LinearCoefficient::new(alpha)?,
        })
    }
}

/// Iterates on `[0, t]` in the coordinates `w_r = e^{ζ(r)} u_r`, where the
/// linear term disappears:
/// `w_r = e^{ζ(t)}λ + ∫_{(r,t]} e^{ζ(s−)} ∫ (1 − e^{−e^{−ζ(s)} w_s z}) μ(ds, dz)`.
struct Iteration<'a> {
    form: LinearForm<'a>,
    grid: Vec<f64>,
    zeta: Vec<f64>,
    zeta_left: Vec<f64>,
    zeta_mid: Vec<f64>,
    /// Environment atom at each node.
    events: Vec<Option<AtomEvent>>,
}

#[derive(Clone)]
struct State {
    values: Vec<f64>,
    lefts: Vec<f64>,
    mids: Vec<f64>,
}

impl State {
    fn distance(&self, other: &State) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        d(&self.values, &other.values)
            .max(d(&self.lefts, &other.lefts))
            .max(d(&self.mids, &other.mids))
    }
}

impl<'a> Iteration<'a> {
    fn new(form: LinearForm<'a>, t: f64, grid_step: f64) -> Self {
        let opts = SolveOptions::default().with_grid_step(grid_step);
        let grid = node_plan(form.env, 0.0, t, &opts);
        let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let zeta: Vec<f64> = grid.iter().map(|&s| form.coef.zeta(s)).collect();
        let zeta_mid = mids.iter().map(|&s| form.coef.zeta(s)).collect();
        let zeta_fn = form.coef.zeta_function();
        let zeta_left = grid.iter().zip(&zeta).map(|(&s, z)| z - zeta_fn.jump_at(s)).collect();
        let atom_events = form.env.atom_events(0.0, t);
        let events = grid
            .iter()
            .map(|&s| atom_events.iter().find(|e| e.time == s).cloned())
            .collect();
        Self {
            form,
            grid,
            zeta,
            zeta_left,
            zeta_mid,
            events,
        }
    }

    /// `e^{ζ} Σ σ_i ∫ (1 − e^{−e^{−ζ} w z}) ν_i(dz)` on the cell `[x0, x1]`.
    fn rate(&self, x0: f64, x1: f64, zeta: f64, w: f64) -> Result<f64> {
        let cell = self.form.env.cell(x0, x1);
        let mut total = 0.0;
        for &(sigma, i) in &cell.jumps {
            let nu = &self.form.env.m.continuous[i].measure;
            total += sigma * nu.one_minus_exp_integral((-zeta).exp() * w)?;
        }
        Ok(zeta.exp() * total)
    }

    fn atom_increment(&self, node: usize, w: f64) -> Result<f64> {
        let Some(e) = &self.events[node] else {
            return Ok(0.0);
        };
        Ok(match &e.measure {
            Some(nu) => self.zeta_left[node].exp() * nu.one_minus_exp_integral((-self.zeta[node]).exp() * w)?,
            None => 0.0,
        })
    }

    fn step(&self, lambda: f64, prev: &State) -> Result<State> {
        let n = self.grid.len();
        let mut next = State {
            values: vec![0.0; n],
            lefts: vec![0.0; n],
            mids: vec![0.0; n - 1],
        };
        next.values[n - 1] = self.zeta[n - 1].exp() * lambda;
        next.lefts[n - 1] = next.values[n - 1] + self.atom_increment(n - 1, prev.values[n - 1])?;
        for i in (0..n - 1).rev() {
            let (x0, x1) = (self.grid[i], self.grid[i + 1]);
            let h = x1 - x0;
            let f0 = self.rate(x0, x1, self.zeta[i], prev.values[i])?;
            let fm = self.rate(x0, x1, self.zeta_mid[i], prev.mids[i])?;
            let f1 = self.rate(x0, x1, self.zeta_left[i + 1], prev.lefts[i + 1])?;
            let w1 = next.lefts[i + 1];
            // Quadratic through the three samples, integrated over each half.
            next.mids[i] = w1 + h * (-f0 + 8.0 * fm + 5.0 * f1) / 24.0;
            next.values[i] = w1 + h * (f0 + 4.0 * fm + f1) / 6.0;
            next.lefts[i] = next.values[i] + self.atom_increment(i, prev.values[i])?;
        }
        Ok(next)
    }

    fn original(&self, s: &State) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let back = |w: &[f64], z: &[f64]| w.iter().zip(z).map(|(w, z)| w * (-z).exp()).collect();
        (
            back(&s.values, &self.zeta),
            back(&s.lefts, &self.zeta_left),
            back(&s.mids, &self.zeta_mid),
        )
    }

    fn run(&self, lambda: f64, opts: &PicardOptions) -> Result<(State, Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.grid.len();
        let mut state = State {
            values: vec![0.0; n],
            lefts: vec![0.0; n],
            mids: vec![0.0; n - 1],
        };
        let mut increments = Vec::new();
        let mut iterates = Vec::new();
        for _ in 0..opts.max_iter {
            let next = self.step(lambda, &state)?;
            // Increments are measured in the original coordinates.
            let (a, b) = (self.original(&next), self.original(&state));
            let inc = State {
                values: a.0,
                lefts: a.1,
                mids: a.2,
            }
            .distance(&State {
                values: b.0,
                lefts: b.1,
                mids: b.2,
            });
            if !inc.is_finite() {
                return Err(Error::ToleranceNotMet("Picard iterate is not finite".into()));
            }
            state = next;
            increments.push(inc);
            if opts.keep_iterates {
                iterates.push(self.original(&state).0);
            }
            if inc < opts.tol {
                return Ok((state, increments, iterates));
            }
        }
        Err(Error::ToleranceNotMet(format!(
            "Picard increment {:e} above {:e} after {} iterations",
            increments.last().copied().unwrap_or(f64::NAN),
            opts.tol,
            opts.max_iter
        )))
    }
}

/// Solves the backward equation by monotone Picard iteration from `v⁽⁰⁾ ≡ 0`.
///
/// Applies to environments without diffusion whose jump measure has a finite
/// first moment, i.e. those expressible with a linear coefficient `α` and a
/// jump kernel `μ` integrating `z`.
pub fn solve_cumulant_picard(
    env: &EnvironmentSpec,
    t: f64,
    lambda: f64,
    opts: &PicardOptions,
) -> Result<PicardOutcome> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    env.check_time(t)?;
    require_admissible(env, t)?;
    let it = Iteration::new(LinearForm::new(env, t)?, t, opts.grid_step);
    let (state, increments, iterates) = it.run(lambda, opts)?;
    let (values, left_values, mid_values) = it.original(&state);

    let mut quadrature_error = 0.0;
    if opts.estimate_error && it.grid.len() > 2 {
        // Simpson's error ≈ (v_h − v_{2h}) / 15 at shared nodes.
        let coarse = Iteration::new(LinearForm::new(env, t)?, t, 2.0 * opts.grid_step);
        let no_keep = PicardOptions {
            keep_iterates: false,
            ..opts.clone()
        };
        let (cs, _, _) = coarse.run(lambda, &no_keep)?;
        let (cv, _, _) = coarse.original(&cs);
        for (x, v) in coarse.grid.iter().zip(&cv) {
            if let Some(i) = it.grid.iter().position(|g| g == x) {
                quadrature_error = f64::max(quadrature_error, (values[i] - v).abs() / 15.0);
            }
        }
    }

    let mut curve = CumulantCurve {
        t,
        lambda,
        cap: None,
        atom_times: env.atom_events(0.0, t).iter().map(|e| e.time).collect(),
        grid: it.grid.clone(),
        values,
        left_values,
        mid_values,
        bottleneck: None,
        residual: 0.0,
        integration_error: quadrature_error + increments.last().copied().unwrap_or(0.0),
        steps: increments.len() * it.grid.len(),
    };
    curve.residual = equation_residual(env, None, &curve);
    Ok(PicardOutcome {
        curve,
        iterations: increments.len(),
        increments,
        iterates,
    })
}
