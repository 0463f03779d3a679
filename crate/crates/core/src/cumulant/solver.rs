use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curve::CumulantCurve;
use crate::environment::{AtomEvent, Cell, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::linops::upper_bound_u;
use crate::numeric::integrate_autonomous;

const MAX_REFINE_DEPTH: u32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Largest spacing between output nodes.
    pub grid_step: f64,
    /// Relative tolerance of the adaptive integrator.
    pub rtol: f64,
    /// Additional times forced onto the grid.
    #[serde(default)]
    pub extra_nodes: Vec<f64>,
    /// Bisect grid intervals whose local residual exceeds the budget.
    pub refine: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid_step: 0.01,
            rtol: 1e-11,
            extra_nodes: Vec::new(),
            refine: true,
        }
    }
}

impl SolveOptions {
    pub fn with_grid_step(mut self, h: f64) -> Self {
        self.grid_step = h;
        self
    }

    pub fn with_nodes(mut self, nodes: &[f64]) -> Self {
        self.extra_nodes.extend_from_slice(nodes);
        self
    }

    /// Endpoint-only solve: no intermediate nodes, no residual refinement.
    pub fn endpoint() -> Self {
        Self {
            grid_step: f64::INFINITY,
            refine: false,
            ..Self::default()
        }
    }

    /// Residual budget `max(1e-8, 10 h²) · U_{0,t}(λ)`.
    pub fn residual_budget(&self, u0t: f64) -> f64 {
        let h = if self.grid_step.is_finite() { self.grid_step } else { 0.0 };
        (10.0 * h * h).max(1e-8) * u0t
    }
}

/// The branching mechanism of the (optionally truncated) backward equation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Mechanism<'a> {
    pub env: &'a EnvironmentSpec,
    /// Large-jump cap; infinite for the untruncated equation.
    pub cap: f64,
}

impl<'a> Mechanism<'a> {
    pub fn new(env: &'a EnvironmentSpec, cap: Option<f64>) -> Self {
        Self {
            env,
            cap: cap.unwrap_or(f64::INFINITY),
        }
    }

    fn jump_part(&self, cell: &Cell, v: f64) -> f64 {
        cell.jumps
            .iter()
            .map(|&(sigma, i)| {
                sigma
                    * self.env.m.continuous[i]
                        .measure
                        .k1_truncated(v, self.cap)
                        .unwrap_or(f64::NAN)
            })
            .sum()
    }

    /// `dv/dr = b₁' v + c' v² + Σ σ_i ∫ K₁(v, z) ν_i(dz)` on the cell.
    pub fn rate(&self, cell: &Cell, v: f64) -> f64 {
        cell.b1 * v + cell.c * v * v + self.jump_part(cell, v)
    }

    /// `v_s − v_{s−} = Δb₁ v_s + ∫ K₁(v_s, z) m({s}, dz)`.
    pub fn atom_decrement(&self, ev: &AtomEvent, v: f64) -> f64 {
        let jump = match &ev.measure {
            Some(nu) => nu.k1_truncated(v, self.cap).unwrap_or(f64::NAN),
            None => 0.0,
        };
        ev.delta_b1 * v + jump
    }

    /// Integrates the cell equation backward over `span`, starting from the
    /// value at the right end. Returns `(value, error estimate, steps)`.
    ///
    /// When the nonlinear part pulls `v` down fast (`(c' v + jump rate / v) ·
    /// span > 0.5`) the reciprocal `w = 1/v` is integrated instead; for the
    /// Feller part this turns `dv/dτ = −bv − c'v²` into the linear
    /// `dw/dτ = bw + c'`. A negative jump rate makes `v` grow backward, which
    /// is benign in the original variable.
    pub fn integrate(&self, cell: &Cell, v0: f64, span: f64, rtol: f64) -> Result<(f64, f64, usize)> {
        if v0 == 0.0 || span <= 0.0 {
            return Ok((v0, 0.0, 0));
        }
        let nonlinear = cell.c * v0 + self.jump_part(cell, v0) / v0;
        if nonlinear * span > 0.5 {
            let g = |w: f64| {
                if w <= 0.0 {
                    return f64::NAN;
                }
                w * w * self.rate(cell, 1.0 / w)
            };
            let w0 = 1.0 / v0;
            let out = integrate_autonomous(&g, w0, span, rtol, 1e-14 * w0)?;
            let v = 1.0 / out.value;
            Ok((v, out.error_estimate * v * v, out.steps))
        } else {
            let g = |v: f64| -self.rate(cell, v);
            let out = integrate_autonomous(&g, v0, span, rtol, 1e-14 * v0.abs())?;
            Ok((out.value, out.error_estimate, out.steps))
        }
    }
}

struct Sweep<'a> {
    mech: Mechanism<'a>,
    opts: &'a SolveOptions,
    budget_per_time: f64,
    // Built right to left.
    grid: Vec<f64>,
    values: Vec<f64>,
    lefts: Vec<f64>,
    mids: Vec<f64>,
    err: f64,
    steps: usize,
}

impl Sweep<'_> {
    /// Solves on `[x0, x1]` given the left limit at `x1`; pushes the nodes
    /// strictly inside and at `x0` (right values only).
    fn interval(&mut self, cell: &Cell, x0: f64, x1: f64, v1: f64, depth: u32) -> Result<f64> {
        let h = x1 - x0;
        let (vm, e1, s1) = self.mech.integrate(cell, v1, 0.5 * h, self.opts.rtol)?;
        let (v0, e2, s2) = self.mech.integrate(cell, vm, 0.5 * h, self.opts.rtol)?;
        if !(v0.is_finite() && vm.is_finite()) {
            return Err(Error::ToleranceNotMet(format!(
                "non-finite solution on [{x0}, {x1}]"
            )));
        }
        if self.opts.refine {
            let r = |v| self.mech.rate(cell, v);
            let local = v0 - v1 + h / 6.0 * (r(v0) + 4.0 * r(vm) + r(v1));
            let budget = self.budget_per_time * h;
            if local.abs() > budget && h > 1e-12 {
                if depth >= MAX_REFINE_DEPTH {
                    return Err(Error::ToleranceNotMet(format!(
                        "residual {local:e} above budget {budget:e} on [{x0}, {x1}]"
                    )));
                }
                let xm = 0.5 * (x0 + x1);
                let v_mid = self.interval(cell, xm, x1, v1, depth + 1)?;
                return self.interval(cell, x0, xm, v_mid, depth + 1);
            }
        }
        self.err += e1 + e2;
        self.steps += s1 + s2;
        self.mids.push(vm);
        self.grid.push(x0);
        self.values.push(v0);
        self.lefts.push(v0);
        Ok(v0)
    }
}

/// Output nodes: breakpoints in `[r0, t]`, forced nodes, and uniform
/// subdivisions with spacing at most `grid_step`.
pub(crate) fn node_plan(env: &EnvironmentSpec, r0: f64, t: f64, opts: &SolveOptions) -> Vec<f64> {
    let mut bps = env.breakpoints(r0, t);
    bps.extend(opts.extra_nodes.iter().copied().filter(|&x| x > r0 && x < t));
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let mut nodes = vec![bps[0]];
    for w in bps.windows(2) {
        let len = w[1] - w[0];
        let n = if opts.grid_step.is_finite() {
            (len / opts.grid_step).ceil().max(1.0) as usize
        } else {
            1
        };
        for k in 1..n {
            nodes.push(w[0] + len * k as f64 / n as f64);
        }
        nodes.push(w[1]);
    }
    nodes
}

/// Backward sweep of the equation on `[r0, t]` (atoms in `[r0, t]` get left
/// values). No admissibility check.
pub(crate) fn sweep(
    env: &EnvironmentSpec,
    cap: Option<f64>,
    r0: f64,
    t: f64,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<CumulantCurve> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    env.check_time(t)?;
    if !(0.0..=t).contains(&r0) {
        return Err(Error::InvalidArgument(format!("need 0 <= r <= t, got r = {r0}")));
    }
    let mech = Mechanism::new(env, cap);
    let u0t = upper_bound_u(env, lambda, 0.0, t)?;
    let span = (t - r0).max(f64::MIN_POSITIVE);
    let events: Vec<AtomEvent> = env
        .atom_events(0.0, t)
        .into_iter()
        .filter(|e| e.time >= r0)
        .collect();
    let event_at = |x: f64| events.iter().find(|e| e.time == x);

    let mut sw = Sweep {
        mech,
        opts,
        budget_per_time: opts.residual_budget(u0t) / span,
        grid: vec![t],
        values: vec![lambda],
        lefts: vec![lambda],
        mids: Vec::new(),
        err: 0.0,
        steps: 0,
    };
    if let Some(e) = event_at(t) {
        sw.lefts[0] = lambda - mech.atom_decrement(e, lambda);
    }
    let nodes = node_plan(env, r0, t, opts);
    for w in nodes.windows(2).rev() {
        let (x0, x1) = (w[0], w[1]);
        let cell = env.cell(x0, x1);
        let v1 = *sw.lefts.last().expect("nonempty");
        sw.interval(&cell, x0, x1, v1, 0)?;
        if let Some(e) = event_at(x0) {
            let v = *sw.values.last().expect("nonempty");
            let left = v - mech.atom_decrement(e, v);
            *sw.lefts.last_mut().expect("nonempty") = left;
        }
    }
    sw.grid.reverse();
    sw.values.reverse();
    sw.lefts.reverse();
    sw.mids.reverse();
    if sw.lefts.iter().any(|v| !v.is_finite()) {
        return Err(Error::ToleranceNotMet("non-finite atom jump".into()));
    }
    let mut curve = CumulantCurve {
        t,
        lambda,
        cap,
        atom_times: events.iter().map(|e| e.time).collect(),
        grid: sw.grid,
        values: sw.values,
        left_values: sw.lefts,
        mid_values: sw.mids,
        bottleneck: None,
        residual: 0.0,
        integration_error: sw.err,
        steps: sw.steps,
    };
    curve.residual = equation_residual(env, cap, &curve);
    Ok(curve)
}

/// Residual of the backward equation on the curve's grid, floored at the
/// accumulated floating-point rounding level.
pub(crate) fn equation_residual(env: &EnvironmentSpec, cap: Option<f64>, curve: &CumulantCurve) -> f64 {
    let mech = Mechanism::new(env, cap);
    let events = env.atom_events(0.0, curve.t);
    let raw = curve.integral_residual(
        |x0, x1, _, v| mech.rate(&env.cell(x0, x1), v),
        |s, v| match events.iter().find(|e| e.time == s) {
            Some(e) => mech.atom_decrement(e, v),
            None => 0.0,
        },
    );
    let vmax = curve.values.iter().chain(&curve.left_values).fold(0.0_f64, |a, &b| a.max(b.abs()));
    raw + curve.grid.len() as f64 * f64::EPSILON * vmax
}

pub(crate) fn require_admissible(env: &EnvironmentSpec, t: f64) -> Result<()> {
    let report = env.validate_until(t);
    if !report.weakly_admissible {
        return Err(Error::WeaklyMalformed(report.violations.join("; ")));
    }
    if !report.admissible {
        return Err(Error::NotAdmissible {
            bottlenecks: report.bottlenecks,
        });
    }
    Ok(())
}

/// `r ↦ v_{r,t}(λ)` on `[0, t]` for an admissible environment.
pub fn solve_cumulant(env: &EnvironmentSpec, t: f64, lambda: f64, opts: &SolveOptions) -> Result<CumulantCurve> {
    require_admissible(env, t)?;
    sweep(env, None, 0.0, t, lambda, opts)
}

/// `r ↦ v_{r,t}(λ)` on `[r, t]`.
pub fn solve_between(
    env: &EnvironmentSpec,
    r: f64,
    t: f64,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<CumulantCurve> {
    require_admissible(env, t)?;
    sweep(env, None, r, t, lambda, opts)
}

/// Solves the equation with large jumps capped at `k` (`z ↦ z ∧ k` inside
/// the exponential).
pub fn solve_truncated(
    env: &EnvironmentSpec,
    t: f64,
    lambda: f64,
    k: f64,
    opts: &SolveOptions,
) -> Result<CumulantCurve> {
    if !(k >= 1.0) {
        return Err(Error::InvalidArgument(format!("truncation level must be >= 1, got {k}")));
    }
    require_admissible(env, t)?;
    sweep(env, Some(k), 0.0, t, lambda, opts)
}

/// Solution for weakly admissible environments: solved on `[℘(t), t]` and
/// extended by zero below the latest bottleneck `℘(t)`.
pub fn solve_piecewise(env: &EnvironmentSpec, t: f64, lambda: f64, opts: &SolveOptions) -> Result<CumulantCurve> {
    let report = env.validate_until(t);
    if !report.weakly_admissible {
        return Err(Error::WeaklyMalformed(report.violations.join("; ")));
    }
    let Some(p) = report.last_bottleneck(t) else {
        return sweep(env, None, 0.0, t, lambda, opts);
    };
    let upper = sweep(env, None, p, t, lambda, opts)?;
    let mut lower_nodes = node_plan(env, 0.0, p, opts);
    lower_nodes.pop();
    let n = lower_nodes.len();
    let mut curve = CumulantCurve {
        grid: lower_nodes,
        values: vec![0.0; n],
        left_values: vec![0.0; n],
        mid_values: vec![0.0; n],
        atom_times: env.atom_events(0.0, p).iter().map(|e| e.time).filter(|&s| s < p).collect(),
        bottleneck: Some(p),
        ..upper.clone()
    };
    curve.grid.extend(&upper.grid);
    curve.values.extend(&upper.values);
    curve.left_values.extend(&upper.left_values);
    curve.mid_values.extend(&upper.mid_values);
    curve.atom_times.extend(&upper.atom_times);
    // The bottleneck jump sends v to zero.
    curve.left_values[n] = 0.0;
    Ok(curve)
}

/// Solves independently at several arguments in parallel.
pub fn solve_many(
    env: &EnvironmentSpec,
    t: f64,
    lambdas: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<CumulantCurve>> {
    lambdas
        .par_iter()
        .map(|&l| solve_piecewise(env, t, l, opts))
        .collect()
}

/// `v_{r,t}(λ)` only.
pub fn solve_value(env: &EnvironmentSpec, r: f64, t: f64, lambda: f64, cap: Option<f64>) -> Result<f64> {
    let curve = sweep(env, cap, r, t, lambda, &SolveOptions::endpoint())?;
    Ok(curve.values[0])
}

/// Result of [`truncation_ladder`].
#[derive(Debug, Clone)]
pub struct TruncationLadder {
    pub levels: Vec<f64>,
    pub curves: Vec<CumulantCurve>,
    /// `sup_r |v^{(k_{i+1})} − v^{(k_i)}|` for consecutive levels.
    pub gaps: Vec<f64>,
}

/// Solves the capped equation at each level `k` (sorted ascending) on a
/// shared grid.
pub fn truncation_ladder(
    env: &EnvironmentSpec,
    t: f64,
    lambda: f64,
    levels: &[f64],
    opts: &SolveOptions,
) -> Result<TruncationLadder> {
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    // Refinement would give each level its own grid; keep them aligned.
    let fixed = SolveOptions {
        refine: false,
        ..opts.clone()
    };
    let curves: Vec<CumulantCurve> = levels
        .par_iter()
        .map(|&k| solve_truncated(env, t, lambda, k, &fixed))
        .collect::<Result<_>>()?;
    let gaps = curves
        .windows(2)
        .map(|w| {
            w[0].values
                .iter()
                .zip(&w[1].values)
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(TruncationLadder { levels, curves, gaps })
}
