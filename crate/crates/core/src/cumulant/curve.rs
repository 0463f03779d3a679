use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The solved map `r ↦ v_{r,t}(λ)` on a grid of `[0, t]` (or `[r0, t]`).
///
/// Every environment atom in range is a grid node; `values` holds the
/// right-continuous value `v_{r,t}` and `left_values` the left limit
/// `v_{r−,t}`, which differ only at atoms. `mid_values[i]` is the solution
/// at the midpoint of `[grid[i], grid[i+1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantCurve {
    pub t: f64,
    pub lambda: f64,
    /// Large-jump cap `k` of a truncated equation, `None` for the full one.
    pub cap: Option<f64>,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub left_values: Vec<f64>,
    pub mid_values: Vec<f64>,
    /// Times of environment atoms on the grid.
    pub atom_times: Vec<f64>,
    /// Latest bottleneck `℘(t)` below which the curve is zero.
    pub bottleneck: Option<f64>,
    /// Largest accumulated residual of the integral equation on the grid.
    pub residual: f64,
    /// Accumulated local error estimates of the ODE integrator.
    pub integration_error: f64,
    pub steps: usize,
}

impl CumulantCurve {
    /// `residual + integration_error`: the deterministic error budget used by
    /// statistical checks.
    pub fn error_bound(&self) -> f64 {
        self.residual + self.integration_error
    }

    /// `v_{r0,t}(λ)` at the left end of the grid.
    pub fn initial_value(&self) -> f64 {
        self.values[0]
    }

    pub fn node_index(&self, r: f64) -> Option<usize> {
        let tol = 1e-12 * self.t.abs().max(1.0);
        let i = self.grid.partition_point(|&g| g < r - tol);
        (i < self.grid.len() && (self.grid[i] - r).abs() <= tol).then_some(i)
    }

    /// `v_{r,t}(λ)`: exact at nodes, quadratic through the stored midpoint
    /// between nodes.
    pub fn value_at(&self, r: f64) -> Result<f64> {
        self.interpolate(r, false)
    }

    /// `v_{r−,t}(λ)`.
    pub fn left_value_at(&self, r: f64) -> Result<f64> {
        self.interpolate(r, true)
    }

    fn interpolate(&self, r: f64, left: bool) -> Result<f64> {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if r < lo - 1e-12 || r > hi + 1e-12 {
            return Err(Error::OutOfHorizon { t: r, horizon: hi });
        }
        if let Some(i) = self.node_index(r) {
            return Ok(if left { self.left_values[i] } else { self.values[i] });
        }
        let i = self.grid.partition_point(|&g| g <= r) - 1;
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let s = (r - x0) / (x1 - x0);
        let (y0, ym, y1) = (self.values[i], self.mid_values[i], self.left_values[i + 1]);
        // Lagrange basis on {0, 1/2, 1}.
        Ok(y0 * (2.0 * s - 1.0) * (s - 1.0) + ym * 4.0 * s * (1.0 - s) + y1 * s * (2.0 * s - 1.0))
    }

    /// Residual of an integral equation `u_r = u_t − ∫_{(r,t]} rate − Σ atom`
    /// evaluated on the grid with Simpson's rule.
    ///
    /// `rate(x0, x1, s, u)` is the density on the cell `(x0, x1)` at time `s`;
    /// `atom(s, u)` is the decrement `u_s − u_{s−}` at an atom.
    pub fn integral_residual(
        &self,
        rate: impl Fn(f64, f64, f64, f64) -> f64,
        atom: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        let n = self.grid.len();
        let mut cum = 0.0_f64;
        let mut worst = 0.0_f64;
        for i in (0..n).rev() {
            if self.atom_times.contains(&self.grid[i]) || self.left_values[i] != self.values[i] {
                let d = atom(self.grid[i], self.values[i]);
                cum += self.left_values[i] - (self.values[i] - d);
                worst = worst.max(cum.abs());
            }
            if i == 0 {
                break;
            }
            let (x0, x1) = (self.grid[i - 1], self.grid[i]);
            let h = x1 - x0;
            let xm = 0.5 * (x0 + x1);
            let (u0, um, u1) = (self.values[i - 1], self.mid_values[i - 1], self.left_values[i]);
            let quad = h / 6.0 * (rate(x0, x1, x0, u0) + 4.0 * rate(x0, x1, xm, um) + rate(x0, x1, x1, u1));
            cum += u0 - u1 + quad;
            worst = worst.max(cum.abs());
        }
        worst
    }
}
