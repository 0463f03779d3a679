//! Solves the backward equation for the Feller diffusion and compares it
//! with the closed form `λ e^{−b(t−r)} / (1 + (c/b) λ (1 − e^{−b(t−r)}))`.

use cbve::cumulant::{solve_cumulant, SolveOptions};
use cbve::environment::EnvironmentSpec;

fn main() -> cbve::Result<()> {
    let (b, c, t) = (1.0, 0.5, 1.0);
    let env = EnvironmentSpec::feller(b, c, t);
    for lambda in [0.5, 1.0, 5.0] {
        let curve = solve_cumulant(&env, t, lambda, &SolveOptions::default().with_grid_step(0.1))?;
        println!("lambda = {lambda}");
        for (r, v) in curve.grid.iter().zip(&curve.values).step_by(2) {
            let decay = (-b * (t - r)).exp();
            let exact = lambda * decay / (1.0 + c / b * lambda * (1.0 - decay));
            println!("  r = {r:.1}  v = {v:.12}  rel err = {:.1e}", (v - exact).abs() / exact);
        }
        println!("  residual {:.1e}, {} steps", curve.residual, curve.steps);
    }
    Ok(())
}
