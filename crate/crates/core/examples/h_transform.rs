//! Removing the linear drift with `ζ` and mapping the solution back.

use cbve::cumulant::{drift_removing_zeta, h_transform, solve_cumulant, transformed_residual, SolveOptions};
use cbve::environment::EnvironmentSpec;

fn main() -> cbve::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/compound_poisson_atom.json");
    let env = EnvironmentSpec::from_path(path)?;
    let t = 1.0;
    let zeta = drift_removing_zeta(&env, t)?;
    let lambda_prime = 1.0;
    let lambda = (-zeta.value(t)).exp() * lambda_prime;
    let curve = solve_cumulant(&env, t, lambda, &SolveOptions::default())?;
    let u = h_transform(&curve, &zeta)?;
    println!("zeta(t) = {:.6}, solved at lambda = {lambda:.6}", zeta.value(t));
    for i in (0..u.grid.len()).step_by(10) {
        println!("r = {:.2}  v = {:.8}  u = {:.8}", u.grid[i], curve.values[i], u.values[i]);
    }
    println!("residual of the transformed equation: {:.2e}", transformed_residual(&env, &zeta, &u)?);
    Ok(())
}
