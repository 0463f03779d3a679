//! The explicit bounds `l ≤ v ≤ U` along a solved curve, for an environment
//! with continuous jumps and time atoms.

use cbve::cumulant::{solve_cumulant, SolveOptions};
use cbve::environment::EnvironmentSpec;
use cbve::linops::{lower_bound_l, upper_bound_u};

fn main() -> cbve::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/compound_poisson_atom.json");
    let env = EnvironmentSpec::from_path(path)?;
    let (t, lambda) = (1.0, 2.0);
    let curve = solve_cumulant(&env, t, lambda, &SolveOptions::default().with_grid_step(0.1))?;
    println!("{:>6} {:>12} {:>12} {:>12}", "r", "l", "v", "U");
    for (&r, &v) in curve.grid.iter().zip(&curve.values) {
        let l = lower_bound_l(&env, lambda, r, t)?;
        let u = upper_bound_u(&env, lambda, r, t)?;
        println!("{r:>6.3} {l:>12.6} {v:>12.6} {u:>12.6}");
    }
    Ok(())
}
