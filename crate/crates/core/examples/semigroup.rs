//! The flow property `v_{r,t}(λ) = v_{r,s}(v_{s,t}(λ))` through a tabulated
//! λ-profile of `v_{r,s}`.

use cbve::cumulant::{compose, log_grid, solve_value, LambdaProfile, SolveOptions};
use cbve::environment::EnvironmentSpec;

fn main() -> cbve::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/power_law.json");
    let env = EnvironmentSpec::from_path(path)?;
    let (r, s, t) = (0.0, 0.4, 1.0);
    let profile = LambdaProfile::solve(&env, r, s, &log_grid(1e-3, 1e2, 120), &SolveOptions::default())?;
    for lambda in [0.1, 1.0, 10.0] {
        let inner = solve_value(&env, s, t, lambda, None)?;
        let composed = compose(&profile, inner)?;
        let direct = solve_value(&env, r, t, lambda, None)?;
        println!(
            "lambda = {lambda:>5}: direct {direct:.10}  composed {composed:.10}  bound {:.1e}",
            profile.error_bound(inner)?
        );
    }
    Ok(())
}
