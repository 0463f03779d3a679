//! Monotone Picard iteration on a pure-jump environment, checked against
//! the ODE solver.

use cbve::cumulant::{solve_cumulant, solve_cumulant_picard, PicardOptions, SolveOptions};
use cbve::environment::{EnvironmentSpec, LevyMeasureSpec, PiecewiseDensity};

fn main() -> cbve::Result<()> {
    let t = 1.0;
    let env = EnvironmentSpec::feller(0.3, 0.0, t)
        .with_continuous_jumps(
            PiecewiseDensity::constant(0.0, t, 1.0),
            LevyMeasureSpec::finite_atoms(vec![[0.5, 1.0], [2.0, 0.2]]),
        )
        .with_b1_atom(0.5, 0.25);
    let lambda = 1.5;
    let opts = PicardOptions {
        keep_iterates: true,
        ..PicardOptions::default()
    };
    let out = solve_cumulant_picard(&env, t, lambda, &opts)?;
    for (k, it) in out.iterates.iter().enumerate().take(8) {
        println!("iterate {:>2}: v_0 = {:.12}", k + 1, it[0]);
    }
    println!("converged after {} iterations", out.iterations);
    let ode = solve_cumulant(&env, t, lambda, &SolveOptions::default())?;
    println!("picard v_0 = {:.12}", out.curve.values[0]);
    println!("ode    v_0 = {:.12}", ode.values[0]);
    Ok(())
}
