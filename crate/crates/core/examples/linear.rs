//! Closed-form solution of the linear backward equation with a BV
//! coefficient, and the residual against its integral form.

use cbve::environment::{BvFunction, PiecewiseDensity};
use cbve::linops::{linear_backward_rhs, solve_linear_backward, LinearCoefficient};

fn main() -> cbve::Result<()> {
    let alpha = BvFunction::new(
        PiecewiseDensity::new(vec![[0.0, 0.5, -0.8], [0.5, 1.0, 0.4]])?,
        vec![[0.3, -0.5], [0.7, 0.25]],
    )?;
    let coef = LinearCoefficient::new(alpha)?;
    for r in [0.0, 0.25, 0.5, 0.75] {
        let pi = solve_linear_backward(&coef, 1.0, r, 1.0)?;
        let rhs = linear_backward_rhs(&coef, 1.0, r, 1.0, 64)?;
        println!("r = {r}: pi = {pi:.10}, residual = {:.1e}", (pi - rhs).abs());
    }
    Ok(())
}
