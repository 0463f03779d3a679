//! Solvers for the backward cumulant equation and its consequences:
//! truncation, Picard iteration, semigroup composition, `λ → 0` and
//! `λ → ∞` limits, and the h-transform.

mod curve;
mod limits;
mod picard;
mod profile;
mod solver;
mod transform;

pub use curve::CumulantCurve;
pub use limits::{extinction_exponent, survival_exponent, LimitEstimate};
pub use picard::{solve_cumulant_picard, PicardOptions, PicardOutcome};
pub use solver::{
    solve_between, solve_cumulant, solve_many, solve_piecewise, solve_truncated, solve_value,
    truncation_ladder, SolveOptions, TruncationLadder,
};
pub use profile::{compose, log_grid, LambdaProfile};
pub use transform::{
    drift_removing_zeta, h_transform, transformed_linear_terms, transformed_residual, TransformedLinearTerms, Zeta,
};
