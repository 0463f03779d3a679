#![allow(dead_code)]

use std::path::PathBuf;

use cbve::environment::{EnvironmentSpec, LevyMeasureSpec, PiecewiseDensity};
use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> EnvironmentSpec {
    EnvironmentSpec::from_path(fixture_path(&format!("{name}.json"))).expect("fixture loads")
}

/// Fixtures with `∫∫ (z ∧ z²) m < ∞`.
pub const FIRST_MOMENT_FIXTURES: [&str; 7] = [
    "pure_drift",
    "feller",
    "feller_critical",
    "compound_poisson_atom",
    "power_law",
    "stable",
    "bottleneck",
];

/// A random admissible environment on `[0, 1]`: Feller part, optionally a
/// finite or power-law continuous jump term, and up to two time atoms.
pub fn random_env<R: Rng>(rng: &mut R) -> EnvironmentSpec {
    loop {
        let env = draw_env(rng);
        if env.check().is_ok() && env.validate().admissible {
            return env;
        }
    }
}

fn draw_env<R: Rng>(rng: &mut R) -> EnvironmentSpec {
    let b = rng.random_range(-1.0..1.5);
    let c = if rng.random_bool(0.8) { rng.random_range(0.0..1.0) } else { 0.0 };
    let mut env = EnvironmentSpec::feller(b, c, 1.0);
    match rng.random_range(0..3) {
        0 => {}
        1 => {
            let atoms = (0..rng.random_range(1..4))
                .map(|_| [rng.random_range(0.05..3.0), rng.random_range(0.1..1.5)])
                .collect();
            let sigma = PiecewiseDensity::constant(0.0, 1.0, rng.random_range(0.2..1.5));
            env = env.with_continuous_jumps(sigma, LevyMeasureSpec::finite_atoms(atoms));
        }
        _ => {
            let alpha = rng.random_range(0.3..1.8);
            let nu = LevyMeasureSpec::power_law(rng.random_range(0.05..0.6), alpha, Some(rng.random_range(2.0..20.0)));
            env = env.with_continuous_jumps(PiecewiseDensity::constant(0.0, 1.0, 1.0), nu);
        }
    }
    for _ in 0..rng.random_range(0..3) {
        let s = (rng.random_range(0.05..0.95f64) * 100.0).round() / 100.0;
        if rng.random_bool(0.5) {
            env = env.with_b1_atom(s, rng.random_range(-0.8..0.6));
        } else {
            let nu = LevyMeasureSpec::finite_atoms(vec![[rng.random_range(0.1..0.6), 0.4], [rng.random_range(1.0..4.0), 0.3]]);
            env = env.with_measure_atom(s, nu);
        }
    }
    env
}
