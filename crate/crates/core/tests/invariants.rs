//! Structural invariants of the solver and the simulator on random
//! environments.

mod common;

use cbve::cumulant::{solve_between, solve_cumulant, SolveOptions};
use cbve::environment::{EnvironmentSpec, LevyMeasureSpec};
use cbve::jumplaw::AtomJumpLaw;
use cbve::linops::{lower_bound_l, upper_bound_u};
use cbve::simulator::{simulate_coupled, SimConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn env_from(seed: u64) -> EnvironmentSpec {
    common::random_env(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn coarse() -> SolveOptions {
    SolveOptions::default().with_grid_step(0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solution_lies_between_bounds(seed in any::<u64>(), lambda in 0.05f64..20.0) {
        let env = env_from(seed);
        let curve = solve_cumulant(&env, 1.0, lambda, &coarse()).unwrap();
        for (&r, &v) in curve.grid.iter().zip(&curve.values) {
            let l = lower_bound_l(&env, lambda, r, 1.0).unwrap();
            let u = upper_bound_u(&env, lambda, r, 1.0).unwrap();
            let slack = 1e-9 * u;
            prop_assert!(l <= v + slack && v <= u + slack, "r={} l={} v={} U={}", r, l, v, u);
        }
    }

    #[test]
    fn solution_increases_with_lambda(seed in any::<u64>(), lambda in 0.05f64..10.0, factor in 1.01f64..5.0) {
        let env = env_from(seed);
        let lo = solve_cumulant(&env, 1.0, lambda, &coarse()).unwrap();
        let hi = solve_cumulant(&env, 1.0, lambda * factor, &coarse()).unwrap();
        for (a, b) in lo.values.iter().zip(&hi.values) {
            prop_assert!(a <= b, "{} > {}", a, b);
        }
    }

    #[test]
    fn flow_composes(seed in any::<u64>(), lambda in 0.05f64..10.0, r in 0.0f64..0.9, w in 0.05f64..0.95) {
        let env = env_from(seed);
        let s = r + w * (1.0 - r);
        let opts = SolveOptions::endpoint();
        let outer = solve_between(&env, s, 1.0, lambda, &opts).unwrap();
        let inner = solve_between(&env, r, s, outer.values[0], &opts).unwrap();
        let direct = solve_between(&env, r, 1.0, lambda, &opts).unwrap();
        let (a, b) = (inner.values[0], direct.values[0]);
        prop_assert!((a - b).abs() <= 1e-7 * b.max(1e-3), "{} vs {}", a, b);
    }

    #[test]
    fn coupled_paths_stay_ordered(seed in any::<u64>(), x in 0.0f64..3.0, gap in 0.0f64..2.0) {
        let env = env_from(seed);
        let cfg = SimConfig::default().with_paths(20).with_seed(seed).with_t_end(1.0);
        let pair = simulate_coupled(&env, x, x + gap, &cfg).unwrap();
        prop_assert_eq!(pair.ordered_fraction(), 1.0);
    }

    #[test]
    fn atom_jumps_preserve_order(seed in any::<u64>(), db in 0.0f64..0.6, xs in prop::collection::vec(0.0f64..5.0, 2..6)) {
        let nu = LevyMeasureSpec::finite_atoms(vec![[0.3, 0.5], [2.0, 0.4]]);
        let law = AtomJumpLaw::new(0.5, db, Some(nu), None).unwrap();
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = law.sample_coupled(&xs, &vec![f64::INFINITY; xs.len()], &mut rng);
        let post: Vec<f64> = xs.iter().zip(&draws).map(|(x, d)| x + d.delta).collect();
        prop_assert!(post.windows(2).all(|p| p[0] <= p[1]), "{:?} -> {:?}", xs, post);
        prop_assert!(post.iter().all(|&y| y >= 0.0));
    }
}
