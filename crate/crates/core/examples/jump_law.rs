//! Sampling the fixed-time jump at an environment atom and comparing its
//! Laplace transform with `exp((λ − v_{t−,t}(λ)) x)`.

use cbve::environment::LevyMeasureSpec;
use cbve::jumplaw::{jump_laplace_target, AtomJumpLaw};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cbve::Result<()> {
    let nu = LevyMeasureSpec::finite_atoms(vec![[0.4, 0.5], [1.5, 0.2]]);
    let law = AtomJumpLaw::new(0.5, 0.2, Some(nu), None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = 1.0;
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| law.sample_jump(x, &mut rng).delta).collect();
    for lambda in [0.5, 1.0, 2.0] {
        let emp = draws.iter().map(|d| (-lambda * d).exp()).sum::<f64>() / n as f64;
        println!("lambda = {lambda}: empirical {emp:.5}, exact {:.5}", jump_laplace_target(&law, x, lambda)?);
    }
    Ok(())
}
