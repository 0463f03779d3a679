//! Simulates an ensemble and compares its empirical Laplace transform with
//! `exp(−x v_{0,t}(λ))`.

use cbve::cumulant::solve_value;
use cbve::environment::EnvironmentSpec;
use cbve::simulator::{simulate, SimConfig};

fn main() -> cbve::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/power_law.json");
    let env = EnvironmentSpec::from_path(path)?;
    let (x0, t) = (1.0, 1.0);
    let cfg = SimConfig::default().with_paths(20_000).with_seed(3).with_t_end(t);
    let ens = simulate(&env, x0, &cfg)?;
    let finals = ens.final_values();
    for lambda in [0.5, 1.0, 2.0] {
        let emp = finals.iter().map(|x| (-lambda * x).exp()).sum::<f64>() / finals.len() as f64;
        let exact = (-x0 * solve_value(&env, 0.0, t, lambda, None)?).exp();
        println!("lambda = {lambda}: empirical {emp:.5}, solver {exact:.5}");
    }
    let s = ens.summary();
    println!("mean curve: {:?}", s.mean_curve.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>());
    println!("extinct {:.4}, clamp rate {:.2e}", s.extinction_fraction, s.clamp_rate);
    Ok(())
}
