//! Two starting points driven by the same noise stay ordered.

use cbve::environment::EnvironmentSpec;
use cbve::simulator::{simulate_coupled, SimConfig};

fn main() -> cbve::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/compound_poisson_atom.json");
    let env = EnvironmentSpec::from_path(path)?;
    let cfg = SimConfig::default().with_paths(2000).with_seed(5).with_t_end(1.0);
    let pair = simulate_coupled(&env, 1.0, 2.0, &cfg)?;
    println!("ordered fraction: {}", pair.ordered_fraction());
    for (lo, hi) in pair.low.paths.iter().zip(&pair.high.paths).take(5) {
        println!("X(1) from 1: {:.4}   from 2: {:.4}", lo.final_value(), hi.final_value());
    }
    Ok(())
}
