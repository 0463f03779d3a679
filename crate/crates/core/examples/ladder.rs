//! Truncating jumps at `k`: the capped cumulants increase with `k`, and the
//! capped paths are ordered in `k`.

use cbve::cumulant::{truncation_ladder, SolveOptions};
use cbve::environment::EnvironmentSpec;
use cbve::simulator::{truncation_ladder_paths, SimConfig};

fn main() -> cbve::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/power_law.json");
    let env = EnvironmentSpec::from_path(path)?;
    let levels = [1.0, 2.0, 4.0, 8.0];
    let ladder = truncation_ladder(&env, 1.0, 1.0, &levels, &SolveOptions::default())?;
    for (k, c) in ladder.levels.iter().zip(&ladder.curves) {
        println!("k = {k}: v_0 = {:.10}", c.values[0]);
    }
    println!("gaps between levels: {:?}", ladder.gaps);

    let cfg = SimConfig::default().with_paths(500).with_seed(9).with_t_end(1.0);
    let paths = truncation_ladder_paths(&env, 1.0, &cfg, &levels)?;
    let broken = paths.violations.iter().filter(|v| v.is_some()).count();
    println!("paths with an order violation across levels: {broken}");
    for (k, e) in paths.levels.iter().zip(&paths.ensembles) {
        let mean = e.final_values().iter().sum::<f64>() / e.paths.len() as f64;
        println!("k = {k}: mean X(1) = {mean:.4}");
    }
    Ok(())
}
