//! Loads environment files and reports admissibility, bottlenecks and
//! moment conditions.

use cbve::environment::EnvironmentSpec;

fn main() -> cbve::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    for name in ["feller", "compound_poisson_atom", "bottleneck", "heavy_tail", "stable"] {
        let env = EnvironmentSpec::from_path(format!("{dir}/{name}.json"))?;
        let r = env.validate();
        println!(
            "{name:<22} admissible={:<5} bottlenecks={:?} first moment={} second moment={}",
            r.admissible, r.bottlenecks, r.first_moment_finite, r.second_moment_finite
        );
        for v in &r.violations {
            println!("  {v}");
        }
    }
    match EnvironmentSpec::from_path(format!("{dir}/malformed.json")) {
        Ok(_) => println!("malformed.json unexpectedly loaded"),
        Err(e) => println!("malformed.json: {e}"),
    }
    Ok(())
}
