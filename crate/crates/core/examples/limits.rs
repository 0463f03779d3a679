//! Extinction and survival exponents `v(∞)` and `v(0+)`, and what they say
//! about `P(X(t) = 0)` and `P(X(t) < ∞)`.

use cbve::cumulant::{extinction_exponent, survival_exponent};
use cbve::environment::EnvironmentSpec;

fn main() -> cbve::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let (x0, t) = (1.0, 1.0);
    for name in ["feller_critical", "feller", "bottleneck", "heavy_tail"] {
        let env = EnvironmentSpec::from_path(format!("{dir}/{name}.json"))?;
        println!("{name}");
        match extinction_exponent(&env, t) {
            Ok(e) => println!("  v(inf) = {:.8} (+/- {:.1e}), P(X=0) = {:.6}", e.value, e.error, (-x0 * e.value).exp()),
            Err(e) => println!("  v(inf): {e}"),
        }
        match survival_exponent(&env, t) {
            Ok(s) => println!("  v(0+)  = {:.8}, P(explosion) = {:.6}", s.value, -(-x0 * s.value).exp_m1()),
            Err(e) => println!("  v(0+): {e}"),
        }
    }
    Ok(())
}
