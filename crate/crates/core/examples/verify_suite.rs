//! Runs a verification suite from a manifest and prints the summary table.

use std::path::Path;

use cbve::verify::{run_suite, summary_table, SuiteManifest};

fn main() -> cbve::Result<()> {
    let path = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/suites/trivial.json"));
    let suite = SuiteManifest::from_path(path)?;
    let reports = run_suite(&suite, path.parent().unwrap())?;
    print!("{}", summary_table(&reports));
    let passed = reports.iter().filter(|r| r.passed()).count();
    println!("{passed}/{} checks passed", reports.len());
    Ok(())
}
