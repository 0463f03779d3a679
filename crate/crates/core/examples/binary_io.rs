//! Writes an ensemble as a binary path frame and reads it back.

use std::collections::BTreeMap;

use cbve::environment::EnvironmentSpec;
use cbve::io::{read_paths_binary, write_paths_binary, ArtifactHeader, Command, Format, RunManifest};
use cbve::simulator::{simulate, SimConfig};

fn main() -> cbve::Result<()> {
    let input = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/compound_poisson_atom.json");
    let env = EnvironmentSpec::from_path(input)?;
    let cfg = SimConfig::default().with_paths(4).with_seed(1);
    let ens = simulate(&env, 1.0, &cfg)?;
    let header = ArtifactHeader::new(RunManifest {
        command: Command::Simulate,
        input: input.into(),
        overrides: BTreeMap::new(),
        out_dir: None,
        master_seed: 1,
        format: Format::Binary,
    })?;
    let mut bytes = Vec::new();
    write_paths_binary(&mut bytes, &header, &ens)?;
    println!("{} bytes for {} paths", bytes.len(), ens.paths.len());
    let (back, paths) = read_paths_binary(bytes.as_slice())?;
    println!("input sha256 {}", back.input_sha256);
    for p in &paths {
        let last = p.records.last().unwrap();
        println!("path {}: {} records, X({}) = {:.5}", p.index, p.records.len(), last[0], last[2]);
    }
    Ok(())
}
