//! `cbve`: command-line front end. All numerics live in the `cbve` library;
//! this binary parses arguments, loads files and writes artifacts.
//!
//! Exit status: 0 on success, 1 on a domain or verification failure, 2 on
//! bad input.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cbve::cumulant::SolveOptions;
use cbve::environment::EnvironmentSpec;
use cbve::io::{
    output_path, solve_table, write_curves_csv, write_json, write_paths_binary, write_paths_csv, ArtifactHeader,
    Command, Format, RunManifest,
};
use cbve::simulator::{simulate, SimConfig};
use cbve::verify::{run_suite, summary_table, SuiteManifest};
use cbve::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cbve", version, about = "Cumulant solver and path simulator for branching processes in varying environments")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate an environment file and list its bottlenecks.
    CheckEnv(CheckEnvArgs),
    /// Solve the backward equation for v_{r,t}(λ).
    Solve(SolveArgs),
    /// Simulate sample paths.
    Simulate(SimulateArgs),
    /// Run a verification suite described by a manifest.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CheckEnvArgs {
    /// Environment JSON file.
    env: PathBuf,
    /// Times at which to report the latest bottleneck.
    #[arg(long = "t")]
    times: Vec<f64>,
    /// Exit with status 1 unless the environment is admissible.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Environment JSON file.
    env: PathBuf,
    /// Terminal time t.
    #[arg(long = "t")]
    t: f64,
    /// Comma-separated arguments λ.
    #[arg(long = "lambda", value_delimiter = ',', required = true)]
    lambdas: Vec<f64>,
    /// Largest spacing between output nodes.
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    /// Add the lower and upper bound columns l and U.
    #[arg(long)]
    bounds: bool,
    /// Add the extinction and survival exponents v(∞), v(0+).
    #[arg(long)]
    limits: bool,
    /// csv (curves to stdout or solve.csv, metadata to solve.json) or json.
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Output directory; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Environment JSON file.
    env: PathBuf,
    /// Initial value X(0).
    #[arg(long)]
    x0: f64,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    /// Base time step.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// End time; the environment horizon when absent.
    #[arg(long)]
    t_end: Option<f64>,
    /// Cap on jump sizes.
    #[arg(long)]
    k_cap: Option<f64>,
    /// Small-jump threshold of the continuous jump part.
    #[arg(long)]
    eps_small: Option<f64>,
    /// Explosion threshold.
    #[arg(long, default_value_t = 1e9)]
    x_explode: f64,
    /// Evenly spaced observation times stored per path.
    #[arg(long, default_value_t = 10)]
    observations: usize,
    /// Format of the paths file.
    #[arg(long, value_enum, default_value_t = OutFormat::Binary)]
    format: OutFormat,
    /// Output directory for paths and summary; summary to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite manifest JSON file.
    manifest: PathBuf,
    /// Output directory for report.json and summary.txt; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
    Binary,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
            OutFormat::Binary => Format::Binary,
        }
    }
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_input_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn domain(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type Outcome = Result<(), Failure>;

fn manifest(
    command: Command,
    input: &Path,
    overrides: serde_json::Value,
    out: &Option<PathBuf>,
    seed: u64,
    format: Format,
) -> Result<ArtifactHeader, Failure> {
    let overrides: BTreeMap<String, serde_json::Value> = match overrides {
        serde_json::Value::Object(m) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    Ok(ArtifactHeader::new(RunManifest {
        command,
        input: input.to_path_buf(),
        overrides,
        out_dir: out.clone(),
        master_seed: seed,
        format,
    })?)
}

/// Opens `dir/name`, or stdout when no directory is given.
fn sink(dir: &Option<PathBuf>, name: &str) -> Result<Box<dyn Write>, Failure> {
    Ok(match dir {
        Some(d) => Box::new(BufWriter::new(File::create(output_path(d, name)?)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn check_env(a: &CheckEnvArgs) -> Outcome {
    let env = EnvironmentSpec::from_path(&a.env)?;
    let header = manifest(
        Command::CheckEnv,
        &a.env,
        json!({ "t": a.times, "strict": a.strict }),
        &None,
        0,
        Format::Json,
    )?;
    let report = env.validate();
    let latest: Vec<_> = a
        .times
        .iter()
        .map(|&t| json!({ "t": t, "latest_bottleneck": report.last_bottleneck(t) }))
        .collect();
    let data = json!({ "report": report, "latest_bottleneck": latest, "env_hash": env.content_hash() });
    write_json(std::io::stdout().lock(), &header, &data)?;
    if a.strict && !report.admissible {
        return Err(domain(format!(
            "environment is not admissible (bottlenecks {:?}; {})",
            report.bottlenecks,
            report.violations.join("; ")
        )));
    }
    Ok(())
}

fn solve(a: &SolveArgs) -> Outcome {
    let env = EnvironmentSpec::from_path(&a.env)?;
    let overrides = json!({
        "t": a.t, "lambda": a.lambdas, "grid_step": a.grid_step, "bounds": a.bounds, "limits": a.limits,
    });
    let header = manifest(Command::Solve, &a.env, overrides, &a.out, 0, a.format.into())?;
    let opts = SolveOptions::default().with_grid_step(a.grid_step);
    let table = solve_table(&env, a.t, &a.lambdas, &opts, a.bounds, a.limits)?;
    match a.format {
        OutFormat::Csv => {
            write_curves_csv(sink(&a.out, "solve.csv")?, &header, &table)?;
            if a.out.is_some() {
                let meta = json!({ "curves": table.curves, "limits": table.limits, "env_hash": env.content_hash() });
                write_json(sink(&a.out, "solve.json")?, &header, &meta)?;
            }
        }
        OutFormat::Json => write_json(sink(&a.out, "solve.json")?, &header, &table)?,
        OutFormat::Binary => return Err(Error::InvalidArgument("solve writes csv or json".into()).into()),
    }
    Ok(())
}

fn simulate_cmd(a: &SimulateArgs) -> Outcome {
    let env = EnvironmentSpec::from_path(&a.env)?;
    let cfg = SimConfig {
        dt: a.dt,
        eps_small: a.eps_small,
        k_cap: a.k_cap,
        x_explode: a.x_explode,
        n_paths: a.paths,
        master_seed: a.seed,
        t_end: a.t_end,
        observations: a.observations,
        ..SimConfig::default()
    };
    let overrides = json!({ "x0": a.x0, "config": cfg });
    let header = manifest(Command::Simulate, &a.env, overrides, &a.out, a.seed, a.format.into())?;
    let ens = simulate(&env, a.x0, &cfg)?;
    let summary = json!({ "env_hash": ens.env_hash, "summary": ens.summary() });
    write_json(sink(&a.out, "summary.json")?, &header, &summary)?;
    if a.out.is_some() {
        match a.format {
            OutFormat::Csv => write_paths_csv(sink(&a.out, "paths.csv")?, &header, &ens)?,
            OutFormat::Json => write_json(sink(&a.out, "paths.json")?, &header, &ens)?,
            OutFormat::Binary => write_paths_binary(sink(&a.out, "paths.bin")?, &header, &ens)?,
        }
    }
    Ok(())
}

fn verify(a: &VerifyArgs) -> Outcome {
    let suite = SuiteManifest::from_path(&a.manifest)?;
    let header = manifest(
        Command::Verify,
        &a.manifest,
        json!({ "suite": suite.name }),
        &a.out,
        suite.master_seed,
        Format::Json,
    )?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let start = Instant::now();
    let reports = run_suite(&suite, base)?;
    let table = summary_table(&reports);
    write_json(sink(&a.out, "report.json")?, &header, &reports)?;
    match &a.out {
        Some(_) => {
            sink(&a.out, "summary.txt")?.write_all(table.as_bytes())?;
            print!("{table}");
        }
        None => eprint!("{table}"),
    }
    eprintln!("{} checks in {:.1} s", reports.len(), start.elapsed().as_secs_f64());
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(domain(format!("{failed} of {} checks did not pass", reports.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Cmd::CheckEnv(a) => check_env(a),
        Cmd::Solve(a) => solve(a),
        Cmd::Simulate(a) => simulate_cmd(a),
        Cmd::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
