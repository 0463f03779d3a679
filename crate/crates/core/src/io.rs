//! Run manifests and output formats: JSON metadata, CSV tables and a
//! compact binary frame for path ensembles.
//!
//! Binary path frame, all integers and floats little-endian:
//!
//! ```text
//! b"CBVE"          magic
//! u16              format version (1)
//! u32              header length, followed by the header as UTF-8 JSON
//! u64              number of paths
//! per path:
//!   u64            path index
//!   u64            number of records n
//!   f64            explosion time (NaN if none)
//!   f64            time of hitting zero (NaN if none)
//!   n × 3 × f64    records (t, X(t−), X(t))
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cumulant::{solve_piecewise, CumulantCurve, LimitEstimate, SolveOptions};
use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::linops::{lower_bound_from, lower_bound_params, upper_bound_u};
use crate::simulator::PathEnsemble;

pub const BINARY_MAGIC: [u8; 4] = *b"CBVE";
pub const BINARY_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CheckEnv,
    Solve,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Binary,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    /// Environment file, or the suite manifest for `verify`.
    pub input: PathBuf,
    /// Parameters given on the command line.
    pub overrides: BTreeMap<String, serde_json::Value>,
    pub out_dir: Option<PathBuf>,
    pub master_seed: u64,
    pub format: Format,
}

/// Metadata embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub tool: String,
    pub version: String,
    pub manifest: RunManifest,
    /// SHA-256 of the input file's bytes.
    pub input_sha256: String,
}

impl ArtifactHeader {
    pub fn new(manifest: RunManifest) -> Result<Self> {
        let bytes = std::fs::read(&manifest.input)?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            input_sha256: hex::encode(Sha256::digest(&bytes)),
            manifest,
        })
    }
}

#[derive(Serialize)]
struct Document<'a, T> {
    header: &'a ArtifactHeader,
    data: &'a T,
}

/// `{"header": …, "data": …}`, pretty-printed with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(mut w: W, header: &ArtifactHeader, data: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, &Document { header, data })?;
    writeln!(w)?;
    Ok(())
}

fn write_comment_header<W: Write>(w: &mut W, header: &ArtifactHeader) -> Result<()> {
    writeln!(w, "# {}", serde_json::to_string(header)?)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

/// One row of a solved curve table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub lambda: f64,
    pub r: f64,
    pub v: f64,
    pub v_left: f64,
    pub l_bound: Option<f64>,
    pub u_bound: Option<f64>,
}

/// Metadata of one solved curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub lambda: f64,
    pub t: f64,
    pub v0: f64,
    pub residual: f64,
    pub integration_error: f64,
    pub bottleneck: Option<f64>,
    pub atom_times: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// `v_{0,t}(∞)`.
    pub extinction: LimitOutcome,
    /// `v_{0,t}(0+)`.
    pub survival: LimitOutcome,
}

/// A limit estimate, or the error that stopped its ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LimitOutcome {
    Converged(LimitEstimate),
    Failed { error: String },
}

impl From<Result<LimitEstimate>> for LimitOutcome {
    fn from(r: Result<LimitEstimate>) -> Self {
        match r {
            Ok(e) => Self::Converged(e),
            Err(e) => Self::Failed { error: e.to_string() },
        }
    }
}

/// Output of a solve run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTable {
    pub rows: Vec<CurveRow>,
    pub curves: Vec<CurveSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<Limits>,
}

fn summarize(c: &CumulantCurve) -> CurveSummary {
    CurveSummary {
        lambda: c.lambda,
        t: c.t,
        v0: c.values[0],
        residual: c.residual,
        integration_error: c.integration_error,
        bottleneck: c.bottleneck,
        atom_times: c.atom_times.clone(),
        steps: c.steps,
    }
}

/// Solves at each `λ` and tabulates `v`, its left limits and, on request,
/// the bounds `l ≤ v ≤ U` at every grid node.
pub fn solve_table(
    env: &EnvironmentSpec,
    t: f64,
    lambdas: &[f64],
    opts: &SolveOptions,
    bounds: bool,
    limits: bool,
) -> Result<SolveTable> {
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &lambda in lambdas {
        let curve = solve_piecewise(env, t, lambda, opts)?;
        let lower = if bounds { Some(lower_bound_params(env, lambda, t)?) } else { None };
        for (i, &r) in curve.grid.iter().enumerate() {
            let (l_bound, u_bound) = match &lower {
                Some(p) => (Some(lower_bound_from(p, lambda, r, t)), Some(upper_bound_u(env, lambda, r, t)?)),
                None => (None, None),
            };
            rows.push(CurveRow {
                lambda,
                r,
                v: curve.values[i],
                v_left: curve.left_values[i],
                l_bound,
                u_bound,
            });
        }
        curves.push(summarize(&curve));
    }
    let limits = limits.then(|| Limits {
        extinction: crate::cumulant::extinction_exponent(env, t).into(),
        survival: crate::cumulant::survival_exponent(env, t).into(),
    });
    Ok(SolveTable { rows, curves, limits })
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `lambda,r,v,v_left[,l_bound,u_bound]` after a `#` metadata line.
pub fn write_curves_csv<W: Write>(mut w: W, header: &ArtifactHeader, table: &SolveTable) -> Result<()> {
    write_comment_header(&mut w, header)?;
    let bounds = table.rows.iter().any(|r| r.l_bound.is_some());
    let mut out = csv::Writer::from_writer(w);
    let mut cols = vec!["lambda", "r", "v", "v_left"];
    if bounds {
        cols.extend(["l_bound", "u_bound"]);
    }
    out.write_record(&cols).map_err(csv_error)?;
    for row in &table.rows {
        let mut rec = vec![row.lambda.to_string(), row.r.to_string(), row.v.to_string(), row.v_left.to_string()];
        if bounds {
            rec.extend([opt_cell(row.l_bound), opt_cell(row.u_bound)]);
        }
        out.write_record(&rec).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Row flag of a path record.
fn flag(left: f64, x: f64) -> &'static str {
    if x.is_infinite() {
        "exploded"
    } else if x == 0.0 {
        "zero"
    } else if left != x {
        "atom"
    } else {
        ""
    }
}

/// `path_id,t,x,flag` after a `#` metadata line. At an atom a row flagged
/// `left` holds `X(t−)` before the row holding `X(t)`.
pub fn write_paths_csv<W: Write>(mut w: W, header: &ArtifactHeader, ens: &PathEnsemble) -> Result<()> {
    write_comment_header(&mut w, header)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["path_id", "t", "x", "flag"]).map_err(csv_error)?;
    for p in &ens.paths {
        let id = p.index.to_string();
        for i in 0..p.times.len() {
            let t = p.times[i].to_string();
            let (left, x) = (p.left_values[i], p.values[i]);
            if left != x {
                out.write_record([id.as_str(), &t, &left.to_string(), "left"]).map_err(csv_error)?;
            }
            out.write_record([id.as_str(), &t, &x.to_string(), flag(left, x)]).map_err(csv_error)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_paths_binary<W: Write>(mut w: W, header: &ArtifactHeader, ens: &PathEnsemble) -> Result<()> {
    let head = serde_json::to_vec(header)?;
    let head_len = u32::try_from(head.len()).map_err(|_| Error::InvalidArgument("header too large".into()))?;
    w.write_all(&BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&head_len.to_le_bytes())?;
    w.write_all(&head)?;
    w.write_all(&(ens.paths.len() as u64).to_le_bytes())?;
    for p in &ens.paths {
        w.write_all(&(p.index as u64).to_le_bytes())?;
        w.write_all(&(p.times.len() as u64).to_le_bytes())?;
        w.write_all(&p.explosion_time.unwrap_or(f64::NAN).to_le_bytes())?;
        w.write_all(&p.hit_zero_time.unwrap_or(f64::NAN).to_le_bytes())?;
        for i in 0..p.times.len() {
            for x in [p.times[i], p.left_values[i], p.values[i]] {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// A path as stored in the binary frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryPath {
    pub index: u64,
    pub explosion_time: Option<f64>,
    pub hit_zero_time: Option<f64>,
    /// `(t, X(t−), X(t))`.
    pub records: Vec<[f64; 3]>,
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

/// Reads a binary frame back into its header and paths.
pub fn read_paths_binary<R: Read>(mut r: R) -> Result<(ArtifactHeader, Vec<BinaryPath>)> {
    if read_array::<4, _>(&mut r)? != BINARY_MAGIC {
        return Err(Error::InvalidArgument("not a CBVE path frame".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != BINARY_VERSION {
        return Err(Error::InvalidArgument(format!("unsupported frame version {version}")));
    }
    let len = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let mut head = vec![0u8; len];
    r.read_exact(&mut head)?;
    let header: ArtifactHeader = serde_json::from_slice(&head)?;
    let n = read_u64(&mut r)?;
    let mut paths = Vec::new();
    let some = |x: f64| (!x.is_nan()).then_some(x);
    for _ in 0..n {
        let index = read_u64(&mut r)?;
        let count = read_u64(&mut r)?;
        let explosion_time = some(read_f64(&mut r)?);
        let hit_zero_time = some(read_f64(&mut r)?);
        let records = (0..count)
            .map(|_| Ok([read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?]))
            .collect::<Result<_>>()?;
        paths.push(BinaryPath {
            index,
            explosion_time,
            hit_zero_time,
            records,
        });
    }
    Ok((header, paths))
}

/// Creates `dir` and returns the path of `name` inside it.
pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}
