//! Statistical cross-checks of simulated paths against the cumulant solver
//! and closed forms.
//!
//! Every statistical comparison passes when `|estimate − target|` is at most
//! `sigmas × SE` plus the deterministic error of the target. Exploded paths
//! contribute `e^{−λ∞} = 0` to Laplace estimators.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulant::{extinction_exponent, solve_piecewise, solve_truncated, survival_exponent, SolveOptions};
use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::jumplaw::{jump_laplace_target, AtomJumpLaw};
use crate::linops::mean_factor;
use crate::simulator::{simulate, simulate_coupled_unchecked, SimConfig};

/// Relative slack for floating-point rounding in exact comparisons.
const ROUNDING: f64 = 64.0 * f64::EPSILON;
/// Seed offset of the second, independent ensemble in the branching check.
const SECOND_ENSEMBLE_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    /// Numerical solution of the cumulant or linear equation.
    Solver,
    /// Closed form of the jump law.
    Analytic,
    /// Known exactly (for instance, the ordering of coupled paths).
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// The target could not be computed (for instance, a divergent limit).
    Inconclusive,
}

/// One compared quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub label: String,
    pub estimate: f64,
    pub target: f64,
    pub source: TargetSource,
    /// `None` for deterministic estimates.
    pub std_error: Option<f64>,
    /// Sample size behind the estimate.
    pub n: usize,
    /// Deterministic error bound of the target.
    pub target_error: f64,
    pub sigmas: f64,
    /// Items outside the scope of a guarantee are reported but not asserted.
    pub asserted: bool,
    pub passed: bool,
}

impl CheckItem {
    fn new(label: impl Into<String>, estimate: f64, target: f64, source: TargetSource, sigmas: f64) -> Self {
        let mut item = Self {
            label: label.into(),
            estimate,
            target,
            source,
            std_error: None,
            n: 1,
            target_error: 0.0,
            sigmas,
            asserted: true,
            passed: false,
        };
        item.passed = item.evaluate();
        item
    }

    fn with_stats(mut self, se: f64, n: usize) -> Self {
        self.std_error = Some(se);
        self.n = n;
        self.passed = self.evaluate();
        self
    }

    fn with_target_error(mut self, e: f64) -> Self {
        self.target_error = e;
        self.passed = self.evaluate();
        self
    }

    fn advisory(mut self) -> Self {
        self.asserted = false;
        self.passed = self.evaluate();
        self
    }

    /// `sigmas × SE + target_error`, plus rounding slack.
    pub fn tolerance(&self) -> f64 {
        self.sigmas * self.std_error.unwrap_or(0.0)
            + self.target_error
            + ROUNDING * self.target.abs().max(self.estimate.abs())
    }

    /// The pass rule, recomputed from the recorded numbers.
    pub fn evaluate(&self) -> bool {
        !self.asserted || (self.estimate - self.target).abs() <= self.tolerance()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub env_hash: String,
    /// Echo of the check parameters and the simulator configuration.
    pub config: serde_json::Value,
    pub items: Vec<CheckItem>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Wall-clock time; left out of reproducible artifacts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_secs: Option<f64>,
}

impl VerificationReport {
    fn new(check: &str, env: &EnvironmentSpec, config: serde_json::Value, items: Vec<CheckItem>) -> Self {
        let mut r = Self {
            check: check.into(),
            env_hash: env.content_hash(),
            config,
            items,
            outcome: Outcome::Fail,
            note: None,
            runtime_secs: None,
        };
        r.outcome = r.evaluate();
        r
    }

    fn inconclusive(check: &str, env: &EnvironmentSpec, config: serde_json::Value, note: String) -> Self {
        Self {
            check: check.into(),
            env_hash: env.content_hash(),
            config,
            items: Vec::new(),
            outcome: Outcome::Inconclusive,
            note: Some(note),
            runtime_secs: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    /// The outcome implied by the items.
    pub fn evaluate(&self) -> Outcome {
        if self.outcome == Outcome::Inconclusive {
            Outcome::Inconclusive
        } else if self.items.iter().all(CheckItem::evaluate) {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    /// Replaces every target by `target` and re-applies the pass rule.
    pub fn override_target(&mut self, target: f64) {
        for item in &mut self.items {
            item.target = target;
            item.passed = item.evaluate();
        }
        self.outcome = self.evaluate();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Simulator settings; `n_paths` and `master_seed` are taken from here.
    pub sim: SimConfig,
    /// Solver settings for targets.
    pub solve: SolveOptions,
    pub sigmas: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            solve: SolveOptions::default(),
            sigmas: 3.0,
        }
    }
}

impl VerifyOptions {
    pub fn with_paths(mut self, n: usize) -> Self {
        self.sim.n_paths = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.master_seed = seed;
        self
    }
}

/// Neumaier-compensated sum, so that identical samples average exactly.
fn sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0_f64, 0.0_f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

/// Sample mean and standard error.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let m = sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = sum(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `e^{−λx}` with `e^{−λ∞} = 0`.
fn laplace(lambda: f64, x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-lambda * x).exp()
    }
}

/// Bound on `|e^{−x v'} − e^{−x v}|` for `|v' − v| ≤ err`.
fn exp_error(x: f64, v: f64, err: f64) -> f64 {
    (-x * (v - err).max(0.0)).exp() - (-x * v).exp()
}

fn echo<T: Serialize>(params: T, opts: &VerifyOptions) -> serde_json::Value {
    serde_json::json!({ "params": params, "options": opts })
}

/// `v_{0,t}(λ)` and its error bound for the configured (possibly capped)
/// equation.
fn target_exponent(env: &EnvironmentSpec, t: f64, lambda: f64, opts: &VerifyOptions) -> Result<(f64, f64)> {
    let curve = match opts.sim.k_cap {
        Some(k) => solve_truncated(env, t, lambda, k, &opts.solve)?,
        None => solve_piecewise(env, t, lambda, &opts.solve)?,
    };
    Ok((curve.values[0], curve.error_bound()))
}

fn uncapped(opts: &VerifyOptions, t: f64) -> SimConfig {
    SimConfig {
        k_cap: None,
        ..opts.sim.clone().with_t_end(t)
    }
}

/// Empirical `E e^{−λ X(t)}` against `e^{−x0 v_{0,t}(λ)}` for each `λ`.
pub fn check_laplace(
    env: &EnvironmentSpec,
    x0: f64,
    t: f64,
    lambdas: &[f64],
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let ens = simulate(env, x0, &opts.sim.clone().with_t_end(t))?;
    let finals = ens.final_values();
    let mut items = Vec::new();
    for &lambda in lambdas {
        let (v, err) = target_exponent(env, t, lambda, opts)?;
        let samples: Vec<f64> = finals.iter().map(|&x| laplace(lambda, x)).collect();
        let (m, se) = mean_se(&samples);
        items.push(
            CheckItem::new(format!("lambda={lambda}"), m, (-x0 * v).exp(), TargetSource::Solver, opts.sigmas)
                .with_stats(se, samples.len())
                .with_target_error(exp_error(x0, v, err)),
        );
    }
    let params = serde_json::json!({ "x0": x0, "t": t, "lambdas": lambdas });
    Ok(VerificationReport::new("laplace", env, echo(params, opts), items))
}

/// Ensemble mean of `X(t)` against `x0 π_{0,t}(1)`.
pub fn check_mean(env: &EnvironmentSpec, x0: f64, t: f64, opts: &VerifyOptions) -> Result<VerificationReport> {
    if !env.validate_until(t).first_moment_finite {
        return Err(Error::FirstMomentInfinite { horizon: t });
    }
    let target = x0 * mean_factor(env, 0.0, t)?;
    let ens = simulate(env, x0, &uncapped(opts, t))?;
    let (m, se) = mean_se(&ens.final_values());
    let item = CheckItem::new("mean", m, target, TargetSource::Solver, opts.sigmas).with_stats(se, ens.paths.len());
    let params = serde_json::json!({ "x0": x0, "t": t });
    Ok(VerificationReport::new("mean", env, echo(params, opts), vec![item]))
}

/// Binomial standard error of a fraction under the target probability.
fn binomial_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

fn fraction(n: usize, of: usize) -> f64 {
    if of == 0 {
        0.0
    } else {
        n as f64 / of as f64
    }
}

/// Fraction of paths with `X(t) = 0` against `e^{−x0 v_{0,t}(∞)}`.
pub fn check_extinction(env: &EnvironmentSpec, x0: f64, t: f64, opts: &VerifyOptions) -> Result<VerificationReport> {
    let params = serde_json::json!({ "x0": x0, "t": t });
    let limit = match extinction_exponent(env, t) {
        Ok(l) => l,
        Err(e @ Error::NoConvergenceBelowCap { .. }) => {
            return Ok(VerificationReport::inconclusive("extinction", env, echo(params, opts), e.to_string()));
        }
        Err(e) => return Err(e),
    };
    let target = if limit.value.is_infinite() { 0.0 } else { (-x0 * limit.value).exp() };
    let ens = simulate(env, x0, &uncapped(opts, t))?;
    let n = ens.paths.len();
    let zeros = ens.paths.iter().filter(|p| p.final_value() == 0.0).count();
    let err = if limit.value.is_infinite() { 0.0 } else { exp_error(x0, limit.value, limit.error) };
    let item = CheckItem::new("P(X(t)=0)", fraction(zeros, n), target, TargetSource::Solver, opts.sigmas)
        .with_stats(binomial_se(target, n), n)
        .with_target_error(err);
    Ok(VerificationReport::new("extinction", env, echo(params, opts), vec![item]))
}

/// Explosion fraction against `1 − e^{−x0 v_{0,t}(0+)}`. Crossing fractions
/// at the lower thresholds are reported alongside, unasserted.
pub fn check_conservative(env: &EnvironmentSpec, x0: f64, t: f64, opts: &VerifyOptions) -> Result<VerificationReport> {
    let limit = survival_exponent(env, t)?;
    let target = -(-x0 * limit.value).exp_m1();
    let err = exp_error(x0, limit.value, limit.error);
    let cfg = uncapped(opts, t);
    let ens = simulate(env, x0, &cfg)?;
    let n = ens.paths.len();
    let exploded = ens.paths.iter().filter(|p| p.exploded()).count();
    let mut items = vec![CheckItem::new(
        format!("P(X(t)>={:e})", cfg.x_explode),
        fraction(exploded, n),
        target,
        TargetSource::Solver,
        opts.sigmas,
    )
    .with_stats(binomial_se(target, n), n)
    .with_target_error(err)];
    for (j, level) in cfg.thresholds.iter().enumerate() {
        let hit = ens.paths.iter().filter(|p| p.threshold_times[j].is_some()).count();
        items.push(
            CheckItem::new(format!("P(sup X>={level:e})"), fraction(hit, n), target, TargetSource::Solver, opts.sigmas)
                .with_stats(binomial_se(target, n), n)
                .advisory(),
        );
    }
    let params = serde_json::json!({ "x0": x0, "t": t });
    Ok(VerificationReport::new("conservative", env, echo(params, opts), items))
}

/// `E e^{−λ(X(t) + Y(t))}` for independent copies from `x` and `y` against
/// `e^{−(x+y) v_{0,t}(λ)}`.
pub fn check_branching(
    env: &EnvironmentSpec,
    x: f64,
    y: f64,
    t: f64,
    lambda: f64,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let cfg = opts.sim.clone().with_t_end(t);
    let ex = simulate(env, x, &cfg)?;
    let seed = cfg.master_seed.wrapping_add(SECOND_ENSEMBLE_SEED);
    let ey = simulate(env, y, &cfg.clone().with_seed(seed))?;
    let samples: Vec<f64> = ex
        .final_values()
        .iter()
        .zip(ey.final_values())
        .map(|(&a, b)| laplace(lambda, a) * laplace(lambda, b))
        .collect();
    let (m, se) = mean_se(&samples);
    let (v, err) = target_exponent(env, t, lambda, opts)?;
    let item = CheckItem::new(format!("lambda={lambda}"), m, (-(x + y) * v).exp(), TargetSource::Solver, opts.sigmas)
        .with_stats(se, samples.len())
        .with_target_error(exp_error(x + y, v, err));
    let params = serde_json::json!({ "x": x, "y": y, "t": t, "lambda": lambda });
    Ok(VerificationReport::new("branching", env, echo(params, opts), vec![item]))
}

/// Fraction of coupled pairs that stay ordered at every grid time. Pairs
/// with clamping events are excluded; environments without finite second
/// moments are reported but not asserted.
pub fn check_comparison(
    env: &EnvironmentSpec,
    x0_low: f64,
    x0_high: f64,
    t: f64,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let out = simulate_coupled_unchecked(env, x0_low, x0_high, &opts.sim.clone().with_t_end(t))?;
    let n = out.violations.len();
    let clamped = (0..n)
        .filter(|&i| out.low.paths[i].clamps + out.high.paths[i].clamps > 0)
        .count();
    let bad = out.unexcused_violations().len();
    let counted = n - clamped;
    let mut item = CheckItem::new(
        "ordered fraction",
        1.0 - fraction(bad, counted),
        1.0,
        TargetSource::Exact,
        opts.sigmas,
    );
    item.n = counted;
    if !env.validate_until(t).second_moment_finite {
        item = item.advisory();
    }
    let params = serde_json::json!({ "x0_low": x0_low, "x0_high": x0_high, "t": t });
    let mut report = VerificationReport::new("comparison", env, echo(params, opts), vec![item]);
    if clamped > 0 {
        report.note = Some(format!("{clamped} pairs with clamping events excluded"));
    }
    Ok(report)
}

/// Empirical `E e^{−λ ΔX}` of the jump at the atom `atom_time`, started
/// from `X(t−) = x`, against `e^{(λ − v_{t−,t}(λ)) x}`. The Gaussian
/// substitution of small jumps enters the target error.
pub fn check_jump_law(
    env: &EnvironmentSpec,
    atom_time: f64,
    x: f64,
    lambdas: &[f64],
    n_samples: usize,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let event = env
        .atom_events(0.0, env.horizon)
        .into_iter()
        .find(|e| e.time == atom_time)
        .ok_or_else(|| Error::InvalidArgument(format!("no environment atom at t = {atom_time}")))?;
    let law = AtomJumpLaw::from_event(&event, opts.sim.eps_atom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.sim.master_seed);
    let jumps: Vec<f64> = (0..n_samples).map(|_| law.sample_jump(x, &mut rng).delta).collect();
    let mut items = Vec::new();
    for &lambda in lambdas {
        let target = jump_laplace_target(&law, x, lambda)?;
        // Cumulants of order ≥ 3 of the replaced jumps.
        let gauss = law.gaussian_error_scale(x)? * lambda.powi(3) / 6.0 * (lambda * law.eps).exp();
        let samples: Vec<f64> = jumps.iter().map(|&d| (-lambda * d).exp()).collect();
        let (m, se) = mean_se(&samples);
        items.push(
            CheckItem::new(format!("lambda={lambda}"), m, target, TargetSource::Analytic, opts.sigmas)
                .with_stats(se, n_samples)
                .with_target_error(target * gauss.exp_m1()),
        );
    }
    let params = serde_json::json!({ "atom_time": atom_time, "x": x, "lambdas": lambdas, "n_samples": n_samples });
    Ok(VerificationReport::new("jump_law", env, echo(params, opts), items))
}

/// A check with its parameters, as listed in a suite manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Laplace { x0: f64, t: f64, lambdas: Vec<f64> },
    Mean { x0: f64, t: f64 },
    Extinction { x0: f64, t: f64 },
    Conservative { x0: f64, t: f64 },
    Branching { x: f64, y: f64, t: f64, lambda: f64 },
    Comparison { x0_low: f64, x0_high: f64, t: f64 },
    JumpLaw { atom_time: f64, x: f64, lambdas: Vec<f64>, n_samples: usize },
}

impl CheckSpec {
    pub fn run(&self, env: &EnvironmentSpec, opts: &VerifyOptions) -> Result<VerificationReport> {
        match self {
            CheckSpec::Laplace { x0, t, lambdas } => check_laplace(env, *x0, *t, lambdas, opts),
            CheckSpec::Mean { x0, t } => check_mean(env, *x0, *t, opts),
            CheckSpec::Extinction { x0, t } => check_extinction(env, *x0, *t, opts),
            CheckSpec::Conservative { x0, t } => check_conservative(env, *x0, *t, opts),
            CheckSpec::Branching { x, y, t, lambda } => check_branching(env, *x, *y, *t, *lambda, opts),
            CheckSpec::Comparison { x0_low, x0_high, t } => check_comparison(env, *x0_low, *x0_high, *t, opts),
            CheckSpec::JumpLaw {
                atom_time,
                x,
                lambdas,
                n_samples,
            } => check_jump_law(env, *atom_time, *x, lambdas, *n_samples, opts),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::Laplace { .. } => "laplace",
            CheckSpec::Mean { .. } => "mean",
            CheckSpec::Extinction { .. } => "extinction",
            CheckSpec::Conservative { .. } => "conservative",
            CheckSpec::Branching { .. } => "branching",
            CheckSpec::Comparison { .. } => "comparison",
            CheckSpec::JumpLaw { .. } => "jump_law",
        }
    }
}

/// One entry of a suite: an environment file, a check and optional
/// overrides of the suite defaults. Unknown fields are ignored: serde cannot
/// reject them through the flattened check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    /// Environment file, relative to the manifest.
    pub env: PathBuf,
    #[serde(flatten)]
    pub check: CheckSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_cap: Option<f64>,
    /// Replaces the computed target; used to exercise the failure path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub name: String,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_suite_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub options: Option<VerifyOptions>,
    pub checks: Vec<SuiteEntry>,
}

fn default_suite_paths() -> usize {
    10_000
}

impl SuiteManifest {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Runs every entry of a suite, concurrently. Entry `i` uses seed
/// `master_seed + i`. Missing or malformed environment files are input
/// errors; failures inside a check become failing reports.
pub fn run_suite(manifest: &SuiteManifest, base_dir: &Path) -> Result<Vec<VerificationReport>> {
    let envs: Vec<EnvironmentSpec> = manifest
        .checks
        .iter()
        .map(|e| EnvironmentSpec::from_path(base_dir.join(&e.env)))
        .collect::<Result<_>>()?;
    let base = manifest.options.clone().unwrap_or_default();
    let reports = manifest
        .checks
        .par_iter()
        .zip(envs.par_iter())
        .enumerate()
        .map(|(i, (entry, env))| {
            let mut opts = base.clone().with_paths(entry.n_paths.unwrap_or(manifest.n_paths));
            opts.sim.master_seed = manifest.master_seed.wrapping_add(i as u64);
            if let Some(dt) = entry.dt {
                opts.sim.dt = dt;
            }
            if entry.k_cap.is_some() {
                opts.sim.k_cap = entry.k_cap;
            }
            let mut report = entry.check.run(env, &opts).unwrap_or_else(|e| {
                let outcome = if matches!(e, Error::NoConvergenceBelowCap { .. }) {
                    Outcome::Inconclusive
                } else {
                    Outcome::Fail
                };
                VerificationReport {
                    check: entry.check.name().into(),
                    env_hash: env.content_hash(),
                    config: echo(&entry.check, &opts),
                    items: Vec::new(),
                    outcome,
                    note: Some(e.to_string()),
                    runtime_secs: None,
                }
            });
            if let Some(t) = entry.target_override {
                report.override_target(t);
            }
            report
        })
        .collect();
    Ok(reports)
}

/// Fixed-width table with one row per compared item.
pub fn summary_table(reports: &[VerificationReport]) -> String {
    let mut out = format!(
        "{:<14} {:<22} {:>14} {:>14} {:>11} {:>11}  {}\n",
        "check", "item", "estimate", "target", "|diff|", "tol", "result"
    );
    for r in reports {
        if r.items.is_empty() {
            out += &format!(
                "{:<14} {:<22} {:>14} {:>14} {:>11} {:>11}  {:?}\n",
                r.check, "-", "-", "-", "-", "-", r.outcome
            );
        }
        for it in &r.items {
            let verdict = match (it.asserted, it.passed) {
                (false, _) => "advisory",
                (true, true) => "pass",
                (true, false) => "FAIL",
            };
            out += &format!(
                "{:<14} {:<22} {:>14.8} {:>14.8} {:>11.3e} {:>11.3e}  {}\n",
                r.check,
                it.label,
                it.estimate,
                it.target,
                (it.estimate - it.target).abs(),
                it.tolerance(),
                verdict
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{LevyMeasureSpec, PiecewiseDensity};

    fn opts(n: usize) -> VerifyOptions {
        VerifyOptions::default().with_paths(n).with_seed(3)
    }

    #[test]
    fn zero_environment_is_exact() {
        let env = EnvironmentSpec::zero(1.0);
        let r = check_laplace(&env, 1.5, 1.0, &[0.5, 2.0], &opts(50)).unwrap();
        assert!(r.passed(), "{r:?}");
        for it in &r.items {
            assert!(it.std_error.unwrap() < 1e-15);
        }
        assert!(check_mean(&env, 1.5, 1.0, &opts(50)).unwrap().passed());
        assert!(check_conservative(&env, 1.5, 1.0, &opts(50)).unwrap().passed());
    }

    #[test]
    fn feller_laplace_and_branching_pass() {
        let env = EnvironmentSpec::feller(1.0, 0.5, 1.0);
        let o = opts(20_000);
        assert!(check_laplace(&env, 1.0, 1.0, &[1.0], &o).unwrap().passed());
        assert!(check_branching(&env, 1.0, 2.0, 1.0, 0.7, &o).unwrap().passed());
        assert!(check_extinction(&env, 1.0, 1.0, &o).unwrap().passed());
    }

    #[test]
    fn wrong_target_fails() {
        let env = EnvironmentSpec::feller(1.0, 0.5, 1.0);
        let mut r = check_laplace(&env, 1.0, 1.0, &[1.0], &opts(2000)).unwrap();
        r.override_target(0.1);
        assert_eq!(r.outcome, Outcome::Fail);
    }

    #[test]
    fn pure_drift_never_goes_extinct() {
        let env = EnvironmentSpec::feller(0.5, 0.0, 1.0);
        let r = check_extinction(&env, 1.0, 1.0, &opts(100)).unwrap();
        assert!(r.passed());
        assert_eq!(r.items[0].target, 0.0);
    }

    #[test]
    fn jump_law_of_drift_and_bottleneck_atoms() {
        let env = EnvironmentSpec::zero(2.0).with_b1_atom(0.5, 0.3).with_b1_atom(1.0, 1.0);
        let o = opts(0);
        let r = check_jump_law(&env, 0.5, 2.0, &[0.5, 1.0], 100, &o).unwrap();
        assert!(r.passed(), "{r:?}");
        let r = check_jump_law(&env, 1.0, 2.0, &[1.0], 100, &o).unwrap();
        assert!(r.passed());
        assert!((r.items[0].target - 2f64.exp()).abs() < 1e-14);
        assert!(check_jump_law(&env, 0.7, 2.0, &[1.0], 10, &o).is_err());
    }

    #[test]
    fn comparison_outside_second_moments_is_advisory() {
        let env = EnvironmentSpec::zero(1.0).with_continuous_jumps(
            PiecewiseDensity::constant(0.0, 1.0, 1.0),
            LevyMeasureSpec::power_law(0.3, 0.7, None),
        );
        let r = check_comparison(&env, 1.0, 2.0, 1.0, &opts(100)).unwrap();
        assert!(!r.items[0].asserted);
        assert!(r.passed());
    }

    #[test]
    fn reports_round_trip_through_json() {
        let env = EnvironmentSpec::feller(1.0, 0.5, 1.0);
        let r = check_laplace(&env, 1.0, 1.0, &[0.5, 1.0, 2.0], &opts(500)).unwrap();
        let back: VerificationReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.evaluate(), r.outcome);
        for (a, b) in back.items.iter().zip(&r.items) {
            assert_eq!(a.evaluate(), b.passed);
            assert_eq!(a.tolerance().to_bits(), b.tolerance().to_bits());
        }
    }
}
