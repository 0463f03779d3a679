//! Sample paths of the branching SDE driven by the environment, with exact
//! bottleneck and trap semantics, explosion detection and coupled runs.

mod scheme;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::jumplaw::AtomJumpLaw;
use scheme::{step, CellPlan, StepFlags, MAX_ARRIVALS};

/// Largest number of halvings of a step under heavy jump intensity.
const MAX_HALVINGS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Base time step.
    pub dt: f64,
    /// Threshold below which jumps of the continuous part are replaced by
    /// drift and diffusion; `None` uses `1e-2 × z_scale` per measure.
    pub eps_small: Option<f64>,
    /// Same for the jump laws at atoms; `None` uses `1e-3 × z_scale`.
    pub eps_atom: Option<f64>,
    /// Large-jump cap `k`; `None` leaves jumps uncapped.
    pub k_cap: Option<f64>,
    /// A path reaching this level is declared exploded.
    pub x_explode: f64,
    /// Lower levels whose first crossing times are reported.
    pub thresholds: Vec<f64>,
    pub n_paths: usize,
    pub master_seed: u64,
    /// End of the simulation; the environment horizon when `None`.
    pub t_end: Option<f64>,
    /// Number of evenly spaced observation times in `(0, t_end]`.
    pub observations: usize,
    /// Store every step instead of only atoms and observation times.
    pub store_steps: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            eps_small: None,
            eps_atom: None,
            k_cap: None,
            x_explode: 1e9,
            thresholds: vec![1e3, 1e6],
            n_paths: 1000,
            master_seed: 0,
            t_end: None,
            observations: 10,
            store_steps: false,
        }
    }
}

impl SimConfig {
    pub fn with_paths(mut self, n: usize) -> Self {
        self.n_paths = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_t_end(mut self, t: f64) -> Self {
        self.t_end = Some(t);
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.x_explode > 0.0) {
            return Err(Error::InvalidArgument("x_explode must be positive".into()));
        }
        if self.k_cap.is_some_and(|k| !(k >= 1.0)) {
            return Err(Error::InvalidArgument("k_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub index: usize,
    /// RNG stream of the path under the ensemble's master seed.
    pub stream: u64,
    pub times: Vec<f64>,
    /// `X(t)`.
    pub values: Vec<f64>,
    /// `X(t−)`; differs from `values` only at atoms.
    pub left_values: Vec<f64>,
    pub explosion_time: Option<f64>,
    pub hit_zero_time: Option<f64>,
    /// First crossing time of each configured threshold.
    pub threshold_times: Vec<Option<f64>>,
    /// Negative states set to zero by the Gaussian small-jump substitution.
    pub clamps: usize,
    pub steps: usize,
    /// First time a jump exceeded the cap.
    pub first_capped_jump: Option<f64>,
}

impl PathRecord {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("paths record t = 0")
    }

    /// `X(t)` at a recorded time.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.times.iter().rposition(|&s| s == t).map(|i| self.values[i])
    }

    pub fn exploded(&self) -> bool {
        self.explosion_time.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub env_hash: String,
    pub config: SimConfig,
    pub x0: f64,
    pub t_end: f64,
    pub k_cap: Option<f64>,
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub t_end: f64,
    pub observation_times: Vec<f64>,
    /// Mean over paths that have not exploded by each observation time.
    pub mean_curve: Vec<f64>,
    pub mean_stderr: Vec<f64>,
    pub extinction_fraction: f64,
    pub explosion_fraction: f64,
    /// Fraction of paths crossing each configured threshold.
    pub threshold_fractions: Vec<f64>,
    pub clamps: usize,
    pub steps: usize,
    pub clamp_rate: f64,
}

impl PathEnsemble {
    pub fn final_values(&self) -> Vec<f64> {
        self.paths.iter().map(PathRecord::final_value).collect()
    }

    pub fn summary(&self) -> EnsembleSummary {
        let n = self.paths.len();
        let obs = observation_times(self.t_end, self.config.observations);
        let mut mean_curve = Vec::new();
        let mut mean_stderr = Vec::new();
        for &t in &obs {
            let xs: Vec<f64> = self
                .paths
                .iter()
                .filter_map(|p| p.value_at(t))
                .filter(|x| x.is_finite())
                .collect();
            let k = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / k;
            let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1.0).max(1.0);
            mean_curve.push(m);
            mean_stderr.push((var / k).sqrt());
        }
        let frac = |pred: &dyn Fn(&PathRecord) -> bool| {
            if n == 0 {
                0.0
            } else {
                self.paths.iter().filter(|p| pred(p)).count() as f64 / n as f64
            }
        };
        let clamps = self.paths.iter().map(|p| p.clamps).sum();
        let steps: usize = self.paths.iter().map(|p| p.steps).sum();
        EnsembleSummary {
            n_paths: n,
            t_end: self.t_end,
            observation_times: obs,
            mean_curve,
            mean_stderr,
            extinction_fraction: frac(&|p| p.final_value() == 0.0),
            explosion_fraction: frac(&|p| p.exploded()),
            threshold_fractions: (0..self.config.thresholds.len())
                .map(|j| frac(&|p| p.threshold_times[j].is_some()))
                .collect(),
            clamps,
            steps,
            clamp_rate: if steps == 0 { 0.0 } else { clamps as f64 / steps as f64 },
        }
    }
}

fn observation_times(t_end: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| if i == n { t_end } else { t_end * i as f64 / n as f64 }).collect()
}

/// Everything about a run that does not depend on the path.
struct Plan {
    cells: Vec<CellPlan>,
    /// Jump law at each cell's right end, if it is an atom.
    atoms: Vec<Option<AtomJumpLaw>>,
    observe: Vec<f64>,
    t_end: f64,
}

impl Plan {
    fn new(env: &EnvironmentSpec, cfg: &SimConfig, cap: f64) -> Result<Self> {
        cfg.check()?;
        env.check()?;
        let t_end = cfg.t_end.unwrap_or(env.horizon);
        env.check_time(t_end)?;
        let report = env.validate_until(t_end);
        if !report.weakly_admissible {
            return Err(Error::WeaklyMalformed(report.violations.join("; ")));
        }
        let observe = observation_times(t_end, cfg.observations);
        let mut nodes = env.breakpoints(0.0, t_end);
        nodes.extend(observe.iter().copied());
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let events = env.atom_events(0.0, t_end);
        let mut cells = Vec::new();
        let mut atoms = Vec::new();
        for w in nodes.windows(2) {
            cells.push(CellPlan::new(env, w[0], w[1], cfg.eps_small, cap)?);
            atoms.push(match events.iter().find(|e| e.time == w[1]) {
                Some(e) => Some(AtomJumpLaw::from_event(e, cfg.eps_atom)?),
                None => None,
            });
        }
        Ok(Self {
            cells,
            atoms,
            observe,
            t_end,
        })
    }
}

/// State of several coupled members along one noise realization.
struct Run<'a> {
    cfg: &'a SimConfig,
    xs: Vec<f64>,
    records: Vec<PathRecord>,
    /// First time the declared ordering `xs[0] ≤ xs[1] ≤ …` failed.
    violation: Option<f64>,
}

impl Run<'_> {
    fn record(&mut self, t: f64, left: Option<&[f64]>) {
        for (i, r) in self.records.iter_mut().enumerate() {
            r.times.push(t);
            r.values.push(self.xs[i]);
            r.left_values.push(left.map_or(self.xs[i], |l| l[i]));
        }
    }

    /// Applies traps and threshold bookkeeping at time `t`.
    fn settle(&mut self, t: f64) {
        for (x, r) in self.xs.iter_mut().zip(self.records.iter_mut()) {
            for (j, &level) in self.cfg.thresholds.iter().enumerate() {
                if r.threshold_times[j].is_none() && *x >= level {
                    r.threshold_times[j] = Some(t);
                }
            }
            if *x >= self.cfg.x_explode && r.explosion_time.is_none() {
                r.explosion_time = Some(t);
                *x = f64::INFINITY;
            }
            if *x == 0.0 && r.hit_zero_time.is_none() {
                r.hit_zero_time = Some(t);
            }
        }
        if self.violation.is_none() && self.xs.windows(2).any(|w| w[0] > w[1]) {
            self.violation = Some(t);
        }
    }
}

fn run_members(plan: &Plan, cfg: &SimConfig, x0s: &[f64], caps: &[f64], index: usize) -> (Vec<PathRecord>, Option<f64>) {
    let stream = index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    rng.set_stream(stream);
    let blank = PathRecord {
        index,
        stream,
        times: Vec::new(),
        values: Vec::new(),
        left_values: Vec::new(),
        explosion_time: None,
        hit_zero_time: None,
        threshold_times: vec![None; cfg.thresholds.len()],
        clamps: 0,
        steps: 0,
        first_capped_jump: None,
    };
    let mut run = Run {
        cfg,
        xs: x0s.to_vec(),
        records: vec![blank; x0s.len()],
        violation: None,
    };
    run.settle(0.0);
    run.record(0.0, None);
    let mut flags = vec![StepFlags::default(); x0s.len()];
    for (cell, atom) in plan.cells.iter().zip(&plan.atoms) {
        let len = cell.t1 - cell.t0;
        let n = (len / cfg.dt).ceil().max(1.0) as usize;
        let h = len / n as f64;
        for k in 0..n {
            let alive = run.xs.iter().any(|x| x.is_finite() && *x > 0.0);
            let x_max = run.xs.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
            // Halve while the large-jump intensity per step exceeds 0.1.
            let mut sub = 1u32;
            while x_max * cell.big_rate * h / f64::from(1u32 << sub.saturating_sub(1).min(31)) > 0.1
                && sub <= MAX_HALVINGS
            {
                sub += 1;
            }
            let m = 1usize << (sub - 1);
            let hs = h / m as f64;
            for j in 0..m {
                if alive {
                    step(cell, &mut run.xs, caps, hs, MAX_ARRIVALS / m as f64, &mut rng, &mut flags);
                    for r in run.records.iter_mut() {
                        r.steps += 1;
                    }
                }
                let t = if k + 1 == n && j + 1 == m {
                    cell.t1
                } else {
                    cell.t0 + h * k as f64 + hs * (j + 1) as f64
                };
                for (f, r) in flags.iter_mut().zip(run.records.iter_mut()) {
                    if f.capped && r.first_capped_jump.is_none() {
                        r.first_capped_jump = Some(t);
                    }
                    *f = StepFlags::default();
                }
                run.settle(t);
                if cfg.store_steps && t < cell.t1 {
                    run.record(t, None);
                }
            }
        }
        let t = cell.t1;
        match atom {
            Some(law) => {
                let left = run.xs.clone();
                let draws = law.sample_coupled(&left, caps, &mut rng);
                for ((x, d), r) in run.xs.iter_mut().zip(&draws).zip(run.records.iter_mut()) {
                    *x += d.delta;
                    if d.clamped {
                        r.clamps += 1;
                    }
                }
                run.settle(t);
                run.record(t, Some(&left));
            }
            None => {
                if cfg.store_steps || plan.observe.contains(&t) {
                    run.record(t, None);
                }
            }
        }
    }
    (run.records, run.violation)
}

fn ensemble(env: &EnvironmentSpec, cfg: &SimConfig, plan: &Plan, x0: f64, cap: Option<f64>, paths: Vec<PathRecord>) -> PathEnsemble {
    PathEnsemble {
        env_hash: env.content_hash(),
        config: cfg.clone(),
        x0,
        t_end: plan.t_end,
        k_cap: cap,
        paths,
    }
}

fn check_x0(x0: f64) -> Result<()> {
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::InvalidArgument(format!("x0 must be finite and nonnegative, got {x0}")));
    }
    Ok(())
}

/// Simulates `cfg.n_paths` independent paths from `x0`. Path `i` uses RNG
/// stream `i` under `cfg.master_seed`, so results do not depend on
/// scheduling.
pub fn simulate(env: &EnvironmentSpec, x0: f64, cfg: &SimConfig) -> Result<PathEnsemble> {
    check_x0(x0)?;
    let cap = cfg.k_cap.unwrap_or(f64::INFINITY);
    let plan = Plan::new(env, cfg, cap)?;
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| run_members(&plan, cfg, &[x0], &[cap], i).0.remove(0))
        .collect();
    Ok(ensemble(env, cfg, &plan, x0, cfg.k_cap, paths))
}

/// Pairs of paths from `x0_low ≤ x0_high` driven by one noise realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledEnsemble {
    pub low: PathEnsemble,
    pub high: PathEnsemble,
    /// Per pair, the first time `X_low > X_high`, if any.
    pub violations: Vec<Option<f64>>,
}

impl CoupledEnsemble {
    /// Fraction of pairs ordered at every grid time.
    pub fn ordered_fraction(&self) -> f64 {
        let n = self.violations.len();
        if n == 0 {
            return 1.0;
        }
        self.violations.iter().filter(|v| v.is_none()).count() as f64 / n as f64
    }

    /// Ordering violations on pairs without clamping events.
    pub fn unexcused_violations(&self) -> Vec<(usize, f64)> {
        self.violations
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                let clamped = self.low.paths[i].clamps + self.high.paths[i].clamps > 0;
                v.filter(|_| !clamped).map(|t| (i, t))
            })
            .collect()
    }
}

/// Coupled simulation that records, rather than rejects, ordering failures.
pub fn simulate_coupled_unchecked(
    env: &EnvironmentSpec,
    x0_low: f64,
    x0_high: f64,
    cfg: &SimConfig,
) -> Result<CoupledEnsemble> {
    check_x0(x0_low)?;
    check_x0(x0_high)?;
    if x0_low > x0_high {
        return Err(Error::InvalidArgument(format!("need x0_low <= x0_high, got {x0_low} > {x0_high}")));
    }
    let cap = cfg.k_cap.unwrap_or(f64::INFINITY);
    let plan = Plan::new(env, cfg, cap)?;
    let runs: Vec<(Vec<PathRecord>, Option<f64>)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| run_members(&plan, cfg, &[x0_low, x0_high], &[cap, cap], i))
        .collect();
    let mut low = Vec::with_capacity(runs.len());
    let mut high = Vec::with_capacity(runs.len());
    let mut violations = Vec::with_capacity(runs.len());
    for (mut recs, v) in runs {
        high.push(recs.pop().expect("two members"));
        low.push(recs.pop().expect("two members"));
        violations.push(v);
    }
    Ok(CoupledEnsemble {
        low: ensemble(env, cfg, &plan, x0_low, cfg.k_cap, low),
        high: ensemble(env, cfg, &plan, x0_high, cfg.k_cap, high),
        violations,
    })
}

/// Coupled simulation; fails with `ComparisonViolated` when a pair without
/// clamping events loses its ordering.
pub fn simulate_coupled(env: &EnvironmentSpec, x0_low: f64, x0_high: f64, cfg: &SimConfig) -> Result<CoupledEnsemble> {
    let out = simulate_coupled_unchecked(env, x0_low, x0_high, cfg)?;
    if let Some(&(path, time)) = out.unexcused_violations().first() {
        return Err(Error::ComparisonViolated { path, time });
    }
    Ok(out)
}

/// Ensembles with jumps capped at each level `k` (sorted ascending), all
/// driven by the same noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEnsembles {
    pub levels: Vec<f64>,
    pub ensembles: Vec<PathEnsemble>,
    /// Per path, the first time some level fell above the next one.
    pub violations: Vec<Option<f64>>,
}

pub fn truncation_ladder_paths(env: &EnvironmentSpec, x0: f64, cfg: &SimConfig, levels: &[f64]) -> Result<LadderEnsembles> {
    check_x0(x0)?;
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    if levels.first().is_some_and(|&k| !(k >= 1.0)) {
        return Err(Error::InvalidArgument("truncation levels must be at least 1".into()));
    }
    let top = levels.last().copied().unwrap_or(f64::INFINITY);
    let plan = Plan::new(env, cfg, top)?;
    let x0s = vec![x0; levels.len()];
    let runs: Vec<(Vec<PathRecord>, Option<f64>)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| run_members(&plan, cfg, &x0s, &levels, i))
        .collect();
    let mut per_level: Vec<Vec<PathRecord>> = vec![Vec::with_capacity(runs.len()); levels.len()];
    let mut violations = Vec::with_capacity(runs.len());
    for (recs, v) in runs {
        for (slot, r) in per_level.iter_mut().zip(recs) {
            slot.push(r);
        }
        violations.push(v);
    }
    let ensembles = per_level
        .into_iter()
        .zip(&levels)
        .map(|(paths, &k)| ensemble(env, cfg, &plan, x0, Some(k), paths))
        .collect();
    Ok(LadderEnsembles {
        levels,
        ensembles,
        violations,
    })
}
