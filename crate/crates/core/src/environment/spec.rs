use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bv::{BvFunction, DiffusionClock, PiecewiseDensity};
use super::measure::{Kernel, LevyMeasureSpec};
use crate::error::{Error, Result};

/// Slack used when comparing atom budgets against 1.
const ADMISSIBILITY_SLACK: f64 = 1e-12;

/// `σ(s) ds ν(dz)` term of the continuous part of `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousTerm {
    pub sigma: PiecewiseDensity,
    pub measure: LevyMeasureSpec,
}

/// `m({t}, dz) = ν(dz)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeAtom {
    pub t: f64,
    pub measure: LevyMeasureSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpMeasure {
    #[serde(default)]
    pub continuous: Vec<ContinuousTerm>,
    #[serde(default)]
    pub atoms: Vec<TimeAtom>,
}

/// The parameter triple `(b₁, c, m)` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    #[serde(default)]
    pub b1: BvFunction,
    #[serde(default)]
    pub c: DiffusionClock,
    #[serde(default)]
    pub m: JumpMeasure,
    pub horizon: f64,
}

/// A fixed discontinuity of the environment: merged `b₁` and `m` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEvent {
    pub time: f64,
    pub delta_b1: f64,
    /// `m({time}, ·)`; `None` when `m` has no atom here.
    pub measure: Option<LevyMeasureSpec>,
}

impl AtomEvent {
    pub fn measure_is_null(&self) -> bool {
        self.measure.as_ref().is_none_or(LevyMeasureSpec::is_null)
    }

    /// `Δb₁ + ∫₀¹ z ν(dz)`, infinite when the small-jump mean diverges.
    pub fn budget(&self) -> f64 {
        let small = match &self.measure {
            Some(nu) => nu.atom_integral(Kernel::SmallZ, 0.0).unwrap_or(f64::INFINITY),
            None => 0.0,
        };
        self.delta_b1 + small
    }

    pub fn is_bottleneck(&self) -> bool {
        self.delta_b1 == 1.0 && self.measure_is_null()
    }
}

/// Interval between consecutive breakpoints on which every density is
/// constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub t0: f64,
    pub t1: f64,
    pub b1: f64,
    pub c: f64,
    /// `(σ, index into m.continuous)` for the active jump terms.
    pub jumps: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub weakly_admissible: bool,
    pub admissible: bool,
    pub bottlenecks: Vec<f64>,
    /// `∫∫ (z ∧ z²) m(ds, dz) < ∞` on the horizon.
    pub first_moment_finite: bool,
    /// `∫∫ z² m(ds, dz) < ∞` on the horizon.
    pub second_moment_finite: bool,
    pub violations: Vec<String>,
}

impl AdmissibilityReport {
    /// Latest bottleneck at or before `t`.
    pub fn last_bottleneck(&self, t: f64) -> Option<f64> {
        self.bottlenecks.iter().copied().rev().find(|&s| s <= t)
    }
}

impl EnvironmentSpec {
    /// The zero environment on `[0, horizon]`.
    pub fn zero(horizon: f64) -> Self {
        Self {
            b1: BvFunction::zero(),
            c: DiffusionClock::zero(),
            m: JumpMeasure::default(),
            horizon,
        }
    }

    /// Constant drift density `b` and diffusion rate `c` on the horizon.
    pub fn feller(b: f64, c: f64, horizon: f64) -> Self {
        Self {
            b1: BvFunction::constant_density(horizon, b),
            c: DiffusionClock::constant(horizon, c),
            m: JumpMeasure::default(),
            horizon,
        }
    }

    pub fn with_continuous_jumps(mut self, sigma: PiecewiseDensity, measure: LevyMeasureSpec) -> Self {
        self.m.continuous.push(ContinuousTerm { sigma, measure });
        self
    }

    pub fn with_b1_atom(mut self, t: f64, jump: f64) -> Self {
        self.b1 = self.b1.with_atom(t, jump);
        self
    }

    pub fn with_measure_atom(mut self, t: f64, measure: LevyMeasureSpec) -> Self {
        let pos = self.m.atoms.partition_point(|a| a.t < t);
        self.m.atoms.insert(pos, TimeAtom { t, measure });
        self
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let env: Self = serde_json::from_str(s).map_err(|e| Error::MalformedSpec(e.to_string()))?;
        env.check()?;
        Ok(env)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("environment serializes")
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("environment serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Structural checks: ordering, signs, horizon containment. Failures are
    /// input errors, not inadmissibility.
    pub fn check(&self) -> Result<()> {
        let h = self.horizon;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::MalformedSpec(format!("horizon must be positive, got {h}")));
        }
        self.b1.check("b1")?;
        self.c.density.check("c")?;
        self.c.density.check_nonnegative("c")?;
        for (i, term) in self.m.continuous.iter().enumerate() {
            let what = format!("m.continuous[{i}].sigma");
            term.sigma.check(&what)?;
            term.sigma.check_nonnegative(&what)?;
            term.measure.check()?;
        }
        let mut prev = 0.0;
        for a in &self.m.atoms {
            if !(a.t > prev) || !a.t.is_finite() {
                return Err(Error::MalformedSpec(format!(
                    "m.atoms: times must be positive and strictly increasing (at {})",
                    a.t
                )));
            }
            prev = a.t;
            a.measure.check()?;
        }
        let beyond = |t: f64| t > h * (1.0 + 1e-12);
        let mut times: Vec<f64> = self.b1.atoms.iter().map(|a| a[0]).collect();
        times.extend(self.m.atoms.iter().map(|a| a.t));
        if let Some(t) = times.into_iter().find(|&t| beyond(t)) {
            return Err(Error::MalformedSpec(format!("atom at {t} lies beyond horizon {h}")));
        }
        Ok(())
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// `(b₁(t), b₁(t−), ‖b₁‖(t))`.
    pub fn eval_b1(&self, t: f64) -> Result<(f64, f64, f64)> {
        self.check_time(t)?;
        Ok((self.b1.value(t), self.b1.left_limit(t), self.b1.total_variation(t)))
    }

    /// All fixed discontinuities in `(r, t]`, sorted by time.
    pub fn atom_events(&self, r: f64, t: f64) -> Vec<AtomEvent> {
        let mut out: Vec<AtomEvent> = self
            .b1
            .atoms_in(r, t)
            .map(|a| AtomEvent {
                time: a[0],
                delta_b1: a[1],
                measure: None,
            })
            .collect();
        for a in self.m.atoms.iter().filter(|a| a.t > r && a.t <= t) {
            match out.iter_mut().find(|e| e.time == a.t) {
                Some(e) => e.measure = Some(a.measure.clone()),
                None => out.push(AtomEvent {
                    time: a.t,
                    delta_b1: 0.0,
                    measure: Some(a.measure.clone()),
                }),
            }
        }
        out.sort_by(|x, y| x.time.total_cmp(&y.time));
        out
    }

    /// Sorted distinct breakpoints in `[r, t]`, including both ends.
    pub fn breakpoints(&self, r: f64, t: f64) -> Vec<f64> {
        let mut pts = vec![r, t];
        pts.extend(self.b1.breakpoints());
        pts.extend(self.c.density.breakpoints());
        for term in &self.m.continuous {
            pts.extend(term.sigma.breakpoints());
        }
        pts.extend(self.m.atoms.iter().map(|a| a.t));
        pts.retain(|&p| p >= r && p <= t);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Constant-coefficient cells partitioning `[r, t]`.
    pub fn cells(&self, r: f64, t: f64) -> Vec<Cell> {
        self.breakpoints(r, t)
            .windows(2)
            .map(|w| self.cell(w[0], w[1]))
            .collect()
    }

    pub fn cell(&self, t0: f64, t1: f64) -> Cell {
        let jumps = self
            .m
            .continuous
            .iter()
            .enumerate()
            .map(|(i, term)| (term.sigma.value_on(t0, t1), i))
            .filter(|(s, _)| *s > 0.0)
            .collect();
        Cell {
            t0,
            t1,
            b1: self.b1.density.value_on(t0, t1),
            c: self.c.density.value_on(t0, t1),
            jumps,
        }
    }

    /// `m((r, t] × (1, ∞))`.
    pub fn large_jump_mass(&self, r: f64, t: f64) -> Result<f64> {
        let mut total = 0.0;
        for term in &self.m.continuous {
            let w = term.sigma.integral(r, t);
            if w > 0.0 {
                total += w * term.measure.mass(1.0, f64::INFINITY)?;
            }
        }
        for a in self.m.atoms.iter().filter(|a| a.t > r && a.t <= t) {
            total += a.measure.mass(1.0, f64::INFINITY)?;
        }
        if !total.is_finite() {
            return Err(Error::InfiniteLargeJumpMass);
        }
        Ok(total)
    }

    /// The drift `b` with `∫∫_{z>1} z m` removed: `b = b₁ − ∫₀ᵗ∫₁^∞ z m(ds,dz)`.
    pub fn mean_drift(&self, t: f64) -> Result<BvFunction> {
        let first = |nu: &LevyMeasureSpec| {
            nu.moment(1, 1.0, f64::INFINITY).map_err(|_| Error::FirstMomentInfinite {
                horizon: t,
            })
        };
        let mut segments = Vec::new();
        for cell in self.cells(0.0, t) {
            let mut d = cell.b1;
            for &(sigma, i) in &cell.jumps {
                d -= sigma * first(&self.m.continuous[i].measure)?;
            }
            if d != 0.0 {
                segments.push([cell.t0, cell.t1, d]);
            }
        }
        let mut atoms = Vec::new();
        for e in self.atom_events(0.0, t) {
            let mut jump = e.delta_b1;
            if let Some(nu) = &e.measure {
                jump -= first(nu)?;
            }
            atoms.push([e.time, jump]);
        }
        Ok(BvFunction {
            density: PiecewiseDensity::new(segments)?,
            atoms,
        })
    }

    /// Admissibility audit on `(0, horizon]`.
    pub fn validate(&self) -> AdmissibilityReport {
        self.validate_until(self.horizon)
    }

    /// Admissibility audit restricted to `(0, t]`.
    pub fn validate_until(&self, t: f64) -> AdmissibilityReport {
        let mut violations = Vec::new();
        let mut bottlenecks = Vec::new();
        for e in self.atom_events(0.0, t) {
            let budget = e.budget();
            if budget > 1.0 + ADMISSIBILITY_SLACK {
                violations.push(format!(
                    "atom at t = {}: delta_b1 + int_0^1 z m = {} exceeds 1",
                    e.time, budget
                ));
            }
            if e.is_bottleneck() {
                bottlenecks.push(e.time);
            }
        }
        let mut first_moment_finite = true;
        let mut second_moment_finite = true;
        let mut charged = |nu: &LevyMeasureSpec| {
            if nu.moment(1, 1.0, f64::INFINITY).is_err() {
                first_moment_finite = false;
            }
            if nu.moment(2, 0.0, f64::INFINITY).is_err() {
                second_moment_finite = false;
            }
        };
        for term in &self.m.continuous {
            if term.sigma.integral(0.0, t) > 0.0 {
                charged(&term.measure);
            }
        }
        for a in self.m.atoms.iter().filter(|a| a.t <= t) {
            charged(&a.measure);
        }
        let weakly_admissible = violations.is_empty();
        AdmissibilityReport {
            weakly_admissible,
            admissible: weakly_admissible && bottlenecks.is_empty(),
            bottlenecks,
            first_moment_finite,
            second_moment_finite,
            violations,
        }
    }
}
