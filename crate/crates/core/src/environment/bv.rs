use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant density given as `[t0, t1, value]` segments; zero
/// outside the listed segments. Segment `[t0, t1)` carries `value`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PiecewiseDensity {
    segments: Vec<[f64; 3]>,
}

impl PiecewiseDensity {
    pub fn new(segments: Vec<[f64; 3]>) -> Result<Self> {
        let d = Self { segments };
        d.check("density")?;
        Ok(d)
    }

    pub fn constant(t0: f64, t1: f64, value: f64) -> Self {
        Self {
            segments: vec![[t0, t1, value]],
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn segments(&self) -> &[[f64; 3]] {
        &self.segments
    }

    pub fn is_zero(&self) -> bool {
        self.segments.iter().all(|s| s[2] == 0.0)
    }

    pub(crate) fn check(&self, what: &str) -> Result<()> {
        let mut prev_end = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            let [t0, t1, v] = *s;
            if !(t0.is_finite() && t1.is_finite() && v.is_finite()) {
                return Err(Error::MalformedSpec(format!("{what}: non-finite segment {i}")));
            }
            if t0 < 0.0 || t1 <= t0 {
                return Err(Error::MalformedSpec(format!(
                    "{what}: segment {i} [{t0}, {t1}) is empty or starts before 0"
                )));
            }
            if t0 < prev_end {
                return Err(Error::MalformedSpec(format!(
                    "{what}: segment {i} overlaps or is out of order"
                )));
            }
            prev_end = t1;
        }
        Ok(())
    }

    pub(crate) fn check_nonnegative(&self, what: &str) -> Result<()> {
        if let Some(s) = self.segments.iter().find(|s| s[2] < 0.0) {
            return Err(Error::MalformedSpec(format!(
                "{what}: negative density {} on [{}, {})",
                s[2], s[0], s[1]
            )));
        }
        Ok(())
    }

    /// Density value on the segment containing `t` (right-continuous).
    pub fn value_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| s[0] <= t && t < s[1])
            .map_or(0.0, |s| s[2])
    }

    /// Value on the open interval `(a, b)`, assuming no breakpoint inside.
    pub fn value_on(&self, a: f64, b: f64) -> f64 {
        self.value_at(0.5 * (a + b))
    }

    /// `∫_a^b density(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.fold(a, b, |v| v)
    }

    /// `∫_a^b |density(s)| ds`.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        self.fold(a, b, f64::abs)
    }

    fn fold(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.segments
            .iter()
            .map(|s| {
                let lo = s[0].max(a);
                let hi = s[1].min(b);
                if hi > lo {
                    f(s[2]) * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().flat_map(|s| [s[0], s[1]])
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            segments: self.segments.iter().map(|s| [s[0], s[1], k * s[2]]).collect(),
        }
    }
}

/// Càdlàg function of bounded variation with `f(0) = 0`: piecewise-constant
/// density plus jumps at strictly increasing positive times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvFunction {
    #[serde(default)]
    pub density: PiecewiseDensity,
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
}

impl BvFunction {
    pub fn new(density: PiecewiseDensity, atoms: Vec<[f64; 2]>) -> Result<Self> {
        let f = Self { density, atoms };
        f.check("bv function")?;
        Ok(f)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant_density(t1: f64, value: f64) -> Self {
        Self {
            density: PiecewiseDensity::constant(0.0, t1, value),
            atoms: Vec::new(),
        }
    }

    pub fn with_atom(mut self, t: f64, jump: f64) -> Self {
        let pos = self.atoms.partition_point(|a| a[0] < t);
        if pos < self.atoms.len() && self.atoms[pos][0] == t {
            self.atoms[pos][1] += jump;
        } else {
            self.atoms.insert(pos, [t, jump]);
        }
        self
    }

    pub(crate) fn check(&self, what: &str) -> Result<()> {
        self.density.check(what)?;
        let mut prev = 0.0;
        for a in &self.atoms {
            if !(a[0].is_finite() && a[1].is_finite()) {
                return Err(Error::MalformedSpec(format!("{what}: non-finite atom")));
            }
            if a[0] <= prev {
                return Err(Error::MalformedSpec(format!(
                    "{what}: atom times must be positive and strictly increasing (at {})",
                    a[0]
                )));
            }
            prev = a[0];
        }
        Ok(())
    }

    /// Jump `f(t) - f(t-)`.
    pub fn jump_at(&self, t: f64) -> f64 {
        self.atoms
            .binary_search_by(|a| a[0].total_cmp(&t))
            .map_or(0.0, |i| self.atoms[i][1])
    }

    pub fn continuous_part(&self, t: f64) -> f64 {
        self.density.integral(0.0, t)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.continuous_part(t) + self.atoms_in(0.0, t).map(|a| a[1]).sum::<f64>()
    }

    pub fn left_limit(&self, t: f64) -> f64 {
        self.value(t) - self.jump_at(t)
    }

    /// Total variation on `[0, t]`.
    pub fn total_variation(&self, t: f64) -> f64 {
        self.variation_between(0.0, t)
    }

    /// Total variation over `(r, t]`.
    pub fn variation_between(&self, r: f64, t: f64) -> f64 {
        self.density.abs_integral(r, t) + self.atoms_in(r, t).map(|a| a[1].abs()).sum::<f64>()
    }

    /// `f(t) - f(r)`.
    pub fn increment(&self, r: f64, t: f64) -> f64 {
        self.density.integral(r, t) + self.atoms_in(r, t).map(|a| a[1]).sum::<f64>()
    }

    /// Atoms with time in `(r, t]`.
    pub fn atoms_in(&self, r: f64, t: f64) -> impl Iterator<Item = &[f64; 2]> + '_ {
        let lo = self.atoms.partition_point(|a| a[0] <= r);
        let hi = self.atoms.partition_point(|a| a[0] <= t);
        self.atoms[lo..hi.max(lo)].iter()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.density.breakpoints().collect();
        v.extend(self.atoms.iter().map(|a| a[0]));
        v
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            density: self.density.scaled(k),
            atoms: self.atoms.iter().map(|a| [a[0], k * a[1]]).collect(),
        }
    }
}

/// Continuous increasing clock `c` with `c(0) = 0`, stored by its density.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionClock {
    #[serde(default)]
    pub density: PiecewiseDensity,
}

impl DiffusionClock {
    pub fn new(density: PiecewiseDensity) -> Result<Self> {
        density.check("c")?;
        density.check_nonnegative("c")?;
        Ok(Self { density })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(t1: f64, rate: f64) -> Self {
        Self {
            density: PiecewiseDensity::constant(0.0, t1, rate),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.density.integral(0.0, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_values() {
        let f = BvFunction::zero().with_atom(1.0, 0.5);
        assert_eq!(f.value(1.0), 0.5);
        assert_eq!(f.left_limit(1.0), 0.0);
        assert_eq!(f.total_variation(1.0), 0.5);
        assert_eq!(f.value(0.999), 0.0);
    }

    #[test]
    fn density_and_negative_atom() {
        let f = BvFunction::constant_density(1.0, 2.0).with_atom(0.5, -0.5);
        assert!((f.value(1.0) - 1.5).abs() < 1e-15);
        assert!((f.total_variation(1.0) - 2.5).abs() < 1e-15);
        assert!((f.left_limit(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn variation_is_additive() {
        let f = BvFunction::new(
            PiecewiseDensity::new(vec![[0.0, 0.3, 1.0], [0.3, 2.0, -2.0]]).unwrap(),
            vec![[0.2, 0.4], [0.7, -1.0], [1.5, 0.25]],
        )
        .unwrap();
        for &(a, b, c) in &[(0.0, 0.5, 2.0), (0.1, 0.2, 0.7), (0.2, 0.7, 1.9)] {
            let whole = f.variation_between(a, c);
            let split = f.variation_between(a, b) + f.variation_between(b, c);
            assert!((whole - split).abs() < 1e-14);
            let inc = f.increment(a, b) + f.increment(b, c);
            assert!((f.increment(a, c) - inc).abs() < 1e-14);
        }
    }

    #[test]
    fn structural_errors() {
        assert!(PiecewiseDensity::new(vec![[0.0, 1.0, 1.0], [0.5, 2.0, 1.0]]).is_err());
        assert!(PiecewiseDensity::new(vec![[1.0, 1.0, 1.0]]).is_err());
        assert!(BvFunction::new(PiecewiseDensity::zero(), vec![[1.0, 0.1], [0.5, 0.1]]).is_err());
        assert!(BvFunction::new(PiecewiseDensity::zero(), vec![[0.0, 0.1]]).is_err());
        assert!(DiffusionClock::new(PiecewiseDensity::constant(0.0, 1.0, -0.1)).is_err());
    }

    #[test]
    fn atoms_in_half_open_interval() {
        let f = BvFunction::zero().with_atom(0.5, 1.0).with_atom(1.0, 2.0);
        assert_eq!(f.atoms_in(0.5, 1.0).count(), 1);
        assert_eq!(f.atoms_in(0.0, 1.0).count(), 2);
        assert_eq!(f.atoms_in(1.0, 3.0).count(), 0);
    }
}
