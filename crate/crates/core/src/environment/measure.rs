use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, exp_compensated, gauss_legendre, one_minus_exp};

/// A measure `ν(dz)` on `(0, ∞)` from the supported catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyMeasureSpec {
    /// Point masses `Σ w_j δ_{z_j}` given as `[z, w]` pairs.
    FiniteAtoms { atoms: Vec<[f64; 2]> },
    /// Density `c z^{-1-α}` on `(0, z_max]`; `z_max = None` means unbounded.
    PowerLaw {
        c: f64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_max: Option<f64>,
    },
    /// Density tabulated at `[z, density]` nodes, interpolated log-linearly
    /// and zero outside the table.
    Tabulated { grid: Vec<[f64; 2]> },
}

/// Kernels accepted by [`LevyMeasureSpec::atom_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `e^{-λz} - 1 + λz 1{z ≤ 1}`
    K1,
    /// `e^{-λz} - 1 + λz`
    K,
    /// `z 1{z ≤ 1}`
    SmallZ,
    /// `z`
    Z,
    /// `1 ∧ z²`
    MinZ2,
}

impl Kernel {
    fn name(self) -> &'static str {
        match self {
            Kernel::K1 => "K1",
            Kernel::K => "K",
            Kernel::SmallZ => "z 1{z<=1}",
            Kernel::Z => "z",
            Kernel::MinZ2 => "1 ^ z^2",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Pow(i32),
    ExpComp(f64),
    OneMinusExp(f64),
}

impl Term {
    fn eval(self, z: f64) -> f64 {
        match self {
            Term::Pow(p) => z.powi(p),
            Term::ExpComp(l) => exp_compensated(l * z),
            Term::OneMinusExp(l) => one_minus_exp(l * z),
        }
    }
}

impl LevyMeasureSpec {
    pub fn finite_atoms(atoms: Vec<[f64; 2]>) -> Self {
        LevyMeasureSpec::FiniteAtoms { atoms }
    }

    pub fn power_law(c: f64, alpha: f64, z_max: Option<f64>) -> Self {
        LevyMeasureSpec::PowerLaw { c, alpha, z_max }
    }

    pub fn empty() -> Self {
        LevyMeasureSpec::FiniteAtoms { atoms: Vec::new() }
    }

    fn label(&self) -> &'static str {
        match self {
            LevyMeasureSpec::FiniteAtoms { .. } => "finite_atoms",
            LevyMeasureSpec::PowerLaw { .. } => "power_law",
            LevyMeasureSpec::Tabulated { .. } => "tabulated",
        }
    }

    /// Structural validation of the parameters.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedSpec(msg));
        match self {
            LevyMeasureSpec::FiniteAtoms { atoms } => {
                for a in atoms {
                    if !(a[0] > 0.0 && a[0].is_finite() && a[1] > 0.0 && a[1].is_finite()) {
                        return bad(format!("finite_atoms: need z > 0 and w > 0, got {a:?}"));
                    }
                }
            }
            LevyMeasureSpec::PowerLaw { c, alpha, z_max } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return bad(format!("power_law: c must be positive, got {c}"));
                }
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return bad(format!("power_law: alpha must lie in (0, 2), got {alpha}"));
                }
                if let Some(zm) = z_max {
                    if !(*zm > 0.0) {
                        return bad(format!("power_law: z_max must be positive, got {zm}"));
                    }
                }
            }
            LevyMeasureSpec::Tabulated { grid } => {
                if grid.len() < 2 {
                    return bad("tabulated: need at least two nodes".into());
                }
                if grid[0][0] < 0.0 {
                    return bad("tabulated: z must be nonnegative".into());
                }
                for w in grid.windows(2) {
                    if !(w[1][0] > w[0][0]) || !w[1][0].is_finite() {
                        return bad("tabulated: z nodes must be strictly increasing".into());
                    }
                }
                if grid.iter().any(|g| !(g[1] >= 0.0 && g[1].is_finite())) {
                    return bad("tabulated: densities must be finite and nonnegative".into());
                }
            }
        }
        Ok(())
    }

    /// Effective upper end of the support (`None` when unbounded).
    pub fn support_max(&self) -> Option<f64> {
        match self {
            LevyMeasureSpec::FiniteAtoms { atoms } => {
                Some(atoms.iter().map(|a| a[0]).fold(0.0, f64::max))
            }
            LevyMeasureSpec::PowerLaw { z_max, .. } => *z_max,
            LevyMeasureSpec::Tabulated { grid } => Some(grid[grid.len() - 1][0]),
        }
    }

    /// True when `ν((0, ∞)) = 0`.
    pub fn is_null(&self) -> bool {
        match self {
            LevyMeasureSpec::FiniteAtoms { atoms } => atoms.is_empty(),
            LevyMeasureSpec::PowerLaw { .. } => false,
            LevyMeasureSpec::Tabulated { grid } => grid.iter().all(|g| g[1] == 0.0),
        }
    }

    /// `∫ f(λ, z) ν(dz)`.
    pub fn atom_integral(&self, kernel: Kernel, lambda: f64) -> Result<f64> {
        let inf = f64::INFINITY;
        let res = match kernel {
            Kernel::K1 => {
                if lambda == 0.0 {
                    return Ok(0.0);
                }
                if let Some(v) = self.closed_k1(lambda) {
                    return Ok(v);
                }
                Ok(self.term(Term::ExpComp(lambda), 0.0, 1.0)?
                    - self.term(Term::OneMinusExp(lambda), 1.0, inf)?)
            }
            Kernel::K => {
                if lambda == 0.0 {
                    return Ok(0.0);
                }
                if let Some(v) = self.closed_k(lambda) {
                    return Ok(v);
                }
                self.term(Term::ExpComp(lambda), 0.0, inf)
            }
            Kernel::SmallZ => self.term(Term::Pow(1), 0.0, 1.0),
            Kernel::Z => self.term(Term::Pow(1), 0.0, inf),
            Kernel::MinZ2 => Ok(self.term(Term::Pow(2), 0.0, 1.0)? + self.term(Term::Pow(0), 1.0, inf)?),
        };
        res.map_err(|e| match e {
            Error::DivergentIntegral { measure, .. } => Error::DivergentIntegral {
                kernel: kernel.name(),
                measure,
            },
            other => other,
        })
    }

    /// `∫ [e^{-λ(z∧k)} - 1 + λz 1{z ≤ 1}] ν(dz)` for a cap `k ≥ 1`; `k = ∞`
    /// reduces to the `K1` kernel.
    pub fn k1_truncated(&self, lambda: f64, k: f64) -> Result<f64> {
        if k.is_infinite() || self.support_max().is_some_and(|s| s <= k) {
            return self.atom_integral(Kernel::K1, lambda);
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        debug_assert!(k >= 1.0);
        Ok(self.term(Term::ExpComp(lambda), 0.0, 1.0)?
            - self.term(Term::OneMinusExp(lambda), 1.0, k)?
            - one_minus_exp(lambda * k) * self.mass(k, f64::INFINITY)?)
    }

    /// `∫ (1 - e^{-λz}) ν(dz)`.
    pub fn one_minus_exp_integral(&self, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Ok(0.0);
        }
        if let LevyMeasureSpec::PowerLaw {
            c,
            alpha,
            z_max: None,
        } = *self
        {
            if alpha < 1.0 {
                return Ok(c * gamma(1.0 - alpha) * lambda.powf(alpha) / alpha);
            }
        }
        self.term(Term::OneMinusExp(lambda), 0.0, f64::INFINITY)
    }

    /// `ν((lo, hi])`.
    pub fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        self.term(Term::Pow(0), lo, hi)
    }

    /// `∫_{(lo, hi]} z^p ν(dz)`.
    pub fn moment(&self, p: i32, lo: f64, hi: f64) -> Result<f64> {
        self.term(Term::Pow(p), lo, hi)
    }

    /// Characteristic jump size used to place the small-jump threshold: the
    /// mass-weighted median for atoms and tables, `min(1, z_max)` for power
    /// laws (whose median is not scale-free).
    pub fn z_scale(&self) -> f64 {
        match self {
            LevyMeasureSpec::FiniteAtoms { atoms } => {
                if atoms.is_empty() {
                    return 1.0;
                }
                let mut a = atoms.clone();
                a.sort_by(|x, y| x[0].total_cmp(&y[0]));
                let total: f64 = a.iter().map(|x| x[1]).sum();
                let mut acc = 0.0;
                for x in &a {
                    acc += x[1];
                    if acc >= 0.5 * total {
                        return x[0];
                    }
                }
                a[a.len() - 1][0]
            }
            LevyMeasureSpec::PowerLaw { z_max, .. } => z_max.map_or(1.0, |z| z.min(1.0)),
            LevyMeasureSpec::Tabulated { grid } => {
                let table = TableCdf::new(grid);
                if table.total <= 0.0 {
                    1.0
                } else {
                    table.quantile(0.5 * table.total)
                }
            }
        }
    }

    fn closed_k(&self, lambda: f64) -> Option<f64> {
        match *self {
            LevyMeasureSpec::PowerLaw {
                c,
                alpha,
                z_max: None,
            } if alpha > 1.0 => {
                Some(c * gamma(2.0 - alpha) * lambda.powf(alpha) / (alpha * (alpha - 1.0)))
            }
            _ => None,
        }
    }

    fn closed_k1(&self, lambda: f64) -> Option<f64> {
        match *self {
            LevyMeasureSpec::PowerLaw {
                c,
                alpha,
                z_max: None,
            } if alpha > 1.0 => Some(self.closed_k(lambda)? - lambda * c / (alpha - 1.0)),
            LevyMeasureSpec::PowerLaw {
                c,
                alpha,
                z_max: None,
            } if alpha < 1.0 => Some(
                lambda * c / (1.0 - alpha) - c * gamma(1.0 - alpha) * lambda.powf(alpha) / alpha,
            ),
            _ => None,
        }
    }

    fn divergent(&self) -> Error {
        Error::DivergentIntegral {
            kernel: "",
            measure: self.label(),
        }
    }

    /// `∫_{(lo, hi]} term(z) ν(dz)`.
    fn term(&self, t: Term, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        match self {
            LevyMeasureSpec::FiniteAtoms { atoms } => Ok(atoms
                .iter()
                .filter(|a| a[0] > lo && a[0] <= hi)
                .map(|a| a[1] * t.eval(a[0]))
                .sum()),
            LevyMeasureSpec::PowerLaw { c, alpha, z_max } => {
                let hi = z_max.map_or(hi, |zm| hi.min(zm));
                if hi <= lo {
                    return Ok(0.0);
                }
                power_law_term(*c, *alpha, t, lo, hi).ok_or_else(|| self.divergent())
            }
            LevyMeasureSpec::Tabulated { grid } => Ok(tabulated_term(grid, t, lo, hi)),
        }
    }
}

/// `c ∫_lo^hi z^{q-1} dz` with divergence reported as `None`.
fn power_integral(c: f64, q: f64, lo: f64, hi: f64) -> Option<f64> {
    if q == 0.0 {
        if lo == 0.0 || hi.is_infinite() {
            return None;
        }
        return Some(c * (hi / lo).ln());
    }
    if (lo == 0.0 && q < 0.0) || (hi.is_infinite() && q > 0.0) {
        return None;
    }
    let hq = if hi.is_infinite() { 0.0 } else { hi.powf(q) };
    let lq = if lo == 0.0 { 0.0 } else { lo.powf(q) };
    Some(c * (hq - lq) / q)
}

fn power_law_term(c: f64, alpha: f64, t: Term, lo: f64, hi: f64) -> Option<f64> {
    match t {
        Term::Pow(p) => power_integral(c, p as f64 - alpha, lo, hi),
        Term::ExpComp(l) | Term::OneMinusExp(l) => {
            if l == 0.0 {
                return Some(0.0);
            }
            let first = if matches!(t, Term::ExpComp(_)) { 2 } else { 1 };
            let split = 1.0 / l;
            let mut total = 0.0;
            // Series in λz where λz ≤ 1.
            let (a, b) = (lo, hi.min(split));
            if b > a {
                let mut sum = 0.0;
                let mut coef = 1.0;
                for j in 1..=80 {
                    coef *= -l / j as f64;
                    if j < first {
                        continue;
                    }
                    let term = coef * power_integral(c, j as f64 - alpha, a, b)?;
                    sum += term;
                    if term.abs() <= 1e-17 * sum.abs() {
                        break;
                    }
                }
                total += if first == 1 { -sum } else { sum };
            }
            // Exponential tail plus closed-form polynomial part where λz > 1.
            let (a, b) = (lo.max(split), hi);
            if b > a {
                let e = exp_tail(c, alpha, l, a, b);
                total += match t {
                    Term::ExpComp(_) => {
                        e - power_integral(c, -alpha, a, b)? + l * power_integral(c, 1.0 - alpha, a, b)?
                    }
                    _ => power_integral(c, -alpha, a, b)? - e,
                };
            }
            Some(total)
        }
    }
}

/// `c ∫_a^b e^{-λz} z^{-1-α} dz` for `λa ≥ 1`.
fn exp_tail(c: f64, alpha: f64, l: f64, a: f64, b: f64) -> f64 {
    let w0 = l * a;
    // Beyond w0 + 40 the integrand is below e^{-40} of its starting value.
    let w1 = (l * b).min(w0 + 40.0);
    let f = |w: f64| (-w).exp() * w.powf(-1.0 - alpha);
    if w1 <= w0 || f(w0) == 0.0 {
        return 0.0;
    }
    // Panels no wider than their distance to the singularity at 0.
    let mut acc = 0.0;
    let mut lo = w0;
    while lo < w1 {
        let hi = (lo + lo.min(4.0)).min(w1);
        acc += gauss_legendre(&f, lo, hi);
        lo = hi;
    }
    c * l.powf(alpha) * acc
}

/// Density of a tabulated measure on `[z_i, z_{i+1}]`.
fn table_density(grid: &[[f64; 2]], i: usize, z: f64) -> f64 {
    let [z0, d0] = grid[i];
    let [z1, d1] = grid[i + 1];
    if d0 > 0.0 && d1 > 0.0 {
        d0 * ((d1 / d0).ln() * (z - z0) / (z1 - z0)).exp()
    } else {
        d0 + (d1 - d0) * (z - z0) / (z1 - z0)
    }
}

fn tabulated_term(grid: &[[f64; 2]], t: Term, lo: f64, hi: f64) -> f64 {
    let n = grid.len() - 1;
    let tol = 1e-12 / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let a = grid[i][0].max(lo);
        let b = grid[i + 1][0].min(hi);
        if b <= a {
            continue;
        }
        if let Term::Pow(0) = t {
            total += table_mass(grid, i, a, b);
            continue;
        }
        let f = |z: f64| t.eval(z) * table_density(grid, i, z);
        total += adaptive_simpson(&f, a, b, tol);
    }
    total
}

/// Closed-form mass of table cell `i` over `[a, b]`.
fn table_mass(grid: &[[f64; 2]], i: usize, a: f64, b: f64) -> f64 {
    let [z0, d0] = grid[i];
    let [z1, d1] = grid[i + 1];
    if d0 > 0.0 && d1 > 0.0 && d0 != d1 {
        let k = (d1 / d0).ln() / (z1 - z0);
        d0 / k * ((k * (b - z0)).exp() - (k * (a - z0)).exp())
    } else {
        let da = table_density(grid, i, a);
        let db = table_density(grid, i, b);
        0.5 * (da + db) * (b - a)
    }
}

/// Cumulative mass of a tabulated measure with closed-form inversion.
#[derive(Debug, Clone)]
struct TableCdf {
    grid: Vec<[f64; 2]>,
    cum: Vec<f64>,
    total: f64,
}

impl TableCdf {
    fn new(grid: &[[f64; 2]]) -> Self {
        let mut cum = vec![0.0];
        for i in 0..grid.len() - 1 {
            let m = table_mass(grid, i, grid[i][0], grid[i + 1][0]);
            cum.push(cum[i] + m);
        }
        let total = cum[cum.len() - 1];
        Self {
            grid: grid.to_vec(),
            cum,
            total,
        }
    }

    fn mass_below(&self, z: f64) -> f64 {
        let n = self.grid.len() - 1;
        if z <= self.grid[0][0] {
            return 0.0;
        }
        if z >= self.grid[n][0] {
            return self.total;
        }
        let i = self.grid.partition_point(|g| g[0] <= z) - 1;
        self.cum[i] + table_mass(&self.grid, i, self.grid[i][0], z)
    }

    /// Smallest `z` with `mass_below(z) = target`.
    fn quantile(&self, target: f64) -> f64 {
        let n = self.grid.len() - 1;
        let i = (self.cum.partition_point(|&c| c < target).max(1) - 1).min(n - 1);
        let [z0, d0] = self.grid[i];
        let [z1, d1] = self.grid[i + 1];
        let need = (target - self.cum[i]).max(0.0);
        let h = z1 - z0;
        let z = if d0 > 0.0 && d1 > 0.0 && d0 != d1 {
            let k = (d1 / d0).ln() / h;
            z0 + (1.0 + need * k / d0).ln() / k
        } else {
            let s = (d1 - d0) / h;
            if s.abs() < 1e-300 {
                if d0 > 0.0 {
                    z0 + need / d0
                } else {
                    z0
                }
            } else {
                // d0 x + s x²/2 = need
                let disc = (d0 * d0 + 2.0 * s * need).max(0.0);
                z0 + (disc.sqrt() - d0) / s
            }
        };
        z.clamp(z0, z1)
    }
}

/// Sampler for jump sizes from `ν` restricted to `(lo, ∞)`.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    mass: f64,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Atoms { z: Vec<f64>, cum: Vec<f64> },
    Power { lo_pow: f64, hi_pow: f64, alpha: f64 },
    Table { cdf: TableCdf, base: f64 },
    Empty,
}

impl JumpSampler {
    pub fn new(nu: &LevyMeasureSpec, lo: f64) -> Result<Self> {
        let mass = nu.mass(lo, f64::INFINITY)?;
        if !(mass > 0.0) {
            return Ok(Self {
                mass: 0.0,
                kind: SamplerKind::Empty,
            });
        }
        let kind = match nu {
            LevyMeasureSpec::FiniteAtoms { atoms } => {
                let mut z = Vec::new();
                let mut cum = Vec::new();
                let mut acc = 0.0;
                for a in atoms.iter().filter(|a| a[0] > lo) {
                    acc += a[1];
                    z.push(a[0]);
                    cum.push(acc);
                }
                SamplerKind::Atoms { z, cum }
            }
            LevyMeasureSpec::PowerLaw { alpha, z_max, .. } => SamplerKind::Power {
                lo_pow: lo.powf(-alpha),
                hi_pow: z_max.map_or(0.0, |z| z.powf(-alpha)),
                alpha: *alpha,
            },
            LevyMeasureSpec::Tabulated { grid } => {
                let cdf = TableCdf::new(grid);
                let base = cdf.mass_below(lo);
                SamplerKind::Table { cdf, base }
            }
        };
        Ok(Self { mass, kind })
    }

    /// `ν((lo, ∞))`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Jump size at probability level `u ∈ [0, 1)` of the normalized law.
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.kind {
            SamplerKind::Atoms { z, cum } => {
                let target = u * cum[cum.len() - 1];
                let i = cum.partition_point(|&c| c <= target).min(z.len() - 1);
                z[i]
            }
            SamplerKind::Power {
                lo_pow,
                hi_pow,
                alpha,
            } => {
                // survival ∝ z^{-α} - z_max^{-α}
                let p = lo_pow - u * (lo_pow - hi_pow);
                p.powf(-1.0 / alpha)
            }
            SamplerKind::Table { cdf, base } => cdf.quantile(base + u * (cdf.total - base)),
            SamplerKind::Empty => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// Independent quadrature: `c ∫ f(z) z^{-1-α} dz` over `(0, zmax]` via
    /// `z = e^y`.
    fn brute_power(c: f64, alpha: f64, zmax: f64, f: impl Fn(f64) -> f64) -> f64 {
        let g = |y: f64| {
            let z = y.exp();
            f(z) * c * z.powf(-alpha)
        };
        let mut acc = 0.0;
        let mut y = -60.0;
        let top = zmax.ln();
        while y < top {
            let y1 = (y + 0.5).min(top);
            let rough = 0.5 * (y1 - y) * (g(y).abs() + g(y1).abs());
            acc += adaptive_simpson(&g, y, y1, 1e-13 * rough + 1e-300);
            y = y1;
        }
        acc
    }

    /// `c ∫_0^{e^{-60}} (λz)²/2 z^{-1-α} dz`, the part below the quadrature range.
    fn quadratic_head(c: f64, alpha: f64, l: f64) -> f64 {
        0.5 * c * l * l * (-60.0 * (2.0 - alpha)).exp() / (2.0 - alpha)
    }

    /// `c ∫_Z^∞ (a z + b) z^{-1-α} dz`, the far tail once `e^{-λz}` is negligible.
    fn affine_tail(c: f64, alpha: f64, z: f64, a: f64, b: f64) -> f64 {
        a * c * z.powf(1.0 - alpha) / (alpha - 1.0) + b * c * z.powf(-alpha) / alpha
    }

    #[test]
    fn unit_atom_k_kernel() {
        let nu = LevyMeasureSpec::finite_atoms(vec![[1.0, 1.0]]);
        let v = nu.atom_integral(Kernel::K, 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(nu.atom_integral(Kernel::K, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn power_law_k_closed_form_matches_quadrature() {
        for &alpha in &[1.2, 1.5, 1.8] {
            let pl = LevyMeasureSpec::power_law(0.7, alpha, None);
            for &l in &[0.1, 1.0, 7.0] {
                let closed = pl.atom_integral(Kernel::K, l).unwrap();
                let zc = 80.0 / l;
                let quad = brute_power(0.7, alpha, zc, |z| exp_compensated(l * z))
                    + affine_tail(0.7, alpha, zc, l, -1.0)
                    + quadratic_head(0.7, alpha, l);
                assert!(rel(closed, quad) < 1e-9, "alpha {alpha} l {l}: {closed} vs {quad}");
                // general path through the series/tail split
                let split = pl.term(Term::ExpComp(l), 0.0, f64::INFINITY).unwrap();
                assert!(rel(split, closed) < 1e-10);
            }
        }
    }

    #[test]
    fn power_law_k1_light_and_heavy() {
        for &(alpha, zmax) in &[(0.7, None), (1.5, None), (1.5, Some(10.0)), (0.3, Some(3.0))] {
            let pl = LevyMeasureSpec::power_law(1.3, alpha, zmax);
            for &l in &[1e-3, 0.5, 2.0, 40.0] {
                let got = pl.atom_integral(Kernel::K1, l).unwrap();
                let general = pl.term(Term::ExpComp(l), 0.0, 1.0).unwrap()
                    - pl.term(Term::OneMinusExp(l), 1.0, f64::INFINITY).unwrap();
                assert!(rel(got, general) < 1e-10, "{alpha} {l}: {got} vs {general}");
                let zc = (80.0 / l).max(2.0);
                let zm = zmax.unwrap_or(zc);
                let mut quad = brute_power(1.3, alpha, zm, |z| {
                    if z <= 1.0 {
                        exp_compensated(l * z)
                    } else {
                        -one_minus_exp(l * z)
                    }
                });
                if zmax.is_none() {
                    quad += affine_tail(1.3, alpha, zc, 0.0, -1.0);
                }
                quad += quadratic_head(1.3, alpha, l);
                assert!((got - quad).abs() < 1e-8 * quad.abs().max(1e-6));
            }
        }
    }

    #[test]
    fn divergent_kernels_are_reported() {
        let heavy = LevyMeasureSpec::power_law(1.0, 0.8, None);
        assert!(matches!(
            heavy.atom_integral(Kernel::Z, 1.0),
            Err(Error::DivergentIntegral { .. })
        ));
        assert!(heavy.atom_integral(Kernel::K, 1.0).is_err());
        let stable = LevyMeasureSpec::power_law(1.0, 1.5, Some(5.0));
        assert!(stable.atom_integral(Kernel::SmallZ, 0.0).is_err());
        assert!(stable.atom_integral(Kernel::MinZ2, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn min_z2_closed_form() {
        let pl = LevyMeasureSpec::power_law(2.0, 1.5, None);
        // ∫_0^1 z^{-0.5} + ∫_1^∞ z^{-2.5} = 2 + 2/3
        let v = pl.atom_integral(Kernel::MinZ2, 0.0).unwrap();
        assert!(rel(v, 2.0 * (2.0 + 2.0 / 3.0)) < 1e-14);
    }

    #[test]
    fn truncated_kernel_decreases_with_cap() {
        let pl = LevyMeasureSpec::power_law(1.0, 1.5, None);
        let mut prev = f64::INFINITY;
        for &k in &[1.0, 2.0, 10.0, 100.0, f64::INFINITY] {
            let v = pl.k1_truncated(0.8, k).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn tabulated_smeared_atom_converges() {
        let atoms = LevyMeasureSpec::finite_atoms(vec![[0.5, 2.0]]);
        let exact = atoms.atom_integral(Kernel::K1, 3.0).unwrap();
        let mut errs = Vec::new();
        for &w in &[0.1, 0.01, 0.001] {
            let grid = vec![[0.5 - w, 2.0 / (2.0 * w)], [0.5 + w, 2.0 / (2.0 * w)]];
            let tab = LevyMeasureSpec::Tabulated { grid };
            errs.push((tab.atom_integral(Kernel::K1, 3.0).unwrap() - exact).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        assert!(errs[2] < 1e-5);
    }

    #[test]
    fn table_quantile_inverts_mass() {
        let grid = vec![[0.1, 3.0], [0.5, 1.0], [1.0, 0.0], [2.0, 0.5]];
        let cdf = TableCdf::new(&grid);
        for i in 1..20 {
            let target = cdf.total * i as f64 / 20.0;
            let z = cdf.quantile(target);
            assert!((cdf.mass_below(z) - target).abs() < 1e-12);
        }
    }

    #[test]
    fn power_sampler_respects_bounds() {
        let pl = LevyMeasureSpec::power_law(1.0, 1.5, Some(10.0));
        let s = JumpSampler::new(&pl, 0.01).unwrap();
        assert!((s.quantile(0.0) - 0.01).abs() < 1e-12);
        assert!((s.quantile(1.0) - 10.0).abs() < 1e-9);
        let med = s.quantile(0.5);
        let m = pl.mass(0.01, med).unwrap();
        assert!(rel(m, 0.5 * s.mass()) < 1e-10);
    }

    #[test]
    fn json_shape() {
        let m: LevyMeasureSpec =
            serde_json::from_str(r#"{"kind":"power_law","c":1.0,"alpha":1.5}"#).unwrap();
        assert_eq!(m, LevyMeasureSpec::power_law(1.0, 1.5, None));
        assert!(serde_json::from_str::<LevyMeasureSpec>(
            r#"{"kind":"power_law","c":1.0,"alpha":1.5,"extra":1}"#
        )
        .is_err());
    }
}
