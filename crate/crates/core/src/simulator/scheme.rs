//! One time step of the coupled scheme.
//!
//! Several states ("members") are advanced by one noise realization so that
//! their ordering is preserved: coupled initial values, a truncation ladder,
//! or a single path. Between atoms each step is a Strang splitting: an
//! exact Feller half-step, the exact flow of the jumps above the small-jump
//! threshold with their compensator, and another exact Feller half-step.
//! Jumps at or below the threshold become extra Feller diffusion.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::environment::{EnvironmentSpec, JumpSampler, LevyMeasureSpec};
use crate::error::Result;

/// Jumps expected per base step above which the threshold is raised.
pub(crate) const MAX_ARRIVALS: f64 = 2000.0;
/// Poisson means above which the quantile comes from the Cornish–Fisher
/// expansion alone; its CDF error is `O(1/mean)`.
const ASYMPTOTIC_MEAN: f64 = 1e6;
/// Number of doublings of the threshold prepared per jump term.
const THRESHOLD_LEVELS: usize = 48;

/// `P(N ≤ k)` crosses `u`: the inverse CDF of `Poisson(mean)`.
pub(crate) fn poisson_quantile(u: f64, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while cdf < u && p > 0.0 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        return k;
    }
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u);
    if mean > ASYMPTOTIC_MEAN {
        // Third order with continuity correction; increasing in u and mean.
        let g = 1.0 / mean.sqrt();
        let w = z + (z * z - 1.0) * g / 6.0 + (z.powi(3) - 3.0 * z) * g * g / 24.0
            - (2.0 * z.powi(3) - 5.0 * z) * g * g / 36.0;
        return (mean + w / g - 0.5).ceil().max(0.0) as u64;
    }
    // Cornish–Fisher start, then walk with the pmf recursion.
    let guess = mean + mean.sqrt() * z + (z * z - 1.0) / 6.0;
    let mut k = guess.max(0.0).floor() as u64;
    let pmf = |k: u64| (k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)).exp();
    let mut cdf = gamma_ur(k as f64 + 1.0, mean);
    let mut p = pmf(k);
    if cdf < u {
        while cdf < u && p > 0.0 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
    } else {
        while k > 0 && cdf - p >= u {
            cdf -= p;
            p *= k as f64 / mean;
            k -= 1;
        }
    }
    k
}

/// Jumps of one continuous term with threshold `eps`: exact above it,
/// folded into drift and diffusion below it.
#[derive(Debug, Clone)]
struct ThresholdPlan {
    /// Jump rate per unit state and time, `σ ν((eps, ∞))`.
    rate: f64,
    /// Compensator rate `κ = σ [∫_{(eps∧1, 1]} z ν − ∫_{(1, eps∨1]} z ν]`.
    drift: f64,
    /// Added to the diffusion density: `σ/2 ∫_{(0, eps]} z² ν`.
    diffusion: f64,
    sampler: JumpSampler,
}

impl ThresholdPlan {
    fn new(sigma: f64, nu: &LevyMeasureSpec, eps: f64) -> Result<Self> {
        let comp = if eps < 1.0 {
            nu.moment(1, eps, 1.0)?
        } else {
            -nu.moment(1, 1.0, eps)?
        };
        let var = if eps > 0.0 { nu.moment(2, 0.0, eps)? } else { 0.0 };
        let sampler = JumpSampler::new(nu, eps)?;
        Ok(Self {
            rate: sigma * sampler.mass(),
            drift: sigma * comp,
            diffusion: 0.5 * sigma * var,
            sampler,
        })
    }
}

#[derive(Debug, Clone)]
struct TermPlan {
    /// Plans at thresholds `eps · 2^j`, finest first; a single entry for
    /// finite-activity measures.
    levels: Vec<ThresholdPlan>,
}

/// Constant-coefficient interval with precomputed jump plans.
#[derive(Debug, Clone)]
pub(crate) struct CellPlan {
    pub t0: f64,
    pub t1: f64,
    beta: f64,
    gamma: f64,
    terms: Vec<TermPlan>,
    /// `Σ σ ν((1, ∞))`: the intensity of large jumps, used for step control.
    pub big_rate: f64,
}

impl CellPlan {
    /// `eps_small = None` picks `1e-2 × z_scale` per measure. `cap` bounds
    /// the thresholds so capped jumps are never folded into the diffusion.
    pub fn new(env: &EnvironmentSpec, t0: f64, t1: f64, eps_small: Option<f64>, cap: f64) -> Result<Self> {
        let cell = env.cell(t0, t1);
        let mut terms = Vec::new();
        let mut big_rate = 0.0;
        for &(sigma, i) in &cell.jumps {
            let nu = &env.m.continuous[i].measure;
            big_rate += sigma * nu.mass(1.0, f64::INFINITY)?;
            let finite = nu.mass(0.0, f64::INFINITY).is_ok_and(f64::is_finite);
            let levels = if finite {
                vec![ThresholdPlan::new(sigma, nu, 0.0)?]
            } else {
                let eps0 = eps_small.unwrap_or(1e-2 * nu.z_scale());
                let top = nu.support_max().unwrap_or(f64::INFINITY).min(cap);
                let mut levels = vec![ThresholdPlan::new(sigma, nu, eps0)?];
                let mut eps = eps0;
                for _ in 0..THRESHOLD_LEVELS {
                    eps *= 2.0;
                    if eps >= top {
                        break;
                    }
                    levels.push(ThresholdPlan::new(sigma, nu, eps)?);
                }
                levels
            };
            terms.push(TermPlan { levels });
        }
        Ok(Self {
            t0,
            t1,
            beta: cell.b1,
            gamma: cell.c,
            terms,
            big_rate,
        })
    }

    /// Threshold level per term keeping the expected arrivals of a step of
    /// size `h` at state `x` below `budget`.
    fn levels_for(&self, x: f64, h: f64, budget: f64) -> Vec<usize> {
        let budget = budget / self.terms.len().max(1) as f64;
        self.terms
            .iter()
            .map(|t| {
                t.levels
                    .iter()
                    .position(|p| p.rate * x * h <= budget)
                    .unwrap_or(t.levels.len() - 1)
            })
            .collect()
    }
}

/// Per-member diagnostics of one step.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StepFlags {
    /// A jump larger than the member's cap occurred.
    pub capped: bool,
}

/// Exact transition of `dX = −βX dt + √(2γX) dW` over `h` for several
/// states, coupled through one uniform and nested Gamma increments.
///
/// `X_h = c_h · Gamma(N)` with `N ~ Poisson(x e^{−βh} / c_h)` and
/// `c_h = γ (1 − e^{−βh}) / β`.
fn feller_coupled<R: Rng + ?Sized>(xs: &mut [f64], beta: f64, gamma: f64, h: f64, rng: &mut R) {
    let decay = (-beta * h).exp();
    if gamma <= 0.0 {
        for x in xs.iter_mut().filter(|x| x.is_finite()) {
            *x *= decay;
        }
        return;
    }
    let ch = if beta.abs() * h < 1e-12 {
        gamma * h
    } else {
        gamma * -(-beta * h).exp_m1() / beta
    };
    let mut order: Vec<usize> = (0..xs.len()).filter(|&i| xs[i].is_finite() && xs[i] > 0.0).collect();
    if order.is_empty() {
        return;
    }
    if let [i] = order[..] {
        // Nothing to couple: draw the count directly.
        if let Ok(p) = Poisson::new(xs[i] * decay / ch) {
            let n: f64 = p.sample(rng);
            xs[i] = if n > 0.0 {
                ch * Gamma::new(n, 1.0).expect("positive shape").sample(rng)
            } else {
                0.0
            };
            return;
        }
    }
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let u: f64 = rng.random();
    let mut prev_n = 0u64;
    let mut acc = 0.0;
    for &i in &order {
        let n = poisson_quantile(u, xs[i] * decay / ch).max(prev_n);
        if n > prev_n {
            acc += Gamma::new((n - prev_n) as f64, 1.0).expect("positive shape").sample(rng);
        }
        prev_n = n;
        xs[i] = ch * acc;
    }
}

/// Exact flow over `h` of the jumps above the threshold together with their
/// compensating drift `−κX`, for several members driven by one Poisson
/// random measure in `(s, u, z)`. A point at time `s` is accepted by member
/// `i` when `u ≤ X_i(s−)`, so accepted sets are nested and ordering is
/// preserved.
///
/// Points are proposed by thinning against the largest member. Should jumps
/// inside the step push the expected proposals past `4 × budget`, the
/// intensity is frozen at its current level for the rest of the step.
#[allow(clippy::too_many_arguments)]
fn jump_flow<R: Rng + ?Sized>(
    chosen: &[&ThresholdPlan],
    kappa: f64,
    xs: &mut [f64],
    caps: &[f64],
    h: f64,
    budget: f64,
    rng: &mut R,
    flags: &mut [StepFlags],
) {
    let rate: f64 = chosen.iter().map(|p| p.rate).sum();
    let top_of = |xs: &[f64]| xs.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
    let decay = |xs: &mut [f64], dt: f64| {
        let f = (-kappa * dt).exp();
        for x in xs.iter_mut().filter(|x| x.is_finite()) {
            *x *= f;
        }
    };
    if rate <= 0.0 {
        decay(xs, h);
        return;
    }
    let mut frozen: Option<f64> = None;
    let mut s = 0.0;
    loop {
        let remaining = h - s;
        let mut top = top_of(xs);
        if top <= 0.0 {
            break;
        }
        if frozen.is_none() && rate * top * remaining > 4.0 * budget {
            frozen = Some(top);
        }
        if let Some(f) = frozen {
            top = f;
        }
        // Dominates `max_i X_i` until the end of the step.
        let bound = top * (-kappa * remaining).exp().max(1.0);
        let wait: f64 = Exp::new(rate * bound).expect("positive rate").sample(rng);
        let dt = wait.min(remaining);
        decay(xs, dt);
        s += dt;
        if wait >= remaining {
            break;
        }
        let u = rng.random::<f64>() * bound;
        if frozen.is_none() && u > top_of(xs) {
            continue;
        }
        let mut pick = rng.random::<f64>() * rate;
        let mut z = 0.0;
        for p in chosen {
            if pick < p.rate {
                z = p.sampler.sample(rng);
                break;
            }
            pick -= p.rate;
        }
        for (i, x) in xs.iter_mut().enumerate() {
            let level = frozen.map_or(*x, |f| x.min(f));
            if x.is_finite() && u <= level {
                if z > caps[i] {
                    flags[i].capped = true;
                    *x += caps[i];
                } else {
                    *x += z;
                }
            }
        }
    }
}

/// Advances `xs` over one step `[s, s + h]` inside `plan` by Strang
/// splitting, raising the small-jump threshold until at most `budget` jumps
/// are expected. Members with `caps[i] < ∞` have their jumps capped at
/// `caps[i]`.
pub(crate) fn step<R: Rng + ?Sized>(
    plan: &CellPlan,
    xs: &mut [f64],
    caps: &[f64],
    h: f64,
    budget: f64,
    rng: &mut R,
    flags: &mut [StepFlags],
) {
    let x_max = xs.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
    let levels = plan.levels_for(x_max, h, budget);
    let chosen: Vec<&ThresholdPlan> = plan.terms.iter().zip(&levels).map(|(t, &j)| &t.levels[j]).collect();
    let kappa: f64 = chosen.iter().map(|p| p.drift).sum();
    let gamma = plan.gamma + chosen.iter().map(|p| p.diffusion).sum::<f64>();

    feller_coupled(xs, plan.beta, gamma, 0.5 * h, rng);
    jump_flow(&chosen, kappa, xs, caps, h, budget, rng, flags);
    feller_coupled(xs, plan.beta, gamma, 0.5 * h, rng);
}
