//! The fixed-time jump at an environment atom: the increment of a spectrally
//! positive Lévy process with Lévy measure `m({t}, dz)` and drift `−Δb₁(t)`,
//! run for time `X(t−)`.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::environment::{AtomEvent, JumpSampler, Kernel, LevyMeasureSpec};
use crate::error::Result;

/// Default small-jump threshold relative to the measure's jump scale.
pub const DEFAULT_EPS_FACTOR: f64 = 1e-3;

/// Law of `ΔX(t)` given `X(t−) = x`, in the compensated form
/// `ΔX = −Δb₁ x + Σ_{u ≤ x} z − x ∫₀¹ z ν(dz)`.
///
/// Jumps above the threshold `eps` come from a Poisson random measure with
/// intensity `ν(dz) du`, listed in increasing `u`; jumps at or below it are
/// replaced by a centred Gaussian. Finite-activity measures use `eps = 0`
/// and are sampled exactly.
#[derive(Debug, Clone)]
pub struct AtomJumpLaw {
    pub t: f64,
    pub delta_b1: f64,
    pub measure: Option<LevyMeasureSpec>,
    pub eps: f64,
    /// `1 − Δb₁ − ∫_{(eps,1]} z ν`: the factor applied to `x` before jumps.
    keep: f64,
    /// `∫_{(0,eps]} z² ν`.
    small_var: f64,
    sampler: Option<JumpSampler>,
}

/// One draw of the jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDraw {
    /// `X(t) − X(t−)` after clamping.
    pub delta: f64,
    /// The Gaussian substitution produced a negative state that was set to 0.
    pub clamped: bool,
}

fn is_finite_activity(nu: &LevyMeasureSpec) -> bool {
    nu.mass(0.0, f64::INFINITY).is_ok_and(f64::is_finite)
}

impl AtomJumpLaw {
    /// `eps = None` picks `1e-3 × z_scale(ν)` for infinite-activity measures.
    pub fn new(t: f64, delta_b1: f64, measure: Option<LevyMeasureSpec>, eps: Option<f64>) -> Result<Self> {
        let measure = measure.filter(|nu| !nu.is_null());
        let Some(nu) = &measure else {
            return Ok(Self {
                t,
                delta_b1,
                measure: None,
                eps: 0.0,
                keep: 1.0 - delta_b1,
                small_var: 0.0,
                sampler: None,
            });
        };
        let eps = if is_finite_activity(nu) {
            0.0
        } else {
            eps.unwrap_or(DEFAULT_EPS_FACTOR * nu.z_scale())
        };
        let keep = 1.0 - delta_b1 - nu.moment(1, eps, 1.0)?;
        let small_var = if eps > 0.0 { nu.moment(2, 0.0, eps)? } else { 0.0 };
        Ok(Self {
            t,
            delta_b1,
            keep,
            small_var,
            sampler: Some(JumpSampler::new(nu, eps)?),
            measure,
            eps,
        })
    }

    pub fn from_event(ev: &AtomEvent, eps: Option<f64>) -> Result<Self> {
        Self::new(ev.time, ev.delta_b1, ev.measure.clone(), eps)
    }

    /// Bottleneck law: `Δb₁ = 1` and no jumps, so `X(t) = 0`.
    pub fn is_bottleneck(&self) -> bool {
        self.delta_b1 == 1.0 && self.measure.is_none()
    }

    /// `λ − v_{t−,t}(λ) = Δb₁ λ + ∫ K₁(λ, z) ν(dz)`.
    pub fn exponent(&self, lambda: f64) -> Result<f64> {
        let jumps = match &self.measure {
            Some(nu) => nu.atom_integral(Kernel::K1, lambda)?,
            None => 0.0,
        };
        Ok(self.delta_b1 * lambda + jumps)
    }

    /// `x ∫_{(0,eps]} z³ ν`: the scale of the error made by the Gaussian
    /// substitution.
    pub fn gaussian_error_scale(&self, x: f64) -> Result<f64> {
        match (&self.measure, self.eps > 0.0) {
            (Some(nu), true) => Ok(x * nu.moment(3, 0.0, self.eps)?),
            _ => Ok(0.0),
        }
    }

    /// Samples `ΔX` given `X(t−) = x`.
    pub fn sample_jump<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> JumpDraw {
        self.sample_coupled(&[x], &[f64::INFINITY], rng)[0]
    }

    /// Samples the jumps of several states from one noise realization: a
    /// shared Gaussian and a shared Poisson random measure in `(z, u)`,
    /// where the state `x` keeps the points with `u ≤ x`. Smaller states
    /// therefore accept a subset of the larger states' jumps. State `i` sees
    /// jump sizes capped at `caps[i]`.
    pub fn sample_coupled<R: Rng + ?Sized>(&self, xs: &[f64], caps: &[f64], rng: &mut R) -> Vec<JumpDraw> {
        let x_max = xs.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
        let gauss: f64 = if self.small_var > 0.0 && x_max > 0.0 {
            rng.sample(StandardNormal)
        } else {
            0.0
        };
        let mut sums = vec![0.0; xs.len()];
        if let Some(s) = self.sampler.as_ref().filter(|s| s.mass() > 0.0 && x_max > 0.0) {
            let spacing = Exp::new(s.mass()).expect("positive rate");
            let mut u = spacing.sample(rng);
            while u <= x_max {
                let z = s.sample(rng);
                for ((sum, &x), &cap) in sums.iter_mut().zip(xs).zip(caps) {
                    if u <= x {
                        *sum += z.min(cap);
                    }
                }
                u += spacing.sample(rng);
            }
        }
        xs.iter()
            .zip(&sums)
            .map(|(&x, &jumps)| {
                if x == 0.0 || !x.is_finite() {
                    return JumpDraw {
                        delta: 0.0,
                        clamped: false,
                    };
                }
                let post = x * self.keep + jumps + (x * self.small_var).sqrt() * gauss;
                JumpDraw {
                    delta: post.max(0.0) - x,
                    clamped: post < 0.0,
                }
            })
            .collect()
    }
}

/// `E[e^{−λ ΔX} | X(t−) = x] = e^{(λ − v_{t−,t}(λ)) x}`.
pub fn jump_laplace_target(law: &AtomJumpLaw, x: f64, lambda: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok((law.exponent(lambda)? * x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn drift_only_is_deterministic() {
        let law = AtomJumpLaw::new(1.0, 0.4, None, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = law.sample_jump(2.0, &mut rng);
        assert!((d.delta + 0.8).abs() < 1e-15);
        assert!(!d.clamped);
    }

    #[test]
    fn bottleneck_sends_state_to_zero() {
        let law = AtomJumpLaw::new(1.0, 1.0, Some(LevyMeasureSpec::empty()), None).unwrap();
        assert!(law.is_bottleneck());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for x in [0.3, 1.0, 1e6] {
            assert_eq!(x + law.sample_jump(x, &mut rng).delta, 0.0);
        }
        assert!((jump_laplace_target(&law, 2.0, 0.5).unwrap() - 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn coupled_draws_are_ordered() {
        let nu = LevyMeasureSpec::finite_atoms(vec![[0.5, 1.0], [3.0, 0.4]]);
        let law = AtomJumpLaw::new(1.0, 0.3, Some(nu), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = [0.2, 1.0, 1.0, 4.0];
        for _ in 0..1000 {
            let d = law.sample_coupled(&xs, &[f64::INFINITY; 4], &mut rng);
            let post: Vec<f64> = xs.iter().zip(&d).map(|(x, d)| x + d.delta).collect();
            assert!(post.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(post[1], post[2]);
        }
    }

    #[test]
    fn compound_poisson_mean_is_compensated() {
        let theta = 0.5;
        let nu = LevyMeasureSpec::finite_atoms(vec![[1.0, theta]]);
        let law = AtomJumpLaw::new(1.0, 0.0, Some(nu), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| law.sample_jump(1.0, &mut rng).delta).sum::<f64>() / n as f64;
        // Var ΔX = x θ
        assert!(mean.abs() < 4.0 * (theta / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn power_law_uses_gaussian_for_small_jumps() {
        // ∫₀¹ z ν = 0.4 keeps the atom weakly admissible.
        let nu = LevyMeasureSpec::power_law(0.2, 0.5, Some(5.0));
        let law = AtomJumpLaw::new(1.0, 0.1, Some(nu), None).unwrap();
        assert!((law.eps - 1e-3).abs() < 1e-18);
        assert!(law.gaussian_error_scale(1.0).unwrap() > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let lambda = 1.0;
        let emp: f64 = (0..n)
            .map(|_| (-lambda * law.sample_jump(1.0, &mut rng).delta).exp())
            .sum::<f64>()
            / n as f64;
        let target = jump_laplace_target(&law, 1.0, lambda).unwrap();
        assert!((emp - target).abs() < 0.02 * target, "{emp} vs {target}");
    }
}
