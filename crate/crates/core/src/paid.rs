//! Multi-armed bandits with paid observations.
//!
//! The learner plays `p_t = q_t` with no forced exploration and instead buys
//! each arm's loss independently with probability `r_t`, paying `cost` per
//! observed arm.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftrl::{leader_components, ProbVector};
use crate::pm::AgentParams;
use crate::rate::default_alpha;

/// Arm count and uniform observation cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaidConfig {
    pub arms: usize,
    pub cost: f64,
}

impl PaidConfig {
    pub fn new(arms: usize, cost: f64) -> Result<Self> {
        if arms < 2 {
            return Err(Error::domain("paid observations need at least two arms"));
        }
        if !(cost >= 0.0) || !cost.is_finite() {
            return Err(Error::domain(format!("cost must be non-negative, got {cost}")));
        }
        Ok(PaidConfig { arms, cost })
    }

    pub fn default_params(&self) -> AgentParams {
        let k = self.arms as f64;
        let alpha = default_alpha(self.arms);
        let beta1 = 64.0 * self.cost.max(1.0) * k / (1.0 - alpha);
        let beta_bar = 32.0 * k * self.cost.sqrt() / ((1.0 - alpha).powi(2) * beta1.sqrt());
        AgentParams {
            alpha,
            beta1,
            beta_bar,
        }
    }
}

/// Observation rate `sqrt(z/beta) + u/beta`; fails with
/// [`Error::RTooLarge`] above 1/2.
pub fn paid_rate(z: f64, u: f64, beta: f64) -> Result<f64> {
    let r = crate::rate::raw_rate(z, u, beta)?.gamma;
    if r > 0.5 {
        return Err(Error::RTooLarge(r));
    }
    Ok(r)
}

/// Includes each arm independently with probability `r`.
pub fn draw_observation_set<R: Rng + ?Sized>(r: f64, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(format!("observation rate {r} outside [0,1]")));
    }
    Ok((0..k).filter(|_| rng.random_bool(r)).collect())
}

/// `losses[i] / r` on the observed set and 0 elsewhere.
pub fn paid_loss_estimate(r: f64, observed: &[usize], losses: &[f64]) -> Result<Vec<f64>> {
    let mut est = vec![0.0; losses.len()];
    if observed.is_empty() {
        return Ok(est);
    }
    if !(r > 0.0) {
        return Err(Error::domain("observations purchased at rate zero"));
    }
    for &i in observed {
        let slot = est
            .get_mut(i)
            .ok_or_else(|| Error::domain(format!("arm {i} out of range")))?;
        *slot = losses[i] / r;
    }
    Ok(est)
}

/// Stability and bias components for paid observations.
pub fn paid_zu(q: &ProbVector, alpha: f64, cfg: &PaidConfig) -> (f64, f64) {
    let (s, gap) = leader_components(q, alpha);
    let k = cfg.arms as f64;
    (
        4.0 * cfg.cost * k / (1.0 - alpha) * s,
        8.0 * cfg.cost.max(1.0) / (1.0 - alpha) * gap,
    )
}

/// `|observed| * cost`.
pub fn paid_round_cost(observed: &[usize], cost: f64) -> f64 {
    observed.len() as f64 * cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rate_examples() {
        assert_eq!(paid_rate(1.0, 0.0, 4.0).unwrap(), 0.5);
        assert_eq!(paid_rate(0.0, 0.0, 4.0).unwrap(), 0.0);
        assert_eq!(paid_rate(1.0, 1.0, 1.0), Err(Error::RTooLarge(2.0)));
    }

    #[test]
    fn observation_set_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(draw_observation_set(1.0, 5, &mut rng).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(draw_observation_set(0.0, 5, &mut rng).unwrap().is_empty());
        assert!(draw_observation_set(1.5, 5, &mut rng).is_err());
    }

    #[test]
    fn observation_set_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            for i in draw_observation_set(0.5, 4, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((0.495..=0.505).contains(&f), "frequency {f}");
        }
    }

    #[test]
    fn estimate_examples() {
        let l = [0.3, 0.5, 0.9];
        assert_eq!(paid_loss_estimate(1.0, &[0, 1, 2], &l).unwrap(), l.to_vec());
        assert_eq!(paid_loss_estimate(0.25, &[1], &l).unwrap(), vec![0.0, 2.0, 0.0]);
        assert_eq!(paid_loss_estimate(0.0, &[], &l).unwrap(), vec![0.0; 3]);
        assert!(paid_loss_estimate(0.0, &[1], &l).is_err());
        // two-point expectation
        for r in [0.1, 0.37, 0.5] {
            let est = paid_loss_estimate(r, &[2], &l).unwrap();
            assert_abs_diff_eq!(r * est[2] + (1.0 - r) * 0.0, l[2], epsilon = 1e-15);
        }
    }

    #[test]
    fn zu_examples() {
        let cfg = PaidConfig::new(2, 1.0).unwrap();
        assert_eq!(paid_zu(&ProbVector::vertex(2, 0), 0.5, &cfg), (0.0, 0.0));
        let (z, u) = paid_zu(&ProbVector::uniform(2), 0.5, &cfg);
        assert_abs_diff_eq!(z, 11.3137, epsilon = 1e-3);
        assert_abs_diff_eq!(u, 11.31371, epsilon = 1e-4);
        let free = PaidConfig::new(2, 0.0).unwrap();
        let (z0, u0) = paid_zu(&ProbVector::uniform(2), 0.5, &free);
        assert_eq!(z0, 0.0);
        assert_abs_diff_eq!(u0, 16.0 * 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn cost_examples() {
        assert_eq!(paid_round_cost(&[], 0.7), 0.0);
        assert_abs_diff_eq!(paid_round_cost(&[0, 2, 3], 0.2), 0.6, epsilon = 1e-15);
        assert_eq!(paid_round_cost(&[0, 1], 0.0), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(PaidConfig::new(1, 1.0).is_err());
        assert!(PaidConfig::new(3, -0.1).is_err());
        let p = PaidConfig::new(4, 1.0).unwrap().default_params();
        assert!(p.beta1 >= 64.0 * 4.0 / (1.0 - p.alpha) - 1e-9);
    }
}
