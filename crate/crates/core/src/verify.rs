//! Randomized certification of the learning-rate inequalities.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::rate::{check_lemma1, check_lemma2, eval_f, rule1_trajectory, rule2_trajectory, theorem3_rhs, Bound, Rule, SpbSequences};
use crate::rng::{stream_rng, StreamRole};

/// Smallest penalty value drawn by [`random_sequences`].
pub const H_FLOOR: f64 = 1e-3;

/// Pass count and the tightest observed `lhs / rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tally {
    pub checked: usize,
    pub passed: usize,
    /// Largest `lhs / rhs` (0 when both sides vanish).
    pub worst_ratio: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            checked: 0,
            passed: 0,
            worst_ratio: 0.0,
        }
    }

    fn record(&mut self, b: &Bound) {
        self.checked += 1;
        if b.holds() {
            self.passed += 1;
        }
        let ratio = if b.rhs > 0.0 {
            b.lhs / b.rhs
        } else if b.lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        self.worst_ratio = self.worst_ratio.max(ratio);
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.checked
    }
}

/// `F / RHS` statistics of the final bound at one `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioStat {
    pub rule: Rule,
    pub epsilon: String,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub horizon: usize,
    pub random_instances: usize,
    pub lemma1_rule1: Tally,
    pub lemma1_rule2: Tally,
    /// Rule 1 and Rule 2 trajectories satisfied their lower bounds on `beta`.
    pub beta_lower_bounds: Tally,
    /// One entry per `J` in `0..=3`, covering the partition bound and both
    /// branches of the min-bound.
    pub lemma2: Vec<(u32, Tally)>,
    pub theorem3: Vec<RatioStat>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.lemma1_rule1.all_passed()
            && self.lemma1_rule2.all_passed()
            && self.beta_lower_bounds.all_passed()
            && self.lemma2.iter().all(|(_, t)| t.all_passed())
    }
}

/// `z`, `u` uniform on `(0, 1]` and `h` uniform on `[H_FLOOR, 1]`; `h` has
/// `len + 1` entries so Rule 2 can read `h_{T+1}`.
pub fn random_sequences<R: Rng + ?Sized>(len: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let open = |rng: &mut R| 1.0 - rng.random::<f64>();
    let z = (0..len).map(|_| open(rng)).collect();
    let u = (0..len).map(|_| open(rng)).collect();
    let h = (0..=len).map(|_| rng.random_range(H_FLOOR..=1.0)).collect();
    (z, u, h)
}

struct Instance {
    z: Vec<f64>,
    u: Vec<f64>,
    h: Vec<f64>,
    beta1: f64,
}

/// Runs every check on `instances` random sequences of length `horizon`
/// plus two fixed stress cases: all-zero sequences and `h` alternating
/// between 1 and 1e-6.
pub fn verify_lemmas(seed: u64, instances: usize, horizon: usize) -> Result<LemmaReport> {
    let mut rng = stream_rng(seed, 0, StreamRole::Agent);
    let mut cases: Vec<Instance> = (0..instances)
        .map(|_| {
            let (z, u, h) = random_sequences(horizon, &mut rng);
            let beta1 = rng.random_range(0.1..10.0);
            Instance { z, u, h, beta1 }
        })
        .collect();
    cases.push(Instance {
        z: vec![0.0; horizon],
        u: vec![0.0; horizon],
        h: vec![1.0; horizon + 1],
        beta1: 1.0,
    });
    cases.push(Instance {
        z: vec![1.0; horizon],
        u: vec![1.0; horizon],
        h: (0..=horizon).map(|t| if t % 2 == 0 { 1.0 } else { 1e-6 }).collect(),
        beta1: 1.0,
    });

    let mut r1 = Tally::new();
    let mut r2 = Tally::new();
    let mut lower = Tally::new();
    let mut l2: Vec<(u32, Tally)> = (0..=3).map(|j| (j, Tally::new())).collect();
    let eps_labels = ["1/T", "1", "T^(1/4)"];
    let mut ratios: Vec<(Rule, usize, f64, f64)> = Vec::new();
    for rule in [Rule::One, Rule::Two] {
        for e in 0..eps_labels.len() {
            ratios.push((rule, e, 0.0, 0.0));
        }
    }

    for c in &cases {
        let rep1 = check_lemma1(&c.z, &c.u, &c.h, Rule::One, c.beta1)?;
        r1.record(&rep1.bound);
        let rep2 = check_lemma1(&c.z, &c.u, &c.h, Rule::Two, c.beta1)?;
        r2.record(&rep2.bound);
        for ok in [rep1.beta_lower_bounds_hold, rep2.beta_lower_bounds_hold] {
            lower.record(&Bound {
                lhs: if ok { 0.0 } else { 1.0 },
                rhs: 0.0,
            });
        }
        for (j, tally) in l2.iter_mut() {
            let rep = check_lemma2(&c.z, &c.h[..horizon], *j)?;
            for b in [rep.partition, rep.j_branch, rep.hmax_branch] {
                tally.record(&b);
            }
        }
        if horizon > 0 {
            let n = horizon as f64;
            let eps = [1.0 / n, 1.0, n.powf(0.25)];
            let h = &c.h[..horizon];
            let f1 = eval_f(&SpbSequences::new(
                c.z.clone(),
                c.u.clone(),
                h.to_vec(),
                rule1_trajectory(&c.z, &c.u, h)?,
            )?);
            let f2 = eval_f(&SpbSequences::new(
                c.z.clone(),
                c.u.clone(),
                h.to_vec(),
                rule2_trajectory(&c.z, &c.u, &c.h, c.beta1)?,
            )?);
            for entry in ratios.iter_mut() {
                let (rule, e, ref mut max, ref mut sum) = *entry;
                let f = if rule == Rule::One { f1 } else { f2 };
                let rhs = theorem3_rhs(&c.z, &c.u, &c.h, rule, c.beta1, eps[e])?;
                let ratio = if rhs > 0.0 { f / rhs } else { 0.0 };
                *max = max.max(ratio);
                *sum += ratio;
            }
        }
    }

    let n_cases = cases.len() as f64;
    Ok(LemmaReport {
        seed,
        horizon,
        random_instances: instances,
        lemma1_rule1: r1,
        lemma1_rule2: r2,
        beta_lower_bounds: lower,
        lemma2: l2,
        theorem3: ratios
            .into_iter()
            .map(|(rule, e, max, sum)| RatioStat {
                rule,
                epsilon: eps_labels[e].to_string(),
                max_ratio: max,
                mean_ratio: sum / n_cases,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let rep = verify_lemmas(1, 50, 40).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        assert_eq!(rep.lemma1_rule1.checked, 52);
        assert_eq!(rep.theorem3.len(), 6);
    }

    #[test]
    fn zero_horizon_is_trivial() {
        let rep = verify_lemmas(1, 3, 0).unwrap();
        assert!(rep.all_passed());
        assert_eq!(rep.lemma1_rule1.worst_ratio, 0.0);
    }
}
