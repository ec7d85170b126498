//! Loss and outcome generators for stochastic, switching adversarial and
//! corrupted stochastic regimes.
//!
//! All generators are oblivious: the whole sequence is fixed by the [`EnvSpec`] and
//! the environment random stream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftrl::ProbVector;

/// Per-round expected feedback source: Bernoulli means per arm, or an
/// outcome distribution for partial monitoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Means(Vec<f64>),
    Outcomes(ProbVector),
}

impl Profile {
    fn dim(&self) -> usize {
        match self {
            Profile::Means(m) => m.len(),
            Profile::Outcomes(p) => p.len(),
        }
    }

    fn check(&self) -> Result<()> {
        if let Profile::Means(m) = self {
            if m.is_empty() || m.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Config("means must be non-empty and lie in [0,1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub length: u64,
    pub profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum EnvSpec {
    Stochastic {
        profile: Profile,
    },
    /// Phases run in order and repeat cyclically.
    AdversarialSwitching {
        phases: Vec<Phase>,
    },
    /// For the first `budget` rounds the base-optimal action gets loss 1 and
    /// the decoy (default: second best) gets loss 0.
    Corrupted {
        base: Profile,
        budget: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decoy: Option<usize>,
    },
}

impl EnvSpec {
    /// Phases of length `horizon / n_phases` (at least 1) whose best arm
    /// rotates: in phase `m`, arm `m mod k` has mean `low` and the rest `high`.
    pub fn rotating_switching(k: usize, horizon: u64, n_phases: usize, low: f64, high: f64) -> Self {
        let length = (horizon / n_phases as u64).max(1);
        let phases = (0..n_phases)
            .map(|m| {
                let mut means = vec![high; k];
                means[m % k] = low;
                Phase {
                    length,
                    profile: Profile::Means(means),
                }
            })
            .collect();
        EnvSpec::AdversarialSwitching { phases }
    }

    fn profiles(&self) -> Vec<&Profile> {
        match self {
            EnvSpec::Stochastic { profile } => vec![profile],
            EnvSpec::AdversarialSwitching { phases } => phases.iter().map(|p| &p.profile).collect(),
            EnvSpec::Corrupted { base, .. } => vec![base],
        }
    }

    /// Checks ranges and that every profile has the same kind and width.
    pub fn check(&self) -> Result<()> {
        if let EnvSpec::AdversarialSwitching { phases } = self {
            if phases.is_empty() || phases.iter().any(|p| p.length == 0) {
                return Err(Error::Config("switching phases must be non-empty with positive lengths".into()));
            }
        }
        let profiles = self.profiles();
        let first = profiles[0];
        for p in &profiles {
            p.check()?;
            if std::mem::discriminant(*p) != std::mem::discriminant(first) || p.dim() != first.dim() {
                return Err(Error::Config("all profiles must share kind and dimension".into()));
            }
        }
        Ok(())
    }

    /// True when the environment draws PM outcomes rather than loss vectors.
    pub fn is_outcome_based(&self) -> bool {
        matches!(self.profiles()[0], Profile::Outcomes(_))
    }
}

/// One round's realized feedback source.
#[derive(Debug, Clone, PartialEq)]
pub enum Draw {
    Losses(Vec<f64>),
    Outcome(usize),
}

fn argmin_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// A running environment owning its random stream.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvSpec,
    loss_matrix: Option<Vec<Vec<f64>>>,
    k: usize,
    rng: ChaCha8Rng,
    round: u64,
    corruption: Option<Corruption>,
}

#[derive(Debug, Clone, Copy)]
struct Corruption {
    budget: u64,
    target: usize,
    decoy: usize,
    // PM: outcome that most favors the decoy over the target
    outcome: usize,
}

impl Environment {
    /// `loss_matrix` is the PM loss matrix (actions x outcomes) and is
    /// required exactly when the environment draws outcomes. `k` is the number of
    /// actions.
    pub fn new(spec: EnvSpec, loss_matrix: Option<Vec<Vec<f64>>>, k: usize, rng: ChaCha8Rng) -> Result<Self> {
        spec.check()?;
        let dim = spec.profiles()[0].dim();
        match (&loss_matrix, spec.is_outcome_based()) {
            (Some(l), true) => {
                if l.len() != k || l.iter().any(|r| r.len() != dim) {
                    return Err(Error::Config("outcome distribution does not match the game".into()));
                }
            }
            (None, false) => {
                if dim != k {
                    return Err(Error::Config(format!("environment has {dim} arms, problem has {k}")));
                }
            }
            _ => {
                return Err(Error::Config(
                    "outcome profiles go with partial monitoring, means with bandits".into(),
                ))
            }
        }
        let mut env = Environment {
            spec,
            loss_matrix,
            k,
            rng,
            round: 0,
            corruption: None,
        };
        if let EnvSpec::Corrupted { base, budget, decoy } = &env.spec {
            let means = env.profile_means(base);
            let target = argmin_first(&means);
            let decoy = match decoy {
                Some(d) if *d >= k || *d == target => {
                    return Err(Error::Config(format!("invalid decoy action {d}")));
                }
                Some(d) => *d,
                None => {
                    let mut masked = means.clone();
                    masked[target] = f64::INFINITY;
                    argmin_first(&masked)
                }
            };
            let outcome = match &env.loss_matrix {
                Some(l) => {
                    let gains: Vec<f64> = l[target].iter().zip(&l[decoy]).map(|(a, b)| b - a).collect();
                    argmin_first(&gains)
                }
                None => 0,
            };
            env.corruption = Some(Corruption {
                budget: *budget,
                target,
                decoy,
                outcome,
            });
        }
        Ok(env)
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn actions(&self) -> usize {
        self.k
    }

    /// Rounds drawn so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    fn profile_means(&self, p: &Profile) -> Vec<f64> {
        match p {
            Profile::Means(m) => m.clone(),
            Profile::Outcomes(dist) => self
                .loss_matrix
                .as_ref()
                .expect("checked at construction")
                .iter()
                .map(|row| dist.dot(row))
                .collect(),
        }
    }

    fn active_profile(&self, t: u64) -> &Profile {
        match &self.spec {
            EnvSpec::Stochastic { profile } => profile,
            EnvSpec::Corrupted { base, .. } => base,
            EnvSpec::AdversarialSwitching { phases } => {
                let cycle: u64 = phases.iter().map(|p| p.length).sum();
                let mut pos = (t - 1) % cycle;
                for p in phases {
                    if pos < p.length {
                        return &p.profile;
                    }
                    pos -= p.length;
                }
                unreachable!("position lies within one cycle")
            }
        }
    }

    fn corrupted(&self, t: u64) -> Option<Corruption> {
        self.corruption.filter(|c| t <= c.budget)
    }

    /// Expected loss of every action in round `t >= 1`, corruption included.
    pub fn mean_losses(&self, t: u64) -> Vec<f64> {
        if let Some(c) = self.corrupted(t) {
            return match &self.loss_matrix {
                Some(l) => l.iter().map(|row| row[c.outcome]).collect(),
                None => {
                    let mut m = self.profile_means(self.active_profile(t));
                    m[c.target] = 1.0;
                    m[c.decoy] = 0.0;
                    m
                }
            };
        }
        self.profile_means(self.active_profile(t))
    }

    /// Draws the next round.
    pub fn next_draw(&mut self) -> Draw {
        self.round += 1;
        let t = self.round;
        let draw = match self.active_profile(t).clone() {
            Profile::Means(m) => Draw::Losses(
                m.iter()
                    .map(|&mu| if self.rng.random::<f64>() < mu { 1.0 } else { 0.0 })
                    .collect(),
            ),
            Profile::Outcomes(dist) => {
                let u: f64 = self.rng.random();
                let mut acc = 0.0;
                let mut x = dist.len() - 1;
                for (i, &p) in dist.as_slice().iter().enumerate() {
                    acc += p;
                    if u < acc {
                        x = i;
                        break;
                    }
                }
                Draw::Outcome(x)
            }
        };
        match (self.corrupted(t), draw) {
            (Some(c), Draw::Losses(mut l)) => {
                l[c.target] = 1.0;
                l[c.decoy] = 0.0;
                Draw::Losses(l)
            }
            (Some(c), Draw::Outcome(_)) => Draw::Outcome(c.outcome),
            (None, d) => d,
        }
    }
}

/// Best fixed action over `horizon` rounds by expected cumulative loss
/// (smallest index on ties) and its per-round expected losses.
pub fn comparator_loss(env: &Environment, horizon: u64) -> (usize, Vec<f64>) {
    let mut totals = vec![0.0; env.k];
    for t in 1..=horizon {
        for (acc, m) in totals.iter_mut().zip(env.mean_losses(t)) {
            *acc += m;
        }
    }
    let a_star = argmin_first(&totals);
    let per_round = (1..=horizon).map(|t| env.mean_losses(t)[a_star]).collect();
    (a_star, per_round)
}
