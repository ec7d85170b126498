//! Stability–penalty–bias matching learning rates.
//!
//! Both update rules raise `beta` so that the per-round penalty increment
//! `(beta_t - beta_{t-1}) * h_hat_t` equals the stability-plus-bias cost
//! `2 sqrt(z/beta) + u/beta`. Rule 1 evaluates that cost at the new `beta_t`
//! (an implicit equation); Rule 2 uses the previous round's quantities and is
//! what the online agents run.
//!
//! The functionals [`eval_f`], [`eval_g1`] and [`eval_g2`] and the `check_*`
//! functions certify the resulting regret-bound inequalities numerically.

use serde::Serialize;

use crate::error::{Error, Result};

fn check_finite(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::domain(format!("{name} must be finite, got {x}")));
    }
    Ok(())
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    check_finite(name, x)?;
    if x < 0.0 {
        return Err(Error::domain(format!("{name} must be non-negative, got {x}")));
    }
    Ok(())
}

/// `2 sqrt(z/beta) + u/beta`, with zero-numerator terms contributing zero
/// even when `beta = 0`.
fn stability_bias(z: f64, u: f64, beta: f64) -> f64 {
    let a = if z > 0.0 { 2.0 * (z / beta).sqrt() } else { 0.0 };
    let b = if u > 0.0 { u / beta } else { 0.0 };
    a + b
}

/// Default Tsallis exponent: `1 - 1/ln k` for `k >= 3` and `1/2` for `k = 2`,
/// where the logarithmic formula would fall outside `(0, 1)`.
pub fn default_alpha(k: usize) -> f64 {
    if k >= 3 {
        1.0 - 1.0 / (k as f64).ln()
    } else {
        0.5
    }
}

/// Learning-rate state of one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpbState {
    alpha: f64,
    beta1: f64,
    beta_bar: f64,
    beta: f64,
    last_h: f64,
    round: u64,
}

impl SpbState {
    pub fn new(alpha: f64, beta1: f64, beta_bar: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha {alpha} outside (0,1)")));
        }
        if !(beta1 > 0.0) || !beta1.is_finite() {
            return Err(Error::domain(format!("beta1 must be positive, got {beta1}")));
        }
        check_nonneg("beta_bar", beta_bar)?;
        Ok(SpbState {
            alpha,
            beta1,
            beta_bar,
            beta: beta1,
            last_h: 0.0,
            round: 1,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta_bar(&self) -> f64 {
        self.beta_bar
    }

    /// Current `beta_t`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Penalty estimate `h_hat` that the next update will use.
    pub fn last_h(&self) -> f64 {
        self.last_h
    }

    /// Index `t` of the round whose `beta_t` is current.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// Stores `h_t` as the penalty estimate for the next update.
    pub fn observe_entropy(&mut self, h: f64) -> Result<()> {
        check_finite("h", h)?;
        if !(h > 0.0) {
            return Err(Error::domain(format!("penalty component must be positive, got {h}")));
        }
        self.last_h = h;
        Ok(())
    }

    /// Rule 2 step using the stored penalty estimate; advances the round.
    pub fn rule2_update(&mut self, z_prev: f64, u_prev: f64) -> Result<f64> {
        if !(self.last_h > 0.0) {
            return Err(Error::domain("no penalty estimate recorded before the update"));
        }
        let next = rule2_step(self.beta, self.last_h, z_prev, u_prev)?;
        self.beta = next;
        self.round += 1;
        Ok(next)
    }

    /// One round of the online agent: records `h_t` and moves to `beta_{t+1}`.
    pub fn advance(&mut self, h: f64, z: f64, u: f64) -> Result<f64> {
        self.observe_entropy(h)?;
        self.rule2_update(z, u)
    }
}

/// `beta_prev + (2 sqrt(z_prev/beta_prev) + u_prev/beta_prev) / h_hat`.
pub fn rule2_step(beta_prev: f64, h_hat: f64, z_prev: f64, u_prev: f64) -> Result<f64> {
    check_finite("beta", beta_prev)?;
    check_finite("h_hat", h_hat)?;
    check_nonneg("z", z_prev)?;
    check_nonneg("u", u_prev)?;
    if !(beta_prev > 0.0) {
        return Err(Error::domain("Rule 2 needs a positive previous beta"));
    }
    if !(h_hat > 0.0) {
        return Err(Error::domain("Rule 2 needs a positive penalty estimate"));
    }
    Ok(beta_prev + stability_bias(z_prev, u_prev, beta_prev) / h_hat)
}

/// Solves the implicit Rule 1 equation
/// `beta = beta_prev + (2 sqrt(z/beta) + u/beta) / h_hat` for `beta >= beta_prev`.
pub fn rule1_update(beta_prev: f64, h_hat: f64, z: f64, u: f64) -> Result<f64> {
    check_nonneg("beta_prev", beta_prev)?;
    check_finite("h_hat", h_hat)?;
    check_nonneg("z", z)?;
    check_nonneg("u", u)?;
    if !(h_hat > 0.0) {
        return Err(Error::domain("Rule 1 needs a positive penalty estimate"));
    }
    if z == 0.0 && u == 0.0 {
        return Ok(beta_prev);
    }
    // r is increasing in beta; r(hi) >= 0 because hi >= 1 and hi - beta_prev
    // exceeds (2 sqrt z + u)/h_hat, which dominates the increment for beta >= 1.
    let r = |beta: f64| beta - beta_prev - stability_bias(z, u, beta) / h_hat;
    let mut lo = beta_prev;
    let mut hi = beta_prev + (2.0 * z.sqrt() + u) / h_hat + 1.0;
    if lo == 0.0 {
        lo = f64::MIN_POSITIVE;
    }
    const MAX_ITER: usize = 400;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if r(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = if r(lo).abs() < r(hi).abs() { lo } else { hi };
    let residual = r(beta).abs();
    if residual > 1e-10 * beta.max(1.0) {
        return Err(Error::NoConvergence {
            iterations: MAX_ITER,
            residual,
        });
    }
    Ok(beta)
}

/// Exploration rate `gamma = gamma' + u/beta` with `gamma' = sqrt(z/beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExplorationRate {
    pub gamma: f64,
    pub gamma_prime: f64,
}

/// Computes the unchecked rate `sqrt(z/beta) + u/beta`.
pub fn raw_rate(z: f64, u: f64, beta: f64) -> Result<ExplorationRate> {
    check_nonneg("z", z)?;
    check_nonneg("u", u)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    let gamma_prime = (z / beta).sqrt();
    Ok(ExplorationRate {
        gamma: gamma_prime + u / beta,
        gamma_prime,
    })
}

/// Forced-exploration rate; fails with [`Error::GammaTooLarge`] above 1/2.
pub fn exploration_rate(z: f64, u: f64, beta: f64) -> Result<ExplorationRate> {
    let rate = raw_rate(z, u, beta)?;
    if rate.gamma > 0.5 {
        return Err(Error::GammaTooLarge(rate.gamma));
    }
    Ok(rate)
}

fn check_pairs(a: &[f64], h: &[f64]) -> Result<()> {
    if a.len() != h.len() {
        return Err(Error::domain("sequences must have equal length"));
    }
    for &x in a {
        check_nonneg("sequence entry", x)?;
    }
    for &x in h {
        check_finite("h", x)?;
        if !(x > 0.0) {
            return Err(Error::domain("penalty components must be positive"));
        }
    }
    Ok(())
}

/// `G1 = sum_t sqrt(z_t) / (sum_{s<=t} sqrt(z_s)/h_s)^(1/3)`.
pub fn eval_g1(z: &[f64], h: &[f64]) -> Result<f64> {
    check_pairs(z, h)?;
    let mut prefix = 0.0;
    let mut total = 0.0;
    for (&zt, &ht) in z.iter().zip(h) {
        let root = zt.sqrt();
        prefix += root / ht;
        if root > 0.0 {
            total += root / prefix.cbrt();
        }
    }
    Ok(total)
}

/// `G2 = sum_t u_t / sqrt(sum_{s<=t} u_s/h_s)`.
pub fn eval_g2(u: &[f64], h: &[f64]) -> Result<f64> {
    check_pairs(u, h)?;
    let mut prefix = 0.0;
    let mut total = 0.0;
    for (&ut, &ht) in u.iter().zip(h) {
        prefix += ut / ht;
        if ut > 0.0 {
            total += ut / prefix.sqrt();
        }
    }
    Ok(total)
}

/// Sequences entering the objective `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpbSequences {
    z: Vec<f64>,
    u: Vec<f64>,
    h: Vec<f64>,
    beta: Vec<f64>,
}

impl SpbSequences {
    /// Validates lengths and signs. `beta` must be non-decreasing and
    /// non-negative; `beta_t = 0` is only allowed while `z_t = u_t = 0`.
    pub fn new(z: Vec<f64>, u: Vec<f64>, h: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let n = z.len();
        if u.len() != n || h.len() != n || beta.len() != n {
            return Err(Error::domain("z, u, h and beta must have equal length"));
        }
        check_pairs(&z, &h)?;
        check_pairs(&u, &h)?;
        let mut prev = 0.0;
        for (t, &b) in beta.iter().enumerate() {
            check_nonneg("beta", b)?;
            if b < prev {
                return Err(Error::domain("beta sequence must be non-decreasing"));
            }
            if b == 0.0 && (z[t] > 0.0 || u[t] > 0.0) {
                return Err(Error::domain("beta_t = 0 with positive z_t or u_t"));
            }
            prev = b;
        }
        Ok(SpbSequences { z, u, h, beta })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// `F = sum_t [2 sqrt(z_t/beta_t) + u_t/beta_t + (beta_t - beta_{t-1}) h_t]`
/// with `beta_0 = 0`.
pub fn eval_f(seq: &SpbSequences) -> f64 {
    let mut prev = 0.0;
    let mut total = 0.0;
    for t in 0..seq.len() {
        let b = seq.beta[t];
        total += stability_bias(seq.z[t], seq.u[t], b) + (b - prev) * seq.h[t];
        prev = b;
    }
    total
}

/// Which SPB-matching rule generates the learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    One,
    Two,
}

/// Runs Rule 1 from `beta_0 = 0`.
pub fn rule1_trajectory(z: &[f64], u: &[f64], h_hat: &[f64]) -> Result<Vec<f64>> {
    let mut beta = 0.0;
    let mut out = Vec::with_capacity(z.len());
    for t in 0..z.len() {
        beta = rule1_update(beta, h_hat[t], z[t], u[t])?;
        out.push(beta);
    }
    Ok(out)
}

/// Runs Rule 2 from `beta_1`; `h_hat[t]` is the estimate used to form
/// `beta_{t+1}` (0-based storage of `h_hat_{2..T}` offset by one).
pub fn rule2_trajectory(z: &[f64], u: &[f64], h_hat: &[f64], beta1: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(z.len());
    if z.is_empty() {
        return Ok(out);
    }
    let mut beta = beta1;
    out.push(beta);
    for t in 1..z.len() {
        beta = rule2_step(beta, h_hat[t], z[t - 1], u[t - 1])?;
        out.push(beta);
    }
    Ok(out)
}

/// Both sides of a certified inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub lhs: f64,
    pub rhs: f64,
}

impl Bound {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// Holds up to floating rounding relative to the magnitudes involved.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-9 * (1.0 + self.rhs.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub rule: Rule,
    pub f: f64,
    pub g1: f64,
    pub g2: f64,
    pub bound: Bound,
    /// The proof's lower bounds on `beta_t` held along the trajectory.
    pub beta_lower_bounds_hold: bool,
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Generates learning rates with `rule` and checks the matching `F` bound.
///
/// `h_hat` doubles as the true penalty sequence. Rule 1 reads `h_hat[..T]`;
/// Rule 2 reads `h_hat[..=T]` because its bound involves `h_hat_{2..T+1}`.
pub fn check_lemma1(
    z: &[f64],
    u: &[f64],
    h_hat: &[f64],
    rule: Rule,
    beta1: f64,
) -> Result<Lemma1Report> {
    let n = z.len();
    if u.len() != n {
        return Err(Error::domain("z and u must have equal length"));
    }
    let needed = match rule {
        Rule::One => n,
        Rule::Two => n + 1,
    };
    if h_hat.len() < needed {
        return Err(Error::domain(format!(
            "penalty sequence too short: need {needed}, got {}",
            h_hat.len()
        )));
    }
    let h = &h_hat[..n];
    match rule {
        Rule::One => {
            let beta = rule1_trajectory(z, u, h)?;
            let seq = SpbSequences::new(z.to_vec(), u.to_vec(), h.to_vec(), beta.clone())?;
            let f = eval_f(&seq);
            let g1 = eval_g1(z, h)?;
            let g2 = eval_g2(u, h)?;
            Ok(Lemma1Report {
                rule,
                f,
                g1,
                g2,
                bound: Bound {
                    lhs: f,
                    rhs: 3.2 * g1 + 2.0 * g2,
                },
                beta_lower_bounds_hold: rule1_lower_bounds_hold(&beta, z, u, h),
            })
        }
        Rule::Two => {
            if n == 0 {
                return Ok(Lemma1Report {
                    rule,
                    f: 0.0,
                    g1: 0.0,
                    g2: 0.0,
                    bound: Bound { lhs: 0.0, rhs: 0.0 },
                    beta_lower_bounds_hold: true,
                });
            }
            let beta = rule2_trajectory(z, u, h_hat, beta1)?;
            let seq = SpbSequences::new(z.to_vec(), u.to_vec(), h.to_vec(), beta.clone())?;
            let f = eval_f(&seq);
            let shifted = &h_hat[1..=n];
            let g1 = eval_g1(z, shifted)?;
            let g2 = eval_g2(u, shifted)?;
            let rhs = 4.0 * g1
                + 3.0 * g2
                + 10.0 * (max_of(z) / beta1).sqrt()
                + 5.0 * max_of(u) / beta1
                + beta1 * h[0];
            Ok(Lemma1Report {
                rule,
                f,
                g1,
                g2,
                bound: Bound { lhs: f, rhs },
                beta_lower_bounds_hold: rule2_lower_bounds_hold(&beta, z, u, h_hat),
            })
        }
    }
}

/// `beta_t^(3/2) >= 2 sum_{s<=t} sqrt(z_s)/h_s` and
/// `beta_t^2 >= sum_{s<=t} u_s/h_s` along a Rule 1 trajectory.
pub fn rule1_lower_bounds_hold(beta: &[f64], z: &[f64], u: &[f64], h_hat: &[f64]) -> bool {
    let mut sz = 0.0;
    let mut su = 0.0;
    for t in 0..beta.len() {
        sz += 2.0 * z[t].sqrt() / h_hat[t];
        su += u[t] / h_hat[t];
        let b = beta[t];
        let tol = 1e-9 * (1.0 + b * b);
        if b.powf(1.5) + tol < sz || b * b + tol < su {
            return false;
        }
    }
    true
}

/// `beta_t^(3/2) >= beta_1^(3/2) + 2 sum_{s<t} sqrt(z_s)/h_hat_{s+1}` and
/// `beta_t^2 >= beta_1^2 + sum_{s<t} u_s/h_hat_{s+1}` along a Rule 2
/// trajectory (`h_hat[s]` holds `h_hat_{s+1}` in 0-based storage).
pub fn rule2_lower_bounds_hold(beta: &[f64], z: &[f64], u: &[f64], h_hat: &[f64]) -> bool {
    let Some(&b1) = beta.first() else {
        return true;
    };
    let mut sz = b1.powf(1.5);
    let mut su = b1 * b1;
    for t in 1..beta.len() {
        sz += 2.0 * z[t - 1].sqrt() / h_hat[t];
        su += u[t - 1] / h_hat[t];
        let b = beta[t];
        let tol = 1e-9 * (1.0 + b * b);
        if b.powf(1.5) + tol < sz || b * b + tol < su {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Report {
    pub j: u32,
    pub g1: f64,
    /// Dyadic partition bound with `theta_j = 2^-j h_max`.
    pub partition: Bound,
    /// First branch of the min-bound at the given `J`.
    pub j_branch: Bound,
    /// Second branch `(3/2) (sum_t sqrt(z_t h_max))^(2/3)`.
    pub hmax_branch: Bound,
}

impl Lemma2Report {
    pub fn holds(&self) -> bool {
        self.partition.holds() && self.j_branch.holds() && self.hmax_branch.holds()
    }

    /// Smallest slack over the three bounds.
    pub fn worst_slack(&self) -> f64 {
        self.partition
            .slack()
            .min(self.j_branch.slack())
            .min(self.hmax_branch.slack())
    }
}

/// Evaluates the `G1` upper bounds for a given partition depth `J`.
pub fn check_lemma2(z: &[f64], h: &[f64], j: u32) -> Result<Lemma2Report> {
    let g1 = eval_g1(z, h)?;
    let n = z.len();
    let h_max = max_of(h);
    let z_max = max_of(z);
    let two_thirds = 2.0 / 3.0;

    // theta_0 = h_max > theta_1 > ... > theta_J > theta_{J+1} = 0
    let theta = |m: u32| -> f64 {
        if m > j {
            0.0
        } else {
            h_max * 0.5f64.powi(m as i32)
        }
    };
    let mut bins = vec![0.0; j as usize + 1];
    for (&zt, &ht) in z.iter().zip(h) {
        // bin m (1-based) holds theta_{m-1} >= h_t > theta_m
        let mut m = 1;
        while m <= j && !(ht > theta(m)) {
            m += 1;
        }
        bins[(m - 1) as usize] += zt.sqrt();
    }
    let partition_rhs = 1.5
        * bins
            .iter()
            .enumerate()
            .map(|(idx, &s)| (theta(idx as u32).sqrt() * s).powf(two_thirds))
            .sum::<f64>();

    let weighted: f64 = z.iter().zip(h).map(|(&zt, &ht)| (zt * ht).sqrt()).sum();
    let j_rhs = 1.5
        * (((2.0 * j as f64).sqrt() * weighted).powf(two_thirds)
            + (0.5f64.powf(j as f64 / 2.0) * (z_max * h_max).sqrt()).powf(two_thirds)
                * (n as f64).powf(two_thirds));
    let hmax_rhs = 1.5
        * z.iter()
            .map(|&zt| (zt * h_max).sqrt())
            .sum::<f64>()
            .powf(two_thirds);

    Ok(Lemma2Report {
        j,
        g1,
        partition: Bound {
            lhs: g1,
            rhs: partition_rhs,
        },
        j_branch: Bound { lhs: g1, rhs: j_rhs },
        hmax_branch: Bound {
            lhs: g1,
            rhs: hmax_rhs,
        },
    })
}

/// Right-hand side of the final `F` bound for a given `epsilon >= 1/T`,
/// without the unspecified absolute constant. Rule 2 uses `h_hat_{t+1}`
/// and adds `sqrt(z_max/beta_1) + u_max/beta_1 + beta_1 h_1`.
pub fn theorem3_rhs(
    z: &[f64],
    u: &[f64],
    h_hat: &[f64],
    rule: Rule,
    beta1: f64,
    epsilon: f64,
) -> Result<f64> {
    let n = z.len();
    if n == 0 {
        return Ok(match rule {
            Rule::One => 0.0,
            Rule::Two => beta1 * h_hat.first().copied().unwrap_or(0.0),
        });
    }
    if epsilon * (n as f64) < 1.0 - 1e-12 {
        return Err(Error::domain("epsilon must be at least 1/T"));
    }
    let offset = match rule {
        Rule::One => 0,
        Rule::Two => 1,
    };
    if h_hat.len() < n + offset {
        return Err(Error::domain("penalty sequence too short"));
    }
    let hh = &h_hat[offset..n + offset];
    let h_max = max_of(&h_hat[..n + offset]);
    let z_max = max_of(z);
    let u_max = max_of(u);
    let log_term = (epsilon * n as f64).ln().max(0.0);
    let two_thirds = 2.0 / 3.0;

    let a1 = z
        .iter()
        .zip(hh)
        .map(|(&zt, &ht)| (zt * ht * log_term).sqrt())
        .sum::<f64>()
        .powf(two_thirds)
        + ((z_max * h_max).sqrt() / epsilon).powf(two_thirds);
    let a2 = z.iter().map(|&zt| (zt * h_max).sqrt()).sum::<f64>().powf(two_thirds);
    let b1 = (u.iter().zip(hh).map(|(&ut, &ht)| ut * ht * log_term).sum::<f64>()).sqrt()
        + (u_max * h_max / epsilon).sqrt();
    let b2 = (u.iter().map(|&ut| ut * h_max).sum::<f64>()).sqrt();
    let mut rhs = a1.min(a2) + b1.min(b2);
    if rule == Rule::Two {
        rhs += (z_max / beta1).sqrt() + u_max / beta1 + beta1 * h_hat[0];
    }
    Ok(rhs)
}
