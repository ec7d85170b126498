//! Follow-the-regularized-leader over the probability simplex with the
//! hybrid Tsallis-entropy regularizer.
//!
//! The FTRL step minimizes
//!
//! ```text
//! <L, p> + beta * (-H_alpha(p)) + beta_bar * (-H_{1-alpha}(p))
//! ```
//!
//! over the simplex. The objective is strictly convex and its gradient blows
//! up at the boundary, so the minimizer is unique and interior. It is found
//! from the stationarity conditions: for a multiplier `nu`, every coordinate
//! solves the scalar equation `g(q_i) = L_i + nu` with
//! `g(q) = beta q^(alpha-1) + beta_bar q^(-alpha)`, and `nu` is tuned so that
//! the coordinates sum to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(p) = 1` accepted by [`ProbVector::new`].
pub const SIMPLEX_TOL: f64 = 1e-9;

const OUTER_MAX_ITER: usize = 200;
const INNER_MAX_ITER: usize = 100;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates that `weights` is non-negative, finite and sums to one
    /// within [`SIMPLEX_TOL`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("probability vector must be non-empty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain(
                "probability vector entries must be finite and non-negative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::domain(format!(
                "probability vector sums to {total}, not 1"
            )));
        }
        Ok(ProbVector(weights))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform distribution needs k >= 1");
        ProbVector(vec![1.0 / k as f64; k])
    }

    /// The corner `e_i` of the simplex.
    pub fn vertex(k: usize, i: usize) -> Self {
        assert!(i < k, "vertex index out of range");
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        ProbVector(w)
    }

    /// Rescales non-negative weights to unit mass.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain(
                "cannot normalize: weights must be non-negative with positive mass",
            ));
        }
        Ok(ProbVector(weights.into_iter().map(|w| w / total).collect()))
    }

    /// `(1 - gamma) * self + gamma * other`.
    pub fn mix(&self, other: &ProbVector, gamma: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::domain("mixing distributions of different length"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain(format!("mixing rate {gamma} outside [0,1]")));
        }
        let w = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (1.0 - gamma) * a + gamma * b)
            .collect();
        Ok(ProbVector(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Inner product with a vector of the same length.
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(p, x)| p * x).sum()
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Vec<f64> {
        p.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("Tsallis exponent {alpha} outside (0,1)")));
    }
    Ok(())
}

/// Regularizer `beta * (-H_alpha) + beta_bar * (-H_{1-alpha})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridRegularizer {
    alpha: f64,
    beta: f64,
    beta_bar: f64,
}

impl HybridRegularizer {
    pub fn new(alpha: f64, beta: f64, beta_bar: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        if !(beta_bar >= 0.0) || !beta_bar.is_finite() {
            return Err(Error::domain(format!(
                "beta_bar must be non-negative, got {beta_bar}"
            )));
        }
        Ok(HybridRegularizer {
            alpha,
            beta,
            beta_bar,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The companion exponent `1 - alpha`.
    pub fn alpha_bar(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta_bar(&self) -> f64 {
        self.beta_bar
    }

    /// `g(q) = beta q^(alpha-1) + beta_bar q^(alpha_bar-1)`, evaluated from `ln q`.
    fn g_log(&self, s: f64) -> f64 {
        let a = self.beta * ((self.alpha - 1.0) * s).exp();
        if self.beta_bar > 0.0 {
            a + self.beta_bar * ((self.alpha_bar() - 1.0) * s).exp()
        } else {
            a
        }
    }

    /// `q * g'(q)`, evaluated from `ln q`. Always negative.
    fn q_g_prime_log(&self, s: f64) -> f64 {
        let a = (self.alpha - 1.0) * self.beta * ((self.alpha - 1.0) * s).exp();
        if self.beta_bar > 0.0 {
            let ab = self.alpha_bar();
            a + (ab - 1.0) * self.beta_bar * ((ab - 1.0) * s).exp()
        } else {
            a
        }
    }

    /// Solves `g(q) = y` for `ln q`. `y` must be positive.
    fn solve_coordinate(&self, y: f64) -> Result<f64> {
        let a1 = self.alpha - 1.0;
        // single-term solutions: beta q^(a1) = y and beta_bar q^(-alpha) = y
        let s_a = (y / self.beta).ln() / a1;
        if self.beta_bar == 0.0 {
            return Ok(s_a);
        }
        let s_b = (y / self.beta_bar).ln() / (-self.alpha);
        // Each term is below y at the root, so the root lies right of both
        // single-term solutions; each term is at least y/2 at one of the
        // half-level solutions, which bounds the root from the right.
        let mut lo = s_a.max(s_b);
        let mut hi = ((y / (2.0 * self.beta)).ln() / a1).max((y / (2.0 * self.beta_bar)).ln() / (-self.alpha));
        let mut s = lo;
        for _ in 0..INNER_MAX_ITER {
            let f = self.g_log(s) - y;
            if f.abs() <= 4.0 * f64::EPSILON * y {
                return Ok(s);
            }
            if f > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            // f is convex and decreasing in ln q; Newton from the left is monotone.
            let step = -f / self.q_g_prime_log(s);
            let next = s + step;
            s = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if (hi - lo).abs() <= 1e-15 * (1.0 + s.abs()) || step.abs() <= 1e-16 * (1.0 + s.abs()) {
                return Ok(s);
            }
        }
        let residual = (self.g_log(s) - y).abs();
        if residual <= 1e-12 * y {
            Ok(s)
        } else {
            Err(Error::NoConvergence {
                iterations: INNER_MAX_ITER,
                residual,
            })
        }
    }
}

fn raw_tsallis(p: &[f64], alpha: f64) -> f64 {
    p.iter().map(|&x| x.powf(alpha) - x).sum::<f64>() / alpha
}

/// Tsallis entropy `H_alpha(p) = (1/alpha) sum_i (p_i^alpha - p_i)`.
pub fn tsallis_entropy(p: &ProbVector, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(raw_tsallis(p.as_slice(), alpha).max(0.0))
}

/// Bregman divergence `D_{-H_alpha}(p, q)`; `q` must be strictly interior.
pub fn bregman_tsallis(p: &ProbVector, q: &ProbVector, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if p.len() != q.len() {
        return Err(Error::domain("Bregman divergence of vectors of different length"));
    }
    if q.as_slice().iter().any(|&x| x <= 0.0) {
        return Err(Error::domain(
            "Bregman divergence needs an interior reference point",
        ));
    }
    // psi = -H_alpha, grad psi(q)_i = 1/alpha - q_i^(alpha-1); the constant
    // part cancels against sum(p - q) = 0 up to rounding.
    let psi_p = -raw_tsallis(p.as_slice(), alpha);
    let psi_q = -raw_tsallis(q.as_slice(), alpha);
    let linear: f64 = p
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(&pi, &qi)| (1.0 / alpha - qi.powf(alpha - 1.0)) * (pi - qi))
        .sum();
    Ok((psi_p - psi_q - linear).max(0.0))
}

/// Minimizer of the FTRL objective with its Lagrange multiplier for the
/// simplex constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FtrlPoint {
    pub q: ProbVector,
    /// Multiplier `lambda` of the stationarity system, expressed for the
    /// unshifted loss vector that was passed to [`ftrl_solve`].
    pub lambda: f64,
}

/// Solves the FTRL step for cumulative loss `cumulative_loss`.
pub fn ftrl_solve(cumulative_loss: &[f64], reg: &HybridRegularizer) -> Result<FtrlPoint> {
    let k = cumulative_loss.len();
    if k < 2 {
        return Err(Error::domain("FTRL needs at least two actions"));
    }
    if cumulative_loss.iter().any(|l| !l.is_finite()) {
        return Err(Error::domain("cumulative loss contains non-finite values"));
    }
    let shift = cumulative_loss.iter().copied().fold(f64::INFINITY, f64::min);
    let losses: Vec<f64> = cumulative_loss.iter().map(|l| l - shift).collect();

    // Coordinates solve g(q_i) = losses_i + nu. At nu = g(1) the best
    // coordinate alone reaches 1; at nu = g(1/k) every coordinate is <= 1/k.
    let mut nu_lo = reg.beta + reg.beta_bar;
    let mut nu_hi = reg.g_log(-(k as f64).ln());

    let mut log_q = vec![0.0; k];
    let mass = |nu: f64, log_q: &mut [f64]| -> Result<(f64, f64)> {
        let mut sum = 0.0;
        let mut deriv = 0.0;
        for (s, &l) in log_q.iter_mut().zip(&losses) {
            *s = reg.solve_coordinate(l + nu)?;
            let q = s.exp();
            sum += q;
            // dq/dnu = 1 / g'(q) = q / (q g'(q))
            deriv += q / reg.q_g_prime_log(*s);
        }
        Ok((sum - 1.0, deriv))
    };

    let mut nu = nu_lo;
    let mut converged = false;
    let mut last_residual = f64::INFINITY;
    for _ in 0..OUTER_MAX_ITER {
        let (excess, deriv) = mass(nu, &mut log_q)?;
        last_residual = excess.abs();
        if last_residual <= 1e-15 * k as f64 {
            converged = true;
            break;
        }
        if excess > 0.0 {
            nu_lo = nu;
        } else {
            nu_hi = nu;
        }
        // The mass is convex and decreasing in nu.
        let step = -excess / deriv;
        let next = nu + step;
        nu = if next.is_finite() && next > nu_lo && next < nu_hi {
            next
        } else {
            0.5 * (nu_lo + nu_hi)
        };
        if step.abs() <= 1e-15 * nu.abs() || (nu_hi - nu_lo) <= 1e-15 * nu.abs() {
            let (excess, _) = mass(nu, &mut log_q)?;
            last_residual = excess.abs();
            converged = last_residual <= 1e-12;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: OUTER_MAX_ITER,
            residual: last_residual,
        });
    }

    let weights: Vec<f64> = log_q
        .iter()
        .map(|s| s.exp().max(f64::MIN_POSITIVE))
        .collect();
    let q = ProbVector::normalized(weights)?;
    let lambda = shift + reg.beta / reg.alpha + reg.beta_bar / reg.alpha_bar() - nu;
    Ok(FtrlPoint { q, lambda })
}

/// Largest absolute violation of the stationarity conditions at `point`.
pub fn kkt_residual(cumulative_loss: &[f64], reg: &HybridRegularizer, point: &FtrlPoint) -> f64 {
    let alpha = reg.alpha;
    let alpha_bar = reg.alpha_bar();
    cumulative_loss
        .iter()
        .zip(point.q.as_slice())
        .map(|(&l, &q)| {
            let grad = l
                + reg.beta * (1.0 / alpha - q.powf(alpha - 1.0))
                + reg.beta_bar * (1.0 / alpha_bar - q.powf(alpha_bar - 1.0));
            (grad - point.lambda).abs()
        })
        .fold(0.0, f64::max)
}

/// Leading coordinate (smallest index among ties) and the gap
/// `min(q_lead, 1 - q_lead)`.
pub fn leader_and_gap(q: &ProbVector) -> (usize, f64) {
    let mut lead = 0;
    for (i, &x) in q.as_slice().iter().enumerate() {
        if x > q[lead] {
            lead = i;
        }
    }
    let gap = q[lead].min(1.0 - q[lead]).max(0.0);
    (lead, gap)
}

/// Shared shape of the stability and bias components:
/// `(sum_{i != lead} q_i^(2-alpha) + q_*^(2-alpha), q_*^(1-alpha))`.
pub fn leader_components(q: &ProbVector, alpha: f64) -> (f64, f64) {
    let (lead, gap) = leader_and_gap(q);
    let off_leader: f64 = q
        .as_slice()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != lead)
        .map(|(_, &x)| x.powf(2.0 - alpha))
        .sum();
    (off_leader + gap.powf(2.0 - alpha), gap.powf(1.0 - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_vanishes_at_corners() {
        for k in 2..6 {
            let h = tsallis_entropy(&ProbVector::vertex(k, k - 1), 0.5).unwrap();
            assert_eq!(h, 0.0);
        }
    }

    #[test]
    fn entropy_uniform_closed_form() {
        let h = tsallis_entropy(&ProbVector::uniform(4), 0.5).unwrap();
        assert_abs_diff_eq!(h, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_two_point() {
        let h = tsallis_entropy(&pv(&[0.75, 0.25]), 0.5).unwrap();
        assert_abs_diff_eq!(h, 0.73205, epsilon = 1e-6);
    }

    #[test]
    fn entropy_rejects_bad_alpha() {
        let p = ProbVector::uniform(3);
        assert!(matches!(tsallis_entropy(&p, 1.0), Err(Error::Domain(_))));
        assert!(matches!(tsallis_entropy(&p, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.5 + 1e-10]).is_ok());
    }

    #[test]
    fn bregman_examples() {
        let u = ProbVector::uniform(2);
        assert_abs_diff_eq!(bregman_tsallis(&u, &u, 0.5).unwrap(), 0.0, epsilon = 1e-12);
        // 30-digit evaluation of the defining formula: 0.0963763171773...
        let d = bregman_tsallis(&pv(&[0.25, 0.75]), &u, 0.5).unwrap();
        assert_abs_diff_eq!(d, 0.0963763, epsilon = 1e-6);
        let d = bregman_tsallis(&pv(&[1.0, 0.0]), &u, 0.5).unwrap();
        assert_abs_diff_eq!(d, 0.82843, epsilon = 1e-5);
    }

    #[test]
    fn bregman_needs_interior_reference() {
        let e = ProbVector::vertex(2, 0);
        assert!(bregman_tsallis(&ProbVector::uniform(2), &e, 0.5).is_err());
    }

    #[test]
    fn zero_loss_gives_uniform() {
        let reg = HybridRegularizer::new(0.3, 2.0, 0.7).unwrap();
        let point = ftrl_solve(&[0.0; 5], &reg).unwrap();
        for &x in point.q.as_slice() {
            assert_abs_diff_eq!(x, 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_arm_instance_favors_low_loss() {
        let reg = HybridRegularizer::new(0.5, 1.0, 0.0).unwrap();
        let point = ftrl_solve(&[0.0, 10.0], &reg).unwrap();
        assert!(point.q[0] > 0.9);
        assert!(kkt_residual(&[0.0, 10.0], &reg, &point) <= 1e-8);
    }

    #[test]
    fn ftrl_rejects_bad_input() {
        let reg = HybridRegularizer::new(0.5, 1.0, 0.0).unwrap();
        assert!(ftrl_solve(&[0.0], &reg).is_err());
        assert!(ftrl_solve(&[0.0, f64::NAN], &reg).is_err());
        assert!(HybridRegularizer::new(0.5, 0.0, 0.0).is_err());
        assert!(HybridRegularizer::new(0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn leader_and_gap_examples() {
        let (i, g) = leader_and_gap(&pv(&[0.6, 0.3, 0.1]));
        assert_eq!(i, 0);
        assert_abs_diff_eq!(g, 0.4, epsilon = 1e-15);
        assert_eq!(leader_and_gap(&pv(&[0.5, 0.5])), (0, 0.5));
        assert_eq!(leader_and_gap(&ProbVector::vertex(3, 0)), (0, 0.0));
    }

    fn simplex_point(k: usize) -> impl Strategy<Value = ProbVector> {
        proptest::collection::vec(0.0f64..1.0, k).prop_filter_map("zero mass", |w| {
            ProbVector::normalized(w).ok()
        })
    }

    fn interior_point(k: usize) -> impl Strategy<Value = ProbVector> {
        proptest::collection::vec(0.01f64..1.0, k)
            .prop_map(|w| ProbVector::normalized(w).unwrap())
    }

    proptest! {
        #[test]
        fn entropy_bounds(p in (2usize..8).prop_flat_map(simplex_point), alpha in 0.05f64..0.95) {
            let k = p.len() as f64;
            let h = tsallis_entropy(&p, alpha).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= ((k.powf(1.0 - alpha) - 1.0) / alpha) + 1e-12);
        }

        // Upper bound in the (k-1)^(1-alpha) form
        // its derivation produces.
        #[test]
        fn entropy_leader_bound(p in (2usize..8).prop_flat_map(simplex_point), alpha in 0.05f64..0.95, pick in 0usize..8) {
            let k = p.len();
            let i = pick % k;
            let h = tsallis_entropy(&p, alpha).unwrap();
            let bound = ((k - 1) as f64).powf(1.0 - alpha) * (1.0 - p[i]).powf(alpha) / alpha;
            prop_assert!(h <= bound + 1e-12);
        }

        #[test]
        fn bregman_nonnegative(
            (p, q) in (2usize..7).prop_flat_map(|k| (simplex_point(k), interior_point(k))),
            alpha in 0.05f64..0.95,
        ) {
            prop_assert!(bregman_tsallis(&p, &q, alpha).unwrap() >= 0.0);
            prop_assert!(bregman_tsallis(&q, &q, alpha).unwrap() <= 1e-12);
        }

        #[test]
        fn ftrl_shift_invariance_and_monotonicity(
            losses in proptest::collection::vec(-20.0f64..20.0, 2..8),
            alpha in 0.05f64..0.95,
            beta in 0.1f64..50.0,
            beta_bar in 0.0f64..10.0,
            shift in -100.0f64..100.0,
            bump in 0.01f64..5.0,
        ) {
            let reg = HybridRegularizer::new(alpha, beta, beta_bar).unwrap();
            let base = ftrl_solve(&losses, &reg).unwrap();
            prop_assert!(kkt_residual(&losses, &reg, &base) <= 1e-8);
            let shifted: Vec<f64> = losses.iter().map(|l| l + shift).collect();
            let moved = ftrl_solve(&shifted, &reg).unwrap();
            for (a, b) in base.q.as_slice().iter().zip(moved.q.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
            let mut bumped = losses.clone();
            bumped[0] += bump;
            let after = ftrl_solve(&bumped, &reg).unwrap();
            prop_assert!(after.q[0] <= base.q[0] + 1e-12);
            prop_assert!(base.q.as_slice().iter().all(|&x| x > 0.0));
        }
    }
}
