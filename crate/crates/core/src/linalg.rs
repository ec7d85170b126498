//! Dense linear programming and minimum-norm least squares.
//!
//! The LP solver is a two-phase tableau simplex with Bland's rule. Problem
//! sizes here are tiny (tens of variables), so dense storage is adequate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot and feasibility tolerance of the simplex method.
pub const LP_TOL: f64 = 1e-9;
/// Iteration cap shared by both phases.
pub const LP_MAX_ITER: usize = 10_000;

/// Sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    coef: Vec<f64>,
    sense: Sense,
    rhs: f64,
}

/// A linear program over `n` variables.
///
/// Variables are non-negative unless marked free with [`LinearProgram::free`].
/// Upper bounds are expressed as ordinary `Le` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    maximize: bool,
    rows: Vec<Row>,
    free: Vec<bool>,
}

/// Optimal point and objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::with_direction(objective, false)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::with_direction(objective, true)
    }

    fn with_direction(objective: Vec<f64>, maximize: bool) -> Self {
        let n = objective.len();
        LinearProgram {
            n,
            objective,
            maximize,
            rows: Vec::new(),
            free: vec![false; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Adds `coef . x (sense) rhs`.
    pub fn constraint(&mut self, coef: Vec<f64>, sense: Sense, rhs: f64) -> Result<&mut Self> {
        if coef.len() != self.n {
            return Err(Error::domain(format!(
                "constraint has {} coefficients, expected {}",
                coef.len(),
                self.n
            )));
        }
        if coef.iter().any(|c| !c.is_finite()) || !rhs.is_finite() {
            return Err(Error::domain("constraint coefficients must be finite"));
        }
        self.rows.push(Row { coef, sense, rhs });
        Ok(self)
    }

    /// Lifts the sign restriction on variable `j`.
    pub fn free(&mut self, j: usize) -> &mut Self {
        self.free[j] = true;
        self
    }

    /// Maximum violation of the constraints (and sign restrictions) at `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            if !self.free[j] {
                worst = worst.max(-v);
            }
        }
        for row in &self.rows {
            let lhs: f64 = row.coef.iter().zip(x).map(|(a, b)| a * b).sum();
            let viol = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Solves the program.
    pub fn solve(&self) -> Result<LpSolution> {
        lp_solve(self)
    }
}

struct Tableau {
    // m rows of width ncols + 1; the last entry is the right-hand side
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost . x` over columns flagged in `allowed`; Bland's rule.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], iters: &mut usize) -> Result<()> {
        let rhs = self.ncols;
        loop {
            if *iters >= LP_MAX_ITER {
                return Err(Error::NoConvergence {
                    iterations: *iters,
                    residual: f64::NAN,
                });
            }
            let entering = (0..self.ncols).find(|&j| {
                if !allowed[j] || self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .t
                        .iter()
                        .zip(&self.basis)
                        .map(|(row, &b)| cost[b] * row[j])
                        .sum::<f64>();
                reduced < -LP_TOL
            });
            let Some(c) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if row[c] > LP_TOL {
                    let ratio = row[rhs] / row[c];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - LP_TOL
                                || (ratio <= br + LP_TOL && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, c);
            *iters += 1;
        }
    }
}

/// Two-phase simplex. Returns [`Error::Infeasible`], [`Error::Unbounded`] or
/// [`Error::NoConvergence`] when no optimum is found.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    // Column layout: structural columns (free variables split in two), then
    // one slack/surplus per inequality, then one artificial per row.
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(lp.n);
    let mut n_struct = 0;
    for j in 0..lp.n {
        if lp.free[j] {
            col_of.push((n_struct, Some(n_struct + 1)));
            n_struct += 2;
        } else {
            col_of.push((n_struct, None));
            n_struct += 1;
        }
    }
    let m = lp.rows.len();
    let n_slack = lp.rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let n_art = m;
    let ncols = n_struct + n_slack + n_art;

    let mut t = vec![vec![0.0; ncols + 1]; m];
    let mut slack = n_struct;
    for (i, row) in lp.rows.iter().enumerate() {
        for (j, &a) in row.coef.iter().enumerate() {
            let (pos, neg) = col_of[j];
            t[i][pos] = a;
            if let Some(neg) = neg {
                t[i][neg] = -a;
            }
        }
        match row.sense {
            Sense::Le => {
                t[i][slack] = 1.0;
                slack += 1;
            }
            Sense::Ge => {
                t[i][slack] = -1.0;
                slack += 1;
            }
            Sense::Eq => {}
        }
        t[i][ncols] = row.rhs;
        if row.rhs < 0.0 {
            for v in t[i].iter_mut() {
                *v = -*v;
            }
        }
        t[i][n_struct + n_slack + i] = 1.0;
    }
    let art_start = n_struct + n_slack;
    let mut tab = Tableau {
        t,
        basis: (art_start..ncols).collect(),
        ncols,
    };

    let mut iters = 0;
    let mut phase1_cost = vec![0.0; ncols];
    for c in phase1_cost.iter_mut().skip(art_start) {
        *c = 1.0;
    }
    let all = vec![true; ncols];
    tab.optimize(&phase1_cost, &all, &mut iters)?;
    let infeas: f64 = tab
        .basis
        .iter()
        .zip(&tab.t)
        .filter(|(&b, _)| b >= art_start)
        .map(|(_, row)| row[ncols])
        .sum();
    let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
    if infeas > 1e-7 * scale {
        return Err(Error::Infeasible);
    }

    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < tab.t.len() {
        if tab.basis[i] >= art_start {
            let col = (0..art_start).find(|&j| tab.t[i][j].abs() > LP_TOL);
            match col {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.t.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let sign = if lp.maximize { -1.0 } else { 1.0 };
    let mut cost = vec![0.0; ncols];
    for (j, &c) in lp.objective.iter().enumerate() {
        let (pos, neg) = col_of[j];
        cost[pos] = sign * c;
        if let Some(neg) = neg {
            cost[neg] = -sign * c;
        }
    }
    let mut allowed = vec![true; ncols];
    for a in allowed.iter_mut().skip(art_start) {
        *a = false;
    }
    tab.optimize(&cost, &allowed, &mut iters)?;

    let mut values = vec![0.0; ncols];
    for (row, &b) in tab.t.iter().zip(&tab.basis) {
        values[b] = row[ncols];
    }
    let x: Vec<f64> = col_of
        .iter()
        .map(|&(pos, neg)| values[pos] - neg.map_or(0.0, |n| values[n]))
        .collect();
    let residual = lp.residual(&x);
    if residual > 1e-7 * scale {
        return Err(Error::NoConvergence {
            iterations: iters,
            residual,
        });
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { x, objective })
}

/// Residual threshold above which [`least_norm_solve`] reports inconsistency.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Minimum Euclidean-norm solution of `A x = b` for a row-major `A`.
///
/// Fails with [`Error::Inconsistent`] when the best least-squares solution
/// leaves an infinity-norm residual above [`CONSISTENCY_TOL`].
pub fn least_norm_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::domain("right-hand side length does not match rows"));
    }
    if m == 0 {
        return Err(Error::domain("empty system"));
    }
    let n = a[0].len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(Error::domain("rows must have equal positive length"));
    }
    let mat = DMatrix::from_fn(m, n, |i, j| a[i][j]);
    let rhs = DVector::from_column_slice(b);
    let svd = mat.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = max_sv * (m.max(n) as f64) * f64::EPSILON * 16.0;
    let x = svd.solve(&rhs, eps).map_err(Error::domain)?;
    let residual = (&mat * &x - &rhs).amax();
    if !(residual <= CONSISTENCY_TOL) {
        return Err(Error::Inconsistent { residual });
    }
    Ok(x.iter().copied().collect())
}
