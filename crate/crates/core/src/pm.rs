//! Partial-monitoring games: cell geometry, global observability and the
//! path-summed loss-difference estimator.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftrl::{leader_components, ProbVector};
use crate::linalg::{least_norm_solve, LinearProgram, Sense};
use crate::rate::default_alpha;

/// Margin above which a cell (or cell intersection) counts as full-dimensional.
pub const MARGIN_TOL: f64 = 1e-9;

/// A finite partial-monitoring game: `loss[a][x]` and feedback symbol
/// `feedback[a][x]` for action `a` and outcome `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmGame {
    pub loss: Vec<Vec<f64>>,
    pub feedback: Vec<Vec<u32>>,
}

impl PmGame {
    /// Checks shapes, the loss range and that no two loss rows coincide.
    pub fn new(loss: Vec<Vec<f64>>, feedback: Vec<Vec<u32>>) -> Result<Self> {
        let game = PmGame { loss, feedback };
        game.check()?;
        Ok(game)
    }

    pub fn check(&self) -> Result<()> {
        let k = self.loss.len();
        if k < 2 {
            return Err(Error::domain("a game needs at least two actions"));
        }
        let d = self.loss[0].len();
        if d < 2 {
            return Err(Error::domain("a game needs at least two outcomes"));
        }
        if self.feedback.len() != k
            || self.loss.iter().any(|r| r.len() != d)
            || self.feedback.iter().any(|r| r.len() != d)
        {
            return Err(Error::domain("loss and feedback must both be k x d"));
        }
        if self
            .loss
            .iter()
            .flatten()
            .any(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return Err(Error::domain("losses must lie in [0,1]"));
        }
        for a in 0..k {
            for b in a + 1..k {
                if self.loss[a] == self.loss[b] {
                    return Err(Error::DuplicateAction(a, b));
                }
            }
        }
        Ok(())
    }

    pub fn actions(&self) -> usize {
        self.loss.len()
    }

    pub fn outcomes(&self) -> usize {
        self.loss[0].len()
    }

    /// Expected loss of each action under an outcome distribution.
    pub fn expected_losses(&self, outcome_dist: &[f64]) -> Vec<f64> {
        self.loss
            .iter()
            .map(|row| row.iter().zip(outcome_dist).map(|(l, p)| l * p).sum())
            .collect()
    }

    /// Sorted distinct symbols of each action's feedback row.
    pub fn alphabets(&self) -> Vec<Vec<u32>> {
        self.feedback
            .iter()
            .map(|row| {
                let mut s = row.clone();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect()
    }
}

fn diff(game: &PmGame, a: usize, b: usize) -> Vec<f64> {
    game.loss[a]
        .iter()
        .zip(&game.loss[b])
        .map(|(x, y)| x - y)
        .collect()
}

/// Largest `s` such that some outcome distribution `u` with `u_x >= s`
/// makes `a` strictly better than every other action by `s`, optionally
/// while keeping `a` and `tie` exactly indifferent.
fn cell_margin(game: &PmGame, a: usize, tie: Option<usize>) -> Result<f64> {
    let d = game.outcomes();
    // variables: u_1..u_d, s
    let mut obj = vec![0.0; d + 1];
    obj[d] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    lp.free(d);
    for x in 0..d {
        let mut row = vec![0.0; d + 1];
        row[x] = 1.0;
        row[d] = -1.0;
        lp.constraint(row, Sense::Ge, 0.0)?;
    }
    let mut sum = vec![1.0; d + 1];
    sum[d] = 0.0;
    lp.constraint(sum, Sense::Eq, 1.0)?;
    let mut cap = vec![0.0; d + 1];
    cap[d] = 1.0;
    lp.constraint(cap, Sense::Le, 1.0)?;
    for b in 0..game.actions() {
        if b == a {
            continue;
        }
        let mut row = diff(game, a, b);
        if Some(b) == tie {
            row.push(0.0);
            lp.constraint(row, Sense::Eq, 0.0)?;
        } else {
            row.push(1.0);
            lp.constraint(row, Sense::Le, 0.0)?;
        }
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective),
        // s is free and bounded above, so an empty feasible set only arises
        // from the tie constraint.
        Err(Error::Infeasible) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Interior margin of each action's cell; positive iff the cell is
/// full-dimensional.
pub fn pareto_margins(game: &PmGame) -> Result<Vec<f64>> {
    game.check()?;
    (0..game.actions()).map(|a| cell_margin(game, a, None)).collect()
}

/// Pareto flags; errors on the first action that is not Pareto optimal.
pub fn validate_game(game: &PmGame) -> Result<Vec<bool>> {
    let margins = pareto_margins(game)?;
    if let Some(a) = margins.iter().position(|&m| !(m > MARGIN_TOL)) {
        return Err(Error::NonParetoAction(a));
    }
    Ok(vec![true; margins.len()])
}

/// Pairs `(a, b)`, `a < b`, whose cells meet in a face of codimension one.
pub fn neighbor_graph(game: &PmGame, pareto: &[bool]) -> Result<Vec<(usize, usize)>> {
    let k = game.actions();
    if let Some(a) = pareto.iter().position(|p| !p) {
        return Err(Error::NonParetoAction(a));
    }
    let mut edges = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            if cell_margin(game, a, Some(b))? > MARGIN_TOL {
                edges.push((a, b));
            }
        }
    }
    if !connected(k, &edges) {
        return Err(Error::DisconnectedNeighborGraph);
    }
    Ok(edges)
}

fn adjacency(k: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); k];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }
    adj
}

fn bfs_parents(k: usize, edges: &[(usize, usize)], root: usize) -> Vec<Option<usize>> {
    let adj = adjacency(k, edges);
    let mut parent = vec![None; k];
    let mut seen = vec![false; k];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(v);
                queue.push_back(w);
            }
        }
    }
    parent
}

fn connected(k: usize, edges: &[(usize, usize)]) -> bool {
    let parent = bfs_parents(k, edges, 0);
    (1..k).all(|v| parent[v].is_some())
}

/// Estimation function for one ordered pair: `w[c][j]` is the weight of
/// symbol `alphabets[c][j]` when action `c` is played.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeFunction {
    pub a: usize,
    pub b: usize,
    pub w: Vec<Vec<f64>>,
    /// Largest violation of the defining identity over outcomes.
    pub residual: f64,
}

/// Minimum-norm `w` with `sum_c w(c, feedback[c][x]) = loss[a][x] - loss[b][x]`
/// for every outcome `x`.
pub fn estimation_function(game: &PmGame, a: usize, b: usize) -> Result<EdgeFunction> {
    let alphabets = game.alphabets();
    let offsets: Vec<usize> = alphabets
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.len();
            Some(o)
        })
        .collect();
    let n_vars: usize = alphabets.iter().map(Vec::len).sum();
    let d = game.outcomes();
    let mut rows = vec![vec![0.0; n_vars]; d];
    for (x, row) in rows.iter_mut().enumerate() {
        for c in 0..game.actions() {
            let j = alphabets[c].binary_search(&game.feedback[c][x]).unwrap();
            row[offsets[c] + j] = 1.0;
        }
    }
    let rhs = diff(game, a, b);
    let flat = match least_norm_solve(&rows, &rhs) {
        Ok(v) => v,
        Err(Error::Inconsistent { .. }) => return Err(Error::NotGloballyObservable(a, b)),
        Err(e) => return Err(e),
    };
    let w: Vec<Vec<f64>> = alphabets
        .iter()
        .zip(&offsets)
        .map(|(s, &o)| flat[o..o + s.len()].to_vec())
        .collect();
    let residual = (0..d)
        .map(|x| {
            let total: f64 = (0..game.actions())
                .map(|c| {
                    let j = alphabets[c].binary_search(&game.feedback[c][x]).unwrap();
                    w[c][j]
                })
                .sum();
            (total - rhs[x]).abs()
        })
        .fold(0.0, f64::max);
    Ok(EdgeFunction { a, b, w, residual })
}

/// Estimation functions for every neighbor edge.
pub fn estimation_functions(game: &PmGame, edges: &[(usize, usize)]) -> Result<Vec<EdgeFunction>> {
    edges
        .iter()
        .map(|&(a, b)| estimation_function(game, a, b))
        .collect()
}

/// `table[c][j]` is the estimate vector over actions for action `c` and its
/// `j`-th feedback symbol.
pub type GTable = Vec<Vec<Vec<f64>>>;

/// Analysed game: everything the agent needs to estimate loss differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmStructure {
    pub pareto_margins: Vec<f64>,
    pub edges: Vec<(usize, usize)>,
    pub edge_functions: Vec<EdgeFunction>,
    /// Parent of each action in the in-tree rooted at action 0.
    pub parent: Vec<Option<usize>>,
    pub alphabets: Vec<Vec<u32>>,
    /// `g_table[c][j]` is `G(c, alphabets[c][j])`, a vector over actions.
    pub g_table: GTable,
    pub c_g: f64,
}

impl PmStructure {
    /// Runs the full analysis; fails unless every action is Pareto optimal,
    /// the neighbor graph is connected and every neighbor pair is globally
    /// observable.
    pub fn analyze(game: &PmGame) -> Result<Self> {
        let margins = pareto_margins(game)?;
        if let Some(a) = margins.iter().position(|&m| !(m > MARGIN_TOL)) {
            return Err(Error::NonParetoAction(a));
        }
        let k = game.actions();
        let edges = neighbor_graph(game, &vec![true; k])?;
        let edge_functions = estimation_functions(game, &edges)?;
        let (parent, g_table) = build_estimator(game, &edges, &edge_functions)?;
        let g_max = g_table
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(PmStructure {
            pareto_margins: margins,
            edges,
            edge_functions,
            parent,
            alphabets: game.alphabets(),
            g_table,
            c_g: (k as f64 * g_max).max(1.0),
        })
    }

    pub fn actions(&self) -> usize {
        self.parent.len()
    }

    /// `G(action, symbol)`.
    pub fn g(&self, action: usize, symbol: u32) -> Result<&[f64]> {
        let alphabet = self
            .alphabets
            .get(action)
            .ok_or_else(|| Error::domain(format!("action {action} out of range")))?;
        let j = alphabet.binary_search(&symbol).map_err(|_| {
            Error::domain(format!("symbol {symbol} never emitted by action {action}"))
        })?;
        Ok(&self.g_table[action][j])
    }
}

/// In-tree rooted at action 0 (BFS order) and the path sums
/// `G(c, s)_b = sum over tree edges on the path from b to the root`, each
/// edge oriented child minus parent.
pub fn build_estimator(
    game: &PmGame,
    edges: &[(usize, usize)],
    functions: &[EdgeFunction],
) -> Result<(Vec<Option<usize>>, GTable)> {
    let k = game.actions();
    let parent = bfs_parents(k, edges, 0);
    if (1..k).any(|v| parent[v].is_none()) {
        return Err(Error::DisconnectedNeighborGraph);
    }
    let alphabets = game.alphabets();
    // w oriented as child minus parent for each non-root action
    let mut up: Vec<Option<Vec<Vec<f64>>>> = vec![None; k];
    for v in 1..k {
        let p = parent[v].unwrap();
        let f = functions
            .iter()
            .find(|f| (f.a, f.b) == (v, p) || (f.a, f.b) == (p, v))
            .ok_or_else(|| Error::domain(format!("missing estimation function for ({p}, {v})")))?;
        let sign = if f.a == v { 1.0 } else { -1.0 };
        up[v] = Some(
            f.w.iter()
                .map(|row| row.iter().map(|x| sign * x).collect())
                .collect(),
        );
    }
    let mut g_table: GTable = alphabets
        .iter()
        .map(|s| vec![vec![0.0; k]; s.len()])
        .collect();
    #[allow(clippy::needless_range_loop)]
    for b in 1..k {
        let mut v = b;
        while let Some(p) = parent[v] {
            let w = up[v].as_ref().unwrap();
            for (c, row) in w.iter().enumerate() {
                for (j, &val) in row.iter().enumerate() {
                    g_table[c][j][b] += val;
                }
            }
            v = p;
        }
    }
    Ok((parent, g_table))
}

/// Importance-weighted estimate `G(chosen, symbol) / p_chosen`.
pub fn pm_loss_estimate(
    structure: &PmStructure,
    chosen: usize,
    symbol: u32,
    p: &ProbVector,
) -> Result<Vec<f64>> {
    if chosen >= p.len() {
        return Err(Error::domain("chosen action out of range"));
    }
    let pa = p[chosen];
    if !(pa > 0.0) {
        return Err(Error::domain("chosen action has zero probability"));
    }
    Ok(structure.g(chosen, symbol)?.iter().map(|g| g / pa).collect())
}

/// Stability and bias components for partial monitoring.
pub fn pm_zu(q: &ProbVector, alpha: f64, c_g: f64) -> (f64, f64) {
    let (s, gap) = leader_components(q, alpha);
    (
        4.0 * c_g * c_g / (1.0 - alpha) * s,
        8.0 * c_g / (1.0 - alpha) * gap,
    )
}

/// Agent parameters `(alpha, beta1, beta_bar)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta_bar: f64,
}

/// Defaults for a partial-monitoring agent given the game constant.
pub fn pm_default_params(k: usize, c_g: f64) -> AgentParams {
    let alpha = default_alpha(k);
    let beta1 = 64.0 * c_g * c_g / (1.0 - alpha);
    let beta_bar = 32.0 * c_g * (k as f64).sqrt() / ((1.0 - alpha).powi(2) * beta1.sqrt());
    AgentParams {
        alpha,
        beta1,
        beta_bar,
    }
}

/// Summary emitted by the `analyze` command. Action indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmReport {
    pub pareto: Vec<bool>,
    pub edges: Vec<[usize; 2]>,
    pub global_observability: bool,
    pub c_g: Option<f64>,
    pub residuals: Vec<EdgeResidual>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeResidual {
    pub edge: [usize; 2],
    pub residual: Option<f64>,
}

impl PmReport {
    /// Analyses a game; only malformed, non-Pareto or disconnected games are
    /// errors, while unobservable pairs are reported.
    pub fn from_game(game: &PmGame) -> Result<Self> {
        let pareto = validate_game(game)?;
        let edges = neighbor_graph(game, &pareto)?;
        let mut residuals = Vec::new();
        let mut observable = true;
        for &(a, b) in &edges {
            let residual = match estimation_function(game, a, b) {
                Ok(f) => Some(f.residual),
                Err(Error::NotGloballyObservable(..)) => {
                    observable = false;
                    None
                }
                Err(e) => return Err(e),
            };
            residuals.push(EdgeResidual {
                edge: [a + 1, b + 1],
                residual,
            });
        }
        let c_g = if observable {
            Some(PmStructure::analyze(game)?.c_g)
        } else {
            None
        };
        Ok(PmReport {
            pareto,
            edges: edges.iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
            global_observability: observable,
            c_g,
            residuals,
        })
    }
}

/// Random game whose loss rows are `|e_x - v_a|^2 / 2` for interior points
/// `v_a`, so every action owns a full-dimensional cell. Feedback symbols are
/// drawn from `0..symbols`. Not necessarily globally observable.
pub fn random_voronoi_game<R: Rng + ?Sized>(k: usize, d: usize, symbols: u32, rng: &mut R) -> PmGame {
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let raw: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let loss = centers
        .iter()
        .map(|v| {
            (0..d)
                .map(|x| {
                    let dist: f64 = v
                        .iter()
                        .enumerate()
                        .map(|(i, &vi)| {
                            let e = if i == x { 1.0 } else { 0.0 };
                            (e - vi).powi(2)
                        })
                        .sum();
                    dist / 2.0
                })
                .collect()
        })
        .collect();
    let feedback = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(0..symbols)).collect())
        .collect();
    PmGame { loss, feedback }
}

/// Rejection-samples [`random_voronoi_game`] until the analysis succeeds.
pub fn random_observable_game<R: Rng + ?Sized>(
    k: usize,
    d: usize,
    symbols: u32,
    rng: &mut R,
) -> (PmGame, PmStructure) {
    loop {
        let game = random_voronoi_game(k, d, symbols, rng);
        if let Ok(s) = PmStructure::analyze(&game) {
            return (game, s);
        }
    }
}
