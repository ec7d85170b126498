//! Directed feedback graphs: observability, fractional domination and the
//! importance-weighted loss estimator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftrl::{leader_components, ProbVector};
use crate::linalg::{LinearProgram, Sense};
use crate::pm::AgentParams;
use crate::rate::default_alpha;

/// Largest vertex count accepted by [`integer_domination`].
pub const MAX_EXHAUSTIVE_K: usize = 10;

/// On-disk form: 1-based `[from, to]` pairs, meaning `from` observes `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub k: usize,
    pub edges: Vec<[usize; 2]>,
}

/// A directed feedback graph on vertices `0..k`; playing `i` reveals the
/// losses of `out_neighbors(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct FeedbackGraph {
    k: usize,
    n_in: Vec<Vec<usize>>,
    n_out: Vec<Vec<usize>>,
}

impl FeedbackGraph {
    /// Builds a graph from 0-based edges; duplicates are merged.
    pub fn new(k: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain("a feedback graph needs at least two vertices"));
        }
        let mut n_in = vec![Vec::new(); k];
        let mut n_out = vec![Vec::new(); k];
        for &(i, j) in edges {
            if i >= k || j >= k {
                return Err(Error::domain(format!("edge ({i}, {j}) out of range")));
            }
            n_out[i].push(j);
            n_in[j].push(i);
        }
        for list in n_in.iter_mut().chain(n_out.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Ok(FeedbackGraph { k, n_in, n_out })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn in_neighbors(&self, j: usize) -> &[usize] {
        &self.n_in[j]
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.n_out[i]
    }

    /// All edges, 0-based, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.n_out
            .iter()
            .enumerate()
            .flat_map(|(i, outs)| outs.iter().map(move |&j| (i, j)))
            .collect()
    }

    /// Directed cycle `0 -> 1 -> ... -> k-1 -> 0` without self-loops.
    pub fn cycle(k: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = (0..k).map(|i| (i, (i + 1) % k)).collect();
        Self::new(k, &edges)
    }
}

impl TryFrom<GraphFile> for FeedbackGraph {
    type Error = Error;

    fn try_from(f: GraphFile) -> Result<Self> {
        let mut edges = Vec::with_capacity(f.edges.len());
        for [i, j] in f.edges {
            if i == 0 || j == 0 {
                return Err(Error::domain("graph file vertex ids are 1-based"));
            }
            edges.push((i - 1, j - 1));
        }
        FeedbackGraph::new(f.k, &edges)
    }
}

impl From<FeedbackGraph> for GraphFile {
    fn from(g: FeedbackGraph) -> Self {
        GraphFile {
            k: g.k,
            edges: g.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsClass {
    NonObservable,
    Strong,
    Weak,
}

pub fn classify_observability(g: &FeedbackGraph) -> ObsClass {
    if g.n_in.iter().any(Vec::is_empty) {
        return ObsClass::NonObservable;
    }
    let strong = (0..g.k).all(|i| {
        let n = &g.n_in[i];
        n.binary_search(&i).is_ok() || (0..g.k).filter(|&j| j != i).all(|j| n.binary_search(&j).is_ok())
    });
    if strong {
        ObsClass::Strong
    } else {
        ObsClass::Weak
    }
}

/// Optimum of the fractional covering LP and its normalized solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domination {
    pub delta_star: f64,
    pub x_star: Vec<f64>,
    pub u_dist: ProbVector,
}

/// Solves `min sum x` s.t. `sum_{i in N_in(j)} x_i >= 1` for all `j`,
/// `0 <= x <= 1`.
pub fn fractional_domination(g: &FeedbackGraph) -> Result<Domination> {
    if classify_observability(g) == ObsClass::NonObservable {
        return Err(Error::domain("fractional domination needs an observable graph"));
    }
    let k = g.k;
    let mut lp = LinearProgram::minimize(vec![1.0; k]);
    for j in 0..k {
        let mut row = vec![0.0; k];
        for &i in &g.n_in[j] {
            row[i] = 1.0;
        }
        lp.constraint(row, Sense::Ge, 1.0)?;
    }
    for i in 0..k {
        let mut row = vec![0.0; k];
        row[i] = 1.0;
        lp.constraint(row, Sense::Le, 1.0)?;
    }
    let sol = lp.solve()?;
    let x_star: Vec<f64> = sol.x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    for j in 0..k {
        let cover: f64 = g.n_in[j].iter().map(|&i| x_star[i]).sum();
        if cover < 1.0 - 1e-8 {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: 1.0 - cover,
            });
        }
    }
    let delta_star: f64 = x_star.iter().sum();
    let u_dist = ProbVector::normalized(x_star.clone())?;
    Ok(Domination {
        delta_star,
        x_star,
        u_dist,
    })
}

/// Size of the smallest dominating set, by exhaustive search (`k <= 10`).
pub fn integer_domination(g: &FeedbackGraph) -> Result<usize> {
    if g.k > MAX_EXHAUSTIVE_K {
        return Err(Error::domain(format!(
            "exhaustive domination search is limited to k <= {MAX_EXHAUSTIVE_K}"
        )));
    }
    let full: u32 = (1u32 << g.k) - 1;
    let covers: Vec<u32> = g
        .n_out
        .iter()
        .map(|outs| outs.iter().fold(0u32, |m, &j| m | (1 << j)))
        .collect();
    (1u32..=full)
        .filter(|set| {
            (0..g.k)
                .filter(|i| set & (1 << i) != 0)
                .fold(0u32, |m, i| m | covers[i])
                == full
        })
        .map(|set| set.count_ones() as usize)
        .min()
        .ok_or_else(|| Error::domain("graph has no dominating set"))
}

/// `P_i = sum_{j in N_in(i)} p_j`, the probability that `i` is observed.
pub fn observation_probs(g: &FeedbackGraph, p: &ProbVector) -> Vec<f64> {
    g.n_in
        .iter()
        .map(|ins| ins.iter().map(|&j| p[j]).sum())
        .collect()
}

/// Estimate `losses[i] / P_i` for observed `i` and 0 elsewhere. Only the
/// entries of `losses` indexed by `out_neighbors(chosen)` are read.
pub fn graph_loss_estimate(
    g: &FeedbackGraph,
    chosen: usize,
    losses: &[f64],
    p: &ProbVector,
) -> Result<Vec<f64>> {
    if chosen >= g.k || losses.len() != g.k || p.len() != g.k {
        return Err(Error::domain("dimension mismatch in graph estimate"));
    }
    let probs = observation_probs(g, p);
    if let Some(i) = probs.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::domain(format!("vertex {i} has zero observation probability")));
    }
    let mut est = vec![0.0; g.k];
    for &i in &g.n_out[chosen] {
        est[i] = losses[i] / probs[i];
    }
    Ok(est)
}

/// Stability and bias components for graph bandits.
pub fn graph_zu(q: &ProbVector, alpha: f64, delta_star: f64) -> (f64, f64) {
    let (s, gap) = leader_components(q, alpha);
    (
        4.0 * delta_star / (1.0 - alpha) * s,
        8.0 * delta_star / (1.0 - alpha) * gap,
    )
}

pub fn graph_default_params(k: usize, delta_star: f64) -> AgentParams {
    let alpha = default_alpha(k);
    let beta1 = 64.0 * delta_star / (1.0 - alpha);
    let beta_bar = 32.0 * (k as f64 * delta_star).sqrt() / ((1.0 - alpha).powi(2) * beta1.sqrt());
    AgentParams {
        alpha,
        beta1,
        beta_bar,
    }
}

/// Summary emitted by the `analyze-graph` command; `x_star` is listed in
/// vertex order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphReport {
    pub class: ObsClass,
    pub delta_star: Option<f64>,
    pub x_star: Option<Vec<f64>>,
    pub integer_domination: Option<usize>,
}

impl GraphReport {
    pub fn from_graph(g: &FeedbackGraph) -> Result<Self> {
        let class = classify_observability(g);
        let dom = match class {
            ObsClass::NonObservable => None,
            _ => Some(fractional_domination(g)?),
        };
        let integer = if class != ObsClass::NonObservable && g.k <= MAX_EXHAUSTIVE_K {
            Some(integer_domination(g)?)
        } else {
            None
        };
        Ok(GraphReport {
            class,
            delta_star: dom.as_ref().map(|d| d.delta_star),
            x_star: dom.map(|d| d.x_star),
            integer_domination: integer,
        })
    }
}

/// Random graph with independent edges of probability `density`, resampled
/// until every vertex has an in-neighbor.
pub fn random_observable_graph<R: Rng + ?Sized>(k: usize, density: f64, rng: &mut R) -> FeedbackGraph {
    loop {
        let edges: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|_| rng.random_bool(density))
            .collect();
        let g = FeedbackGraph::new(k, &edges).expect("valid edges");
        if classify_observability(&g) != ObsClass::NonObservable {
            return g;
        }
    }
}
