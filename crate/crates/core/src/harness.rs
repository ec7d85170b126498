//! The FTRL loop with SPB-matching learning rates, experiment orchestration,
//! regret accounting and scaling fits.
//!
//! Regret is pseudo-regret: each round adds `<mean_t, p_t> - mean_t(a*)`
//! where `mean_t` holds the environment's expected losses and `a*` is the
//! best fixed action over the horizon. Action sampling still drives the
//! feedback, but not the regret signal. For paid observations the expected
//! observation cost `cost * k * r_t` is added as well.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{comparator_loss, Draw, EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::ftrl::{ftrl_solve, tsallis_entropy, HybridRegularizer, ProbVector};
use crate::graph::{
    classify_observability, fractional_domination, graph_default_params, graph_loss_estimate,
    graph_zu, observation_probs, Domination, FeedbackGraph, ObsClass,
};
use crate::paid::{draw_observation_set, paid_loss_estimate, paid_round_cost, paid_zu, PaidConfig};
use crate::pm::{pm_default_params, pm_loss_estimate, pm_zu, AgentParams, PmGame, PmStructure};
use crate::rate::{raw_rate, SpbState};
use crate::rng::{stream_rng, StreamRole};

/// Header of trace CSV files.
pub const CSV_HEADER: &str = "round,action,beta,h,gamma,inst_regret,cum_regret,round_cost";

/// Relative slack for monitors comparing floating quantities.
const MONITOR_TOL: f64 = 1e-9;

/// Problem section of an experiment config. Instance files are resolved
/// relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Problem {
    Pm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        game: Option<PmGame>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        game_file: Option<PathBuf>,
    },
    Graph {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph: Option<FeedbackGraph>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph_file: Option<PathBuf>,
    },
    Paid {
        arms: usize,
        cost: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta1: Option<f64>,
    pub beta_bar: Option<f64>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub env: EnvSpec,
    pub horizon: u64,
    #[serde(default = "one")]
    pub replicates: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
    /// Directory receiving traces and the summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        match &mut self.problem {
            Problem::Pm { game_file, .. } => fix(game_file),
            Problem::Graph { graph_file, .. } => fix(graph_file),
            Problem::Paid { .. } => {}
        }
        fix(&mut self.output);
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.replicates < 1 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        Ok(())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// An analysed problem ready to be played.
#[derive(Debug, Clone)]
pub enum Instance {
    Pm { game: PmGame, structure: PmStructure },
    Graph { graph: FeedbackGraph, domination: Domination },
    Paid(PaidConfig),
}

impl Instance {
    pub fn pm(game: PmGame) -> Result<Self> {
        let structure = PmStructure::analyze(&game)?;
        Ok(Instance::Pm { game, structure })
    }

    pub fn graph(graph: FeedbackGraph) -> Result<Self> {
        if classify_observability(&graph) == ObsClass::NonObservable {
            return Err(Error::Config("feedback graph is not observable".into()));
        }
        let domination = fractional_domination(&graph)?;
        Ok(Instance::Graph { graph, domination })
    }

    pub fn from_problem(problem: &Problem) -> Result<Self> {
        match problem {
            Problem::Pm { game, game_file } => {
                let game = match (game, game_file) {
                    (Some(g), None) => g.clone(),
                    (None, Some(path)) => read_json(path)?,
                    _ => return Err(Error::Config("give exactly one of game or game_file".into())),
                };
                game.check()?;
                Self::pm(game)
            }
            Problem::Graph { graph, graph_file } => {
                let graph = match (graph, graph_file) {
                    (Some(g), None) => g.clone(),
                    (None, Some(path)) => read_json(path)?,
                    _ => return Err(Error::Config("give exactly one of graph or graph_file".into())),
                };
                Self::graph(graph)
            }
            Problem::Paid { arms, cost } => Ok(Instance::Paid(
                PaidConfig::new(*arms, *cost).map_err(|e| Error::Config(e.to_string()))?,
            )),
        }
    }

    pub fn actions(&self) -> usize {
        match self {
            Instance::Pm { game, .. } => game.actions(),
            Instance::Graph { graph, .. } => graph.k(),
            Instance::Paid(cfg) => cfg.arms,
        }
    }

    pub fn default_params(&self) -> AgentParams {
        match self {
            Instance::Pm { structure, .. } => pm_default_params(self.actions(), structure.c_g),
            Instance::Graph { domination, .. } => graph_default_params(self.actions(), domination.delta_star),
            Instance::Paid(cfg) => cfg.default_params(),
        }
    }

    pub fn params(&self, overrides: &Overrides) -> AgentParams {
        let d = self.default_params();
        AgentParams {
            alpha: overrides.alpha.unwrap_or(d.alpha),
            beta1: overrides.beta1.unwrap_or(d.beta1),
            beta_bar: overrides.beta_bar.unwrap_or(d.beta_bar),
        }
    }

    fn loss_matrix(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            Instance::Pm { game, .. } => Some(game.loss.clone()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Turn the first invariant violation into an error.
    pub strict: bool,
    /// Keep per-round rows (needed for CSV output).
    pub record_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub round: u64,
    /// 0-based; written 1-based to CSV.
    pub action: usize,
    pub loss: f64,
    pub comparator: f64,
    pub beta: f64,
    pub h: f64,
    /// Exploration rate, or observation rate for paid observations.
    pub gamma: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub round_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub round: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretTrace {
    pub params: AgentParams,
    pub a_star: usize,
    pub rows: Vec<TraceRow>,
    /// `(t, cumulative regret)` at every power of two `t <= T`.
    pub checkpoints: Vec<(u64, f64)>,
    pub final_regret: f64,
    pub total_cost: f64,
    pub observations: u64,
    pub violations: Vec<Violation>,
}

impl RegretTrace {
    pub fn regret_at(&self, t: u64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.0 == t).map(|c| c.1)
    }

    /// Writes the trace as CSV with violations as trailing `#` lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.round,
                r.action + 1,
                r.beta,
                r.h,
                r.gamma,
                r.inst_regret,
                r.cum_regret,
                r.round_cost
            )?;
        }
        for v in &self.violations {
            writeln!(w, "# violation round={} {}", v.round, v.detail)?;
        }
        Ok(())
    }
}

struct Monitor {
    strict: bool,
    violations: Vec<Violation>,
}

impl Monitor {
    fn check(&mut self, ok: bool, round: u64, detail: impl FnOnce() -> String) -> Result<()> {
        if ok {
            return Ok(());
        }
        let detail = detail();
        if self.strict {
            return Err(Error::InvariantViolation { round, detail });
        }
        self.violations.push(Violation { round, detail });
        Ok(())
    }
}

fn sample<R: Rng + ?Sized>(p: &ProbVector, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in p.as_slice().iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver of mass; fall back to the last positive entry
    p.as_slice().iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn le(a: f64, b: f64) -> bool {
    a <= b + MONITOR_TOL * (1.0 + b.abs())
}

/// Plays one replicate.
pub fn run_bobw(
    instance: &Instance,
    spec: &EnvSpec,
    params: AgentParams,
    horizon: u64,
    seed: u64,
    replicate: u64,
    options: RunOptions,
) -> Result<RegretTrace> {
    let k = instance.actions();
    let env_rng = stream_rng(seed, replicate, StreamRole::Environment);
    let mut agent_rng: ChaCha8Rng = stream_rng(seed, replicate, StreamRole::Agent);
    let mut env = Environment::new(spec.clone(), instance.loss_matrix(), k, env_rng)?;
    let (a_star, comparator) = comparator_loss(&env, horizon);

    let AgentParams {
        alpha,
        beta1,
        beta_bar,
    } = params;
    let mut state = SpbState::new(alpha, beta1, beta_bar)?;
    let mut monitor = Monitor {
        strict: options.strict,
        violations: Vec::new(),
    };
    let p0 = match instance {
        Instance::Graph { domination, .. } => domination.u_dist.clone(),
        _ => ProbVector::uniform(k),
    };

    let mut cum_loss = vec![0.0; k];
    let mut rows = Vec::new();
    let mut checkpoints = Vec::new();
    let mut cum_regret = 0.0;
    let mut total_cost = 0.0;
    let mut observations = 0u64;
    let mut h1 = 0.0;
    let mut h_prev = 0.0;
    let mut beta_prev = 0.0;
    // running sums for the Rule 2 lower bounds on beta
    let mut lb_z = beta1.powf(1.5);
    let mut lb_u = beta1 * beta1;

    for t in 1..=horizon {
        let beta = state.beta();
        let reg = HybridRegularizer::new(alpha, beta, beta_bar)?;
        let q = ftrl_solve(&cum_loss, &reg)?.q;
        let h = tsallis_entropy(&q, alpha)?;
        if t == 1 {
            h1 = h;
        }
        monitor.check(beta >= beta_prev, t, || format!("beta decreased: {beta_prev} -> {beta}"))?;
        monitor.check(le(h, h1), t, || format!("h_t = {h} exceeds h_1 = {h1}"))?;
        if t > 1 {
            monitor.check(le(h, 2.0 * h_prev), t, || format!("h_t = {h} exceeds 2 h_(t-1) = {}", 2.0 * h_prev))?;
        }
        let tol = MONITOR_TOL * (1.0 + beta * beta);
        monitor.check(beta.powf(1.5) + tol >= lb_z && beta * beta + tol >= lb_u, t, || {
            format!("beta = {beta} below its Rule 2 lower bounds")
        })?;

        let (z, u) = match instance {
            Instance::Pm { structure, .. } => pm_zu(&q, alpha, structure.c_g),
            Instance::Graph { domination, .. } => graph_zu(&q, alpha, domination.delta_star),
            Instance::Paid(cfg) => paid_zu(&q, alpha, cfg),
        };
        let mut gamma = raw_rate(z, u, beta)?.gamma;
        let rate_name = if matches!(instance, Instance::Paid(_)) { "r_t" } else { "gamma_t" };
        monitor.check(gamma <= 0.5, t, || format!("{rate_name} = {gamma} exceeds 1/2"))?;
        gamma = gamma.min(0.5);

        let p = match instance {
            Instance::Paid(_) => q.clone(),
            _ => q.mix(&p0, gamma)?,
        };
        let means = env.mean_losses(t);
        let overhead: f64 = means
            .iter()
            .zip(p.as_slice().iter().zip(q.as_slice()))
            .map(|(m, (pi, qi))| m * (pi - qi))
            .sum();
        monitor.check(le(overhead, 2.0 * gamma), t, || {
            format!("mixing overhead {overhead} exceeds 2 gamma = {}", 2.0 * gamma)
        })?;

        let action = sample(&p, &mut agent_rng);
        let draw = env.next_draw();
        let mut round_cost = 0.0;
        let mut expected_cost = 0.0;
        let (estimate, loss) = match (instance, draw) {
            (Instance::Pm { game, structure }, Draw::Outcome(x)) => {
                let symbol = game.feedback[action][x];
                let est = pm_loss_estimate(structure, action, symbol, &p)?;
                let bound = structure.c_g / gamma;
                let worst = est.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                monitor.check(le(worst, bound), t, || format!("|y_hat| = {worst} exceeds c_g/gamma = {bound}"))?;
                (est, game.loss[action][x])
            }
            (Instance::Graph { graph, domination }, Draw::Losses(l)) => {
                let probs = observation_probs(graph, &p);
                let min_p = probs.iter().copied().fold(f64::INFINITY, f64::min);
                let floor = gamma / domination.delta_star;
                monitor.check(min_p + MONITOR_TOL >= floor, t, || {
                    format!("min P = {min_p} below gamma/delta* = {floor}")
                })?;
                let est = graph_loss_estimate(graph, action, &l, &p)?;
                let bound = domination.delta_star / gamma;
                let worst = est.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                monitor.check(le(worst, bound), t, || format!("|l_hat| = {worst} exceeds delta*/gamma = {bound}"))?;
                let loss = l[action];
                (est, loss)
            }
            (Instance::Paid(cfg), Draw::Losses(l)) => {
                let observed = draw_observation_set(gamma, k, &mut agent_rng)?;
                let est = paid_loss_estimate(gamma, &observed, &l)?;
                if gamma > 0.0 {
                    let worst = est.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    monitor.check(le(worst, 1.0 / gamma), t, || format!("|l_hat| = {worst} exceeds 1/r = {}", 1.0 / gamma))?;
                }
                round_cost = paid_round_cost(&observed, cfg.cost);
                expected_cost = cfg.cost * k as f64 * gamma;
                observations += observed.len() as u64;
                (est, l[action])
            }
            _ => unreachable!("environment kind checked against the problem at construction"),
        };
        for (c, e) in cum_loss.iter_mut().zip(&estimate) {
            *c += e;
        }

        let expected: f64 = p.dot(&means);
        let inst_regret = expected - means[a_star] + expected_cost;
        cum_regret += inst_regret;
        total_cost += round_cost;
        if t.is_power_of_two() {
            checkpoints.push((t, cum_regret));
        }
        if options.record_rows {
            rows.push(TraceRow {
                round: t,
                action,
                loss,
                comparator: comparator[(t - 1) as usize],
                beta,
                h,
                gamma,
                inst_regret,
                cum_regret,
                round_cost,
            });
        }

        lb_z += 2.0 * z.sqrt() / h;
        lb_u += u / h;
        beta_prev = beta;
        h_prev = h;
        state.advance(h, z, u)?;
    }

    Ok(RegretTrace {
        params,
        a_star,
        rows,
        checkpoints,
        final_regret: cum_regret,
        total_cost,
        observations,
        violations: monitor.violations,
    })
}

/// Least-squares line through `(ln T, ln regret)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `ln regret = slope * ln T + intercept`. Two points interpolate
/// exactly; regrets and horizons must be positive.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(Error::domain("a scaling fit needs at least two checkpoints"));
    }
    if points.iter().any(|&(t, r)| !(t > 0.0) || !(r > 0.0)) {
        return Err(Error::domain("scaling fit needs positive horizons and regrets"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("scaling fit needs distinct horizons"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Smallest horizon included in summary fits.
pub const FIT_MIN_T: u64 = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub mean_regret: f64,
    pub per_replicate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub horizon: u64,
    pub replicates: u32,
    pub seed: u64,
    pub params: AgentParams,
    pub a_star: usize,
    pub mean_final_regret: f64,
    pub mean_total_cost: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub fit: Option<ScalingFit>,
    pub violations: usize,
}

fn mean_checkpoints(traces: &[RegretTrace]) -> Vec<Checkpoint> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    first
        .checkpoints
        .iter()
        .map(|&(t, _)| {
            let per: Vec<f64> = traces.iter().map(|tr| tr.regret_at(t).unwrap_or(f64::NAN)).collect();
            Checkpoint {
                t,
                mean_regret: per.iter().sum::<f64>() / per.len() as f64,
                per_replicate: per,
            }
        })
        .collect()
}

/// Fit over checkpoints with `t >= FIT_MIN_T` and positive mean regret.
pub fn fit_checkpoints(cps: &[Checkpoint]) -> Option<ScalingFit> {
    let pts: Vec<(f64, f64)> = cps
        .iter()
        .filter(|c| c.t >= FIT_MIN_T && c.mean_regret > 0.0)
        .map(|c| (c.t as f64, c.mean_regret))
        .collect();
    scaling_exponent(&pts).ok()
}

/// Runs all replicates of an experiment. Results are ordered by replicate
/// whatever the completion order. With an output directory, writes
/// `trace_<r>.csv` per replicate and `summary.json`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    strict: bool,
    threads: Option<usize>,
) -> Result<(ExperimentSummary, Vec<RegretTrace>)> {
    cfg.validate()?;
    let instance = Instance::from_problem(&cfg.problem)?;
    let params = instance.params(&cfg.overrides);
    let options = RunOptions {
        strict,
        record_rows: cfg.output.is_some(),
    };
    let run = |r: u32| run_bobw(&instance, &cfg.env, params, cfg.horizon, cfg.seed, r as u64, options);
    let results: Vec<Result<RegretTrace>> = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| (0..cfg.replicates).into_par_iter().map(run).collect()),
        None => (0..cfg.replicates).into_par_iter().map(run).collect(),
    };
    let traces = results.into_iter().collect::<Result<Vec<_>>>()?;
    let checkpoints = mean_checkpoints(&traces);
    let n = traces.len() as f64;
    let summary = ExperimentSummary {
        horizon: cfg.horizon,
        replicates: cfg.replicates,
        seed: cfg.seed,
        params,
        a_star: traces[0].a_star,
        mean_final_regret: traces.iter().map(|t| t.final_regret).sum::<f64>() / n,
        mean_total_cost: traces.iter().map(|t| t.total_cost).sum::<f64>() / n,
        fit: fit_checkpoints(&checkpoints),
        checkpoints,
        violations: traces.iter().map(|t| t.violations.len()).sum(),
    };
    if let Some(dir) = &cfg.output {
        fs::create_dir_all(dir)?;
        for (r, trace) in traces.iter().enumerate() {
            let file = fs::File::create(dir.join(format!("trace_{r}.csv")))?;
            trace.write_csv(io::BufWriter::new(file))?;
        }
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok((summary, traces))
}

/// Cumulative regret at every power-of-two round of a trace CSV.
pub fn read_trace_checkpoints(path: &Path) -> Result<Vec<(u64, f64)>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != CSV_HEADER {
                return Err(Error::Config(format!("{} is not a trace file", path.display())));
            }
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        };
        if cols.len() != 8 {
            return Err(Error::Config(format!("{}:{}: expected 8 columns", path.display(), i + 1)));
        }
        let t = parse(cols[0])? as u64;
        if t.is_power_of_two() {
            out.push((t, parse(cols[6])?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub traces: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub fit: Option<ScalingFit>,
}

/// Averages the checkpoints of every `*.csv` trace in `dir` (sorted by
/// name) and fits the scaling exponent.
pub fn fit_traces(dir: &Path) -> Result<FitReport> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no trace files in {}", dir.display())));
    }
    let all: Vec<Vec<(u64, f64)>> = files.iter().map(|f| read_trace_checkpoints(f)).collect::<Result<_>>()?;
    let common = all.iter().map(Vec::len).min().unwrap_or(0);
    let checkpoints: Vec<Checkpoint> = (0..common)
        .map(|j| {
            let per: Vec<f64> = all.iter().map(|c| c[j].1).collect();
            Checkpoint {
                t: all[0][j].0,
                mean_regret: per.iter().sum::<f64>() / per.len() as f64,
                per_replicate: per,
            }
        })
        .collect();
    Ok(FitReport {
        traces: files.len(),
        fit: fit_checkpoints(&checkpoints),
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Profile;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = (8..=14)
            .map(|j| {
                let t = 2f64.powi(j);
                (t, 3.0 * t.powf(2.0 / 3.0))
            })
            .collect();
        let f = scaling_exponent(&pts).unwrap();
        assert_abs_diff_eq!(f.slope, 2.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.intercept, 3f64.ln(), epsilon = 1e-9);

        let pts: Vec<(f64, f64)> = (8..=14)
            .map(|j| {
                let t = 2f64.powi(j);
                (t, 5.0 * t.ln())
            })
            .collect();
        assert!(scaling_exponent(&pts).unwrap().slope < 0.2);

        let f = scaling_exponent(&[(2.0, 3.0), (8.0, 12.0)]).unwrap();
        assert_abs_diff_eq!(f.slope, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);

        assert!(scaling_exponent(&[(2.0, 0.0), (4.0, 1.0)]).is_err());
    }

    fn paid_instance() -> Instance {
        Instance::Paid(PaidConfig::new(2, 1.0).unwrap())
    }

    fn two_arm_env() -> EnvSpec {
        EnvSpec::Stochastic {
            profile: Profile::Means(vec![0.25, 0.75]),
        }
    }

    #[test]
    fn zero_horizon_is_empty() {
        let inst = paid_instance();
        let params = inst.default_params();
        let tr = run_bobw(&inst, &two_arm_env(), params, 0, 1, 0, RunOptions::default()).unwrap();
        assert!(tr.rows.is_empty() && tr.checkpoints.is_empty());
        assert_eq!(tr.final_regret, 0.0);
    }

    #[test]
    fn identical_seeds_give_identical_csv() {
        let inst = paid_instance();
        let params = inst.default_params();
        let opts = RunOptions {
            strict: true,
            record_rows: true,
        };
        let csv = || {
            let tr = run_bobw(&inst, &two_arm_env(), params, 300, 42, 3, opts).unwrap();
            let mut buf = Vec::new();
            tr.write_csv(&mut buf).unwrap();
            buf
        };
        let a = csv();
        assert_eq!(a, csv());
        assert!(String::from_utf8(a).unwrap().starts_with(CSV_HEADER));
    }

    #[test]
    fn cost_bookkeeping_is_exact() {
        let inst = Instance::Paid(PaidConfig::new(3, 0.25).unwrap());
        let spec = EnvSpec::Stochastic {
            profile: Profile::Means(vec![0.2, 0.5, 0.6]),
        };
        let opts = RunOptions {
            strict: false,
            record_rows: true,
        };
        let tr = run_bobw(&inst, &spec, inst.default_params(), 500, 7, 0, opts).unwrap();
        assert_eq!(tr.total_cost, 0.25 * tr.observations as f64);
        let summed: f64 = tr.rows.iter().map(|r| r.round_cost).sum();
        assert_abs_diff_eq!(summed, tr.total_cost, epsilon = 1e-9);
        assert!(tr.rows.windows(2).all(|w| w[1].beta >= w[0].beta));
    }

    #[test]
    fn strict_mode_reports_violations() {
        // beta1 far below its required size forces gamma above 1/2
        let inst = paid_instance();
        let mut params = inst.default_params();
        params.beta1 = 1e-3;
        let err = run_bobw(&inst, &two_arm_env(), params, 10, 0, 0, RunOptions { strict: true, record_rows: false })
            .unwrap_err();
        assert!(matches!(err, Error::InvariantViolation { round: 1, .. }));
        let tr = run_bobw(&inst, &two_arm_env(), params, 10, 0, 0, RunOptions::default()).unwrap();
        assert!(!tr.violations.is_empty());
    }

    #[test]
    fn config_parses_inline_problem() {
        let json = r#"{
            "problem": {"type": "graph", "graph": {"k": 3, "edges": [[1,2],[2,3],[3,1]]}},
            "env": {"regime": "stochastic", "profile": {"means": [0.2, 0.5, 0.5]}},
            "horizon": 64, "replicates": 2, "seed": 5
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        let (summary, traces) = run_experiment(&cfg, true, Some(2)).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(summary.checkpoints.last().unwrap().t, 64);
        assert_eq!(summary.violations, 0);
    }
}
