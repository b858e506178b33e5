//! Runs a configured experiment and writes its artifacts.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::baselines::{dgd_bias_predictor, run_constrained_dgd, run_dgd, run_distributed_polyak};
use crate::engine::{self, RngStream, RunTrace};
use crate::error::{Error, Result};
use crate::graph::{disagreement_contraction, is_jointly_strongly_connected, is_strongly_connected, GraphSchedule};
use crate::problem::epigraph_transform;

use super::config::{Algorithm, BuiltProblem, ExperimentConfig};
use super::facility::common_point;
use super::oracle::{default_resolution, grid_oracle, quadratic_oracle, OracleResult};

/// What `summary.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub algorithm: &'static str,
    pub seed: u64,
    pub iterations: usize,
    pub stopped_early: bool,
    pub consensus_weights: Vec<f64>,
    /// Last trace row.
    pub consensus_residual: f64,
    pub feasibility_violation: f64,
    pub objective: f64,
    /// `n * objective`, comparable with the total cost `F`.
    pub scaled_objective: f64,
    /// Decision block of the Perron-weighted final average.
    pub decision: Vec<f64>,
    /// `F` and the largest constraint violation, evaluated directly at `decision`.
    pub decision_objective: f64,
    pub decision_violation: f64,
    pub oracle: Option<OracleResult>,
    /// `|F(decision) - F*| / |F*|`.
    pub relative_gap: Option<f64>,
    /// Minimizer of the Perron-weighted objective, for DGD on quadratics.
    pub dgd_bias_prediction: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub trace: RunTrace<f64>,
    pub summary: Summary,
}

/// Structural facts checked by `validate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Validation {
    pub nodes: usize,
    pub dim: usize,
    pub period: usize,
    pub window: usize,
    pub consensus_weights: Vec<f64>,
    /// Spectral radius of `A - 1 pi^T` for a fixed graph.
    pub contraction: Option<f64>,
    /// A point strictly inside every ball, when the problem has balls.
    pub interior_point: Option<[f64; 2]>,
}

fn check_connectivity(cfg: &ExperimentConfig, schedule: &GraphSchedule<f64>) -> Result<usize> {
    let window = cfg.window(schedule);
    let ok = if schedule.period() == 1 {
        is_strongly_connected(schedule.graphs()[0].graph())
    } else {
        is_jointly_strongly_connected(schedule, window)?
    };
    if !ok {
        return Err(Error::Graph(format!(
            "graph schedule is not strongly connected over windows of {window} rounds"
        )));
    }
    Ok(window)
}

/// Checks everything short of running: graphs, connectivity, problem data
/// and, for facility instances, that the balls share an interior point.
pub fn validate(cfg: &ExperimentConfig) -> Result<Validation> {
    let schedule = cfg.schedule()?;
    let window = check_connectivity(cfg, &schedule)?;
    let built = cfg.build_problem()?;
    let problem = built.problem();
    if problem.node_count() != schedule.node_count() {
        return Err(Error::Config(format!(
            "graph has {} nodes but the problem has {}",
            schedule.node_count(),
            problem.node_count()
        )));
    }
    let pi = schedule.consensus_weights()?;
    let contraction = (schedule.period() == 1).then(|| disagreement_contraction(&schedule.graphs()[0], &pi));
    let interior_point = match &built {
        BuiltProblem::Facility { instance, .. } => Some(
            common_point(instance, 0.0)
                .ok_or_else(|| Error::Infeasible("constraint balls have no common point".into()))?,
        ),
        BuiltProblem::Quadratic(_) => None,
    };
    Ok(Validation {
        nodes: problem.node_count(),
        dim: problem.dim(),
        period: schedule.period(),
        window,
        consensus_weights: pi.into_vec(),
        contraction,
        interior_point,
    })
}

/// Centralized reference solution: a refined grid search for facility
/// instances, the closed form for quadratics.
pub fn run_oracle(cfg: &ExperimentConfig, built: &BuiltProblem) -> Result<OracleResult> {
    match built {
        BuiltProblem::Facility { instance, problem } => {
            let rect = instance.search_rect()?;
            let h = cfg.oracle.resolution.unwrap_or_else(|| default_resolution(&rect));
            grid_oracle(problem, &rect, h)
        }
        BuiltProblem::Quadratic(problem) => quadratic_oracle(problem),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    validate(cfg)?;
    let schedule = cfg.schedule()?;
    let built = cfg.build_problem()?;
    let problem = built.problem();
    let steps = cfg.step_schedule()?;
    let options = cfg.run_options();
    let rng = RngStream::new(cfg.seed);
    let trace = match cfg.algorithm {
        Algorithm::Drfp => engine::run(&epigraph_transform(problem), &schedule, &steps, &options, rng)?,
        Algorithm::DistributedPolyakRandom => {
            run_distributed_polyak(&epigraph_transform(problem), &schedule, &steps, &options, rng)?
        }
        Algorithm::Dgd => run_dgd(problem, &schedule, &steps, &options)?,
        Algorithm::ConstrainedDgd => run_constrained_dgd(problem, &schedule, &steps, &options)?,
    };
    let pi = schedule.consensus_weights()?;
    let dgd_bias_prediction = match (cfg.algorithm, &built) {
        (Algorithm::Dgd, BuiltProblem::Quadratic(p)) => Some(dgd_bias_predictor(&pi, p.objectives())?),
        _ => None,
    };
    let oracle = match run_oracle(cfg, &built) {
        Ok(o) => Some(o),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let last = *trace
        .last()
        .ok_or_else(|| Error::InvalidParameter("run recorded no iterations".into()))?;
    let decision = trace.final_average[..problem.dim()].to_vec();
    let decision_objective = problem.total_objective(&decision);
    let relative_gap = oracle
        .as_ref()
        .map(|o| (decision_objective - o.value).abs() / o.value.abs().max(f64::MIN_POSITIVE));
    let summary = Summary {
        name: cfg.display_name(),
        algorithm: cfg.algorithm.name(),
        seed: cfg.seed,
        iterations: trace.iterations(),
        stopped_early: trace.stopped_early,
        consensus_weights: pi.into_vec(),
        consensus_residual: last.consensus_residual,
        feasibility_violation: last.feasibility_violation,
        objective: last.objective,
        scaled_objective: last.objective * problem.node_count() as f64,
        decision_violation: problem.max_violation(&decision),
        decision,
        decision_objective,
        oracle,
        relative_gap,
        dgd_bias_prediction,
    };
    Ok(Outcome { trace, summary })
}

/// Writes `trace.csv`, `summary.json` and, when states were kept, `states.csv`.
pub fn write_outputs(dir: &Path, outcome: &Outcome) -> Result<()> {
    let ctx = |what: &str| format!("{what} in {}", dir.display());
    fs::create_dir_all(dir).map_err(|e| Error::io(ctx("creating output directory"), e))?;
    let create = |name: &str| File::create(dir.join(name)).map(BufWriter::new).map_err(|e| Error::io(ctx(name), e));
    outcome
        .trace
        .write_csv(create("trace.csv")?)
        .map_err(|e| Error::io(ctx("trace.csv"), e))?;
    if !outcome.trace.snapshots.is_empty() {
        outcome
            .trace
            .write_states_csv(create("states.csv")?)
            .map_err(|e| Error::io(ctx("states.csv"), e))?;
    }
    let mut json = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
    json.push('\n');
    fs::write(dir.join("summary.json"), json).map_err(|e| Error::io(ctx("summary.json"), e))
}

fn sci(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"))
}

/// One row per run: final metrics and the gap to the oracle.
pub fn compare_table(summaries: &[Summary]) -> String {
    let width = summaries.iter().map(|s| s.name.len()).max().unwrap_or(0).max(4);
    let mut out = format!(
        "{:<width$}  {:<26}  {:>8}  {:>10}  {:>10}  {:>12}  {:>10}\n",
        "name", "algorithm", "iters", "consensus", "violation", "F(x)", "gap"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<width$}  {:<26}  {:>8}  {:>10}  {:>10}  {:>12.6}  {:>10}",
            s.name,
            s.algorithm,
            s.iterations,
            sci(Some(s.consensus_residual)),
            sci(Some(s.decision_violation)),
            s.decision_objective,
            sci(s.relative_gap),
        );
    }
    out
}
