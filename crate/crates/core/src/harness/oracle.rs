//! Centralized reference solvers used to score distributed runs.

use serde::Serialize;

use crate::convex::polyak_step;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dist, norm};
use crate::problem::Problem;

use super::facility::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum OracleMethod {
    Grid { resolution: f64 },
    CentralizedProjectedSubgradient { iterations: usize },
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub xstar: Vec<f64>,
    pub value: f64,
    #[serde(flatten)]
    pub method: OracleMethod,
}

/// Constraint slack accepted as feasible by the oracles.
pub const ORACLE_FEASIBILITY_TOL: f64 = 1e-9;
pub const GRID_REFINEMENTS: usize = 3;

/// Exhaustive search over a planar grid of spacing `resolution` covering
/// `bounds`, keeping the best feasible point, then three rounds of local
/// refinement that each shrink the spacing tenfold around the incumbent.
pub fn grid_oracle(problem: &Problem<f64>, bounds: &Rect, resolution: f64) -> Result<OracleResult> {
    if problem.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "grid oracle handles planar problems only, got dimension {}",
            problem.dim()
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter(format!("grid resolution {resolution} must be positive")));
    }
    let feasible = |x: &[f64]| problem.is_feasible(x, ORACLE_FEASIBILITY_TOL);
    let mut best: Option<([f64; 2], f64)> = None;
    let scan = |lower: [f64; 2], upper: [f64; 2], h: f64, best: &mut Option<([f64; 2], f64)>| {
        let nx = ((upper[0] - lower[0]) / h).floor() as usize;
        let ny = ((upper[1] - lower[1]) / h).floor() as usize;
        for ix in 0..=nx {
            let x0 = lower[0] + ix as f64 * h;
            for iy in 0..=ny {
                let x = [x0, lower[1] + iy as f64 * h];
                if !feasible(&x) {
                    continue;
                }
                let v = problem.total_objective(&x);
                if best.is_none_or(|(_, bv)| v < bv) {
                    *best = Some((x, v));
                }
            }
        }
    };
    scan(bounds.lower, bounds.upper, resolution, &mut best);
    let mut h = resolution;
    for _ in 0..GRID_REFINEMENTS {
        let Some((center, _)) = best else { break };
        let reach = 5.0 * h;
        h /= 10.0;
        scan(
            [center[0] - reach, center[1] - reach],
            [center[0] + reach, center[1] + reach],
            h,
            &mut best,
        );
    }
    let (x, value) = best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no feasible grid point at resolution {resolution}; the problem is infeasible or the grid too coarse"
        ))
    })?;
    Ok(OracleResult {
        xstar: x.to_vec(),
        value,
        method: OracleMethod::Grid { resolution: h },
    })
}

/// Default grid spacing: 1e-3 of the longer side of the search box.
pub fn default_resolution(bounds: &Rect) -> f64 {
    1e-3 * bounds.side()
}

/// Euclidean projection onto `X` intersected with every constraint set by
/// Dykstra's algorithm. Constraint sets are projected on by full Polyak
/// steps, which is exact for ball and halfspace constraints.
pub fn dykstra_projection(problem: &Problem<f64>, x: &[f64]) -> Result<Vec<f64>> {
    let sets: Vec<_> = problem.constraints().iter().flatten().collect();
    let mut y = x.to_vec();
    // one correction per constraint set plus one for X
    let mut corrections = vec![vec![0.0; y.len()]; sets.len() + 1];
    for _ in 0..100_000 {
        let start = y.clone();
        for (idx, corr) in corrections.iter_mut().enumerate() {
            let mut shifted = y.clone();
            axpy(1.0, corr, &mut shifted);
            let projected = match sets.get(idx) {
                Some(g) => polyak_step(&shifted, g, 1.0)?,
                None => problem.domain().project(&shifted),
            };
            for ((c, s), p) in corr.iter_mut().zip(&shifted).zip(&projected) {
                *c = s - p;
            }
            y = projected;
        }
        if dist(&start, &y) < 1e-13 && problem.is_feasible(&y, ORACLE_FEASIBILITY_TOL) {
            return Ok(y);
        }
    }
    Err(Error::NotConverged {
        what: "Dykstra projection",
        iterations: 100_000,
    })
}

/// Centralized projected subgradient method `x <- P_C(x - a_k g_k)` with
/// `a_k = scale / k`, reporting the best iterate.
pub fn projected_subgradient_oracle(
    problem: &Problem<f64>,
    start: &[f64],
    scale: f64,
    iterations: usize,
) -> Result<OracleResult> {
    let mut x = dykstra_projection(problem, start)?;
    let mut best = (x.clone(), problem.total_objective(&x));
    for k in 1..=iterations {
        let mut g = vec![0.0; x.len()];
        for f in problem.objectives() {
            axpy(1.0, &f.subgrad(&x), &mut g);
        }
        let gn = norm(&g);
        if gn == 0.0 {
            break;
        }
        axpy(-scale / k as f64 / gn, &g, &mut x);
        x = dykstra_projection(problem, &x)?;
        let v = problem.total_objective(&x);
        if v < best.1 {
            best = (x.clone(), v);
        }
    }
    Ok(OracleResult {
        xstar: best.0,
        value: best.1,
        method: OracleMethod::CentralizedProjectedSubgradient { iterations },
    })
}

/// Exact minimizer of `sum_i w_i ||x - c_i||^2`.
pub fn quadratic_oracle(problem: &Problem<f64>) -> Result<OracleResult> {
    let uniform = crate::graph::PerronVector::uniform(problem.node_count());
    let xstar = crate::baselines::dgd_bias_predictor(&uniform, problem.objectives())?;
    if !problem.is_feasible(&xstar, ORACLE_FEASIBILITY_TOL) {
        return Err(Error::Unsupported(
            "closed-form oracle ignores constraints, but the minimizer violates them".into(),
        ));
    }
    Ok(OracleResult {
        value: problem.total_objective(&xstar),
        xstar,
        method: OracleMethod::ClosedForm,
    })
}
