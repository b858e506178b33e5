//! Comparison algorithms: plain DGD, constrained DGD with local projections,
//! and the distributed Polyak method that randomizes over every constraint.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::convex::{polyak_step, ConvexFn};
use crate::engine::{
    check_finite, consensus_descent, Recorder, RngStream, RunOptions, RunTrace, StepSchedule, DIVERGENCE_LIMIT,
};
use crate::error::{check_dim, Error, Result};
use crate::graph::{GraphSchedule, PerronVector, WeightMatrix};
use crate::linalg::{axpy, dist};
use crate::problem::{EpigraphProblem, Problem};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Dgd,
    ConstrainedDgd,
    DistributedPolyakRandom,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::Dgd,
        BaselineKind::ConstrainedDgd,
        BaselineKind::DistributedPolyakRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Dgd => "dgd",
            BaselineKind::ConstrainedDgd => "constrained-dgd",
            BaselineKind::DistributedPolyakRandom => "distributed-polyak-random",
        }
    }
}

/// Displacement threshold and sweep cap of the alternating projections.
pub const LOCAL_PROJECTION_TOL: f64 = 1e-10;
pub const LOCAL_PROJECTION_MAX_SWEEPS: usize = 10_000;
const LOCAL_FEASIBILITY_TOL: f64 = 1e-8;

/// `x_i <- sum_j a_ij x_j - zeta_k grad f_i(x_i)`
pub fn dgd_step<T: Scalar>(
    states: &[Vec<T>],
    a: &WeightMatrix<T>,
    objectives: &[ConvexFn<T>],
    zeta_k: T,
) -> Result<Vec<Vec<T>>> {
    check_dim(states.len(), objectives.len())?;
    let d = states.first().map_or(0, Vec::len);
    let zero = vec![T::zero(); d];
    let mut mixed = consensus_descent(states, a, &zero, T::zero())?;
    for ((x, f), old) in mixed.iter_mut().zip(objectives).zip(states) {
        check_dim(d, f.dim())?;
        axpy(-zeta_k, &f.subgrad(old), x);
    }
    Ok(mixed)
}

/// Minimizer of `sum_i pi_i f_i` for quadratic `f_i = w_i ||x - c_i||^2`:
/// the point DGD converges to on a digraph with Perron vector `pi`.
pub fn dgd_bias_predictor<T: Scalar>(pi: &PerronVector<T>, f: &[ConvexFn<T>]) -> Result<Vec<T>> {
    check_dim(pi.as_slice().len(), f.len())?;
    let dim = f.first().map_or(0, ConvexFn::dim);
    let mut numer = vec![T::zero(); dim];
    let mut denom = T::zero();
    for (&p, fi) in pi.as_slice().iter().zip(f) {
        let (w, c) = fi
            .as_squared_distance()
            .ok_or_else(|| Error::Unsupported("bias prediction needs quadratic objectives".into()))?;
        check_dim(dim, c.len())?;
        axpy(p * w, c, &mut numer);
        denom = denom + p * w;
    }
    if !(denom > T::zero()) {
        return Err(Error::Unsupported("weighted quadratic has no unique minimizer".into()));
    }
    Ok(numer.into_iter().map(|v| v / denom).collect())
}

/// Projects onto `X` intersected with the node's constraint sets by cyclic
/// alternating projections. Each constraint is projected on by a full Polyak
/// step, which is the exact Euclidean projection for balls and halfspaces.
pub fn project_local<T: Scalar>(problem: &Problem<T>, node: usize, x: &[T]) -> Result<Vec<T>> {
    let tol = T::lit(LOCAL_PROJECTION_TOL);
    let mut y = x.to_vec();
    for _ in 0..LOCAL_PROJECTION_MAX_SWEEPS {
        let start = y.clone();
        for g in &problem.constraints()[node] {
            y = polyak_step(&y, g, T::one())?;
        }
        problem.domain().project_in_place(&mut y);
        if dist(&start, &y) < tol {
            // disjoint sets also settle, on a cycle outside some of them
            let worst = problem.constraints()[node]
                .iter()
                .map(|g| g.eval(&y))
                .fold(T::neg_infinity(), T::max);
            if worst > T::lit(LOCAL_FEASIBILITY_TOL) {
                return Err(Error::Infeasible(format!(
                    "local feasible set of node {} is empty (violation {worst})",
                    node + 1
                )));
            }
            return Ok(y);
        }
    }
    Err(Error::Infeasible(format!(
        "alternating projections for node {} did not settle; its local feasible set may be empty",
        node + 1
    )))
}

/// Consensus, local subgradient step, then projection onto the node's own
/// feasible set.
pub fn constrained_dgd_step<T: Scalar>(
    states: &[Vec<T>],
    a: &WeightMatrix<T>,
    problem: &Problem<T>,
    zeta_k: T,
) -> Result<Vec<Vec<T>>> {
    let stepped = dgd_step(states, a, problem.objectives(), zeta_k)?;
    stepped
        .iter()
        .enumerate()
        .map(|(i, x)| project_local(problem, i, x))
        .collect()
}

/// D-RFP round without the fixed projection: the crucial constraint joins the
/// random pool as index 0, so `omega` is uniform on `{0, ..., tau_j}`.
pub fn distributed_polyak_step<T: Scalar>(
    states: &[Vec<T>],
    a: &WeightMatrix<T>,
    problem: &EpigraphProblem<T>,
    zeta_k: T,
    beta: T,
    streams: &mut [ChaCha8Rng],
) -> Result<Vec<Vec<T>>> {
    check_dim(problem.node_count(), streams.len())?;
    let mixed = consensus_descent(states, a, problem.cost(), zeta_k)?;
    mixed
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let relaxable = problem.relaxable(j);
            let omega = streams[j].random_range(0..=relaxable.len());
            let g = if omega == 0 {
                problem.crucial(j)
            } else {
                &relaxable[omega - 1]
            };
            let mut q = polyak_step(p, g, beta)?;
            problem.theta().project_in_place(&mut q);
            Ok(q)
        })
        .collect()
}

fn x_objective<T: Scalar>(problem: &Problem<T>) -> impl Fn(&[T]) -> T + '_ {
    let n = T::from_usize_lossy(problem.node_count());
    move |x| problem.total_objective(x) / n
}

fn simulate<T: Scalar>(
    init: Vec<Vec<T>>,
    schedule: &GraphSchedule<T>,
    steps: &StepSchedule<T>,
    options: &RunOptions<T>,
    mut step: impl FnMut(&[Vec<T>], &WeightMatrix<T>, T) -> Result<Vec<Vec<T>>>,
    violation: impl Fn(&[T]) -> T,
    objective: impl Fn(&[T]) -> T,
) -> Result<RunTrace<T>> {
    options.validate()?;
    check_dim(schedule.node_count(), init.len())?;
    let pi = schedule.consensus_weights()?;
    let mut recorder = Recorder::new(&pi, options.thinning, options.stop, options.max_iter);
    let limit = T::lit(DIVERGENCE_LIMIT);
    let mut states = init;
    let mut stopped_early = false;
    for k in 1..=options.max_iter {
        states = step(&states, schedule.matrix_at(k), steps.at(k))?;
        for (j, s) in states.iter().enumerate() {
            check_finite(s, limit, k, j)?;
        }
        if recorder.record(k, &states, &violation, &objective) {
            stopped_early = k < options.max_iter;
            break;
        }
    }
    Ok(recorder.finish(states, stopped_early))
}

/// DGD on the objectives alone, ignoring every constraint. Traces report
/// `F(x_bar) / n` so objectives are comparable with the epigraph cost.
pub fn run_dgd<T: Scalar>(
    problem: &Problem<T>,
    schedule: &GraphSchedule<T>,
    steps: &StepSchedule<T>,
    options: &RunOptions<T>,
) -> Result<RunTrace<T>> {
    let init = vec![vec![T::zero(); problem.dim()]; problem.node_count()];
    simulate(
        init,
        schedule,
        steps,
        options,
        |s, a, z| dgd_step(s, a, problem.objectives(), z),
        |x| problem.max_violation(x),
        x_objective(problem),
    )
}

pub fn run_constrained_dgd<T: Scalar>(
    problem: &Problem<T>,
    schedule: &GraphSchedule<T>,
    steps: &StepSchedule<T>,
    options: &RunOptions<T>,
) -> Result<RunTrace<T>> {
    let init = vec![vec![T::zero(); problem.dim()]; problem.node_count()];
    simulate(
        init,
        schedule,
        steps,
        options,
        |s, a, z| constrained_dgd_step(s, a, problem, z),
        |x| problem.max_violation(x),
        x_objective(problem),
    )
}

pub fn run_distributed_polyak<T: Scalar>(
    problem: &EpigraphProblem<T>,
    schedule: &GraphSchedule<T>,
    steps: &StepSchedule<T>,
    options: &RunOptions<T>,
    rng: RngStream,
) -> Result<RunTrace<T>> {
    let mut streams = rng.node_streams(problem.node_count());
    let init = vec![vec![T::zero(); problem.dim()]; problem.node_count()];
    simulate(
        init,
        schedule,
        steps,
        options,
        |s, a, z| distributed_polyak_step(s, a, problem, z, options.beta, &mut streams),
        |theta| problem.max_violation(theta),
        |theta| problem.objective(theta),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{ball_constraint, SimpleSet};
    use crate::graph::{perron_vector, uniform_row_weights, Digraph};
    use crate::problem::epigraph_transform;

    fn quadratics(centers: &[f64]) -> Vec<ConvexFn<f64>> {
        centers
            .iter()
            .map(|&c| ConvexFn::squared_distance(&[c], 1.0).unwrap())
            .collect()
    }

    fn unbalanced_pair() -> WeightMatrix<f64> {
        let g = Digraph::from_one_based(2, [(1, 2), (2, 1)]).unwrap();
        WeightMatrix::from_rows(&g, &[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap()
    }

    #[test]
    fn predictor_examples() {
        let f = quadratics(&[1.0, 4.0]);
        let uniform = PerronVector::uniform(2);
        assert_eq!(dgd_bias_predictor(&uniform, &f).unwrap(), vec![2.5]);
        let pi = perron_vector(&unbalanced_pair()).unwrap();
        let x = dgd_bias_predictor(&pi, &f).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12);
        let single = dgd_bias_predictor(&PerronVector::uniform(1), &quadratics(&[-7.0])).unwrap();
        assert_eq!(single, vec![-7.0]);
        let norms = vec![ConvexFn::weighted_distance(&[0.0], 1.0).unwrap()];
        assert!(matches!(
            dgd_bias_predictor(&PerronVector::uniform(1), &norms),
            Err(Error::Unsupported(_))
        ));
    }

    fn run_quadratic_dgd(a: WeightMatrix<f64>, centers: &[f64]) -> Vec<Vec<f64>> {
        let p = Problem::new(SimpleSet::whole(1), quadratics(centers), vec![vec![]; centers.len()]).unwrap();
        let opts = RunOptions::default().with_max_iter(20_000);
        run_dgd(&p, &GraphSchedule::fixed(a), &StepSchedule::harmonic(), &opts)
            .unwrap()
            .final_states
    }

    #[test]
    fn dgd_identical_objectives_reach_common_minimizer() {
        let g = Digraph::from_one_based(3, [(1, 2), (2, 3), (3, 1)]).unwrap();
        let states = run_quadratic_dgd(uniform_row_weights(&g), &[0.0, 0.0, 0.0]);
        assert!(states.iter().all(|s| s[0].abs() < 1e-9));
    }

    #[test]
    fn dgd_is_biased_on_unbalanced_pair() {
        let states = run_quadratic_dgd(unbalanced_pair(), &[1.0, 4.0]);
        for s in &states {
            assert!((s[0] - 3.0).abs() < 1e-3, "{s:?}");
        }
    }

    #[test]
    fn dgd_balanced_reaches_mean() {
        let g = Digraph::from_one_based(2, [(1, 2), (2, 1)]).unwrap();
        let states = run_quadratic_dgd(uniform_row_weights(&g), &[1.0, 4.0]);
        for s in &states {
            assert!((s[0] - 2.5).abs() < 1e-3, "{s:?}");
        }
    }

    fn local_problem(balls: Vec<(Vec<f64>, f64)>) -> Problem<f64> {
        let cons = balls.iter().map(|(c, r)| ball_constraint(c, *r).unwrap()).collect();
        Problem::new(
            SimpleSet::whole(2),
            vec![ConvexFn::weighted_distance(&[0.0, 0.0], 1.0).unwrap()],
            vec![cons],
        )
        .unwrap()
    }

    #[test]
    fn local_projection_single_ball_is_exact() {
        let p = local_problem(vec![(vec![0.0, 0.0], 1.0)]);
        let y = project_local(&p, 0, &[3.0, 4.0]).unwrap();
        assert!(dist(&y, &[0.6, 0.8]) < 1e-15);
    }

    #[test]
    fn local_projection_two_balls() {
        let p = local_problem(vec![(vec![0.0, 0.0], 1.0), (vec![1.0, 0.0], 1.0)]);
        let y = project_local(&p, 0, &[0.5, 3.0]).unwrap();
        assert!(p.max_violation(&y) < 1e-8, "{y:?}");
        let inside = [0.5, 0.1];
        assert_eq!(project_local(&p, 0, &inside).unwrap(), inside.to_vec());
    }

    #[test]
    fn local_projection_reports_empty_intersection() {
        let p = local_problem(vec![(vec![0.0, 0.0], 1.0), (vec![5.0, 0.0], 1.0)]);
        assert!(matches!(project_local(&p, 0, &[2.5, 0.0]), Err(Error::Infeasible(_))));
    }

    #[test]
    fn polyak_without_relaxable_constraints_always_hits_crucial() {
        let p = Problem::new(
            SimpleSet::whole(1),
            vec![ConvexFn::weighted_distance(&[2.0], 1.0).unwrap()],
            vec![vec![]],
        )
        .unwrap();
        let e = epigraph_transform(&p);
        let a = uniform_row_weights::<f64>(&Digraph::new(1, []).unwrap());
        let mut streams = RngStream::new(3).node_streams(1);
        let next = distributed_polyak_step(&[vec![0.0, 0.0]], &a, &e, 0.0, 1.0, &mut streams).unwrap();
        // violation 2, subgradient (-1, -1): step of 1 along (1, 1)
        assert_eq!(next, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn polyak_feasible_iterate_is_pure_consensus_descent() {
        let p = Problem::new(
            SimpleSet::whole(1),
            vec![ConvexFn::weighted_distance(&[0.0], 1.0).unwrap(); 2],
            vec![vec![ball_constraint(&[0.0], 1.0).unwrap()]; 2],
        )
        .unwrap();
        let e = epigraph_transform(&p);
        let a = unbalanced_pair();
        let states = vec![vec![0.1, 5.0, 5.0], vec![0.2, 6.0, 6.0]];
        let mut streams = RngStream::new(3).node_streams(2);
        let next = distributed_polyak_step(&states, &a, &e, 0.1, 1.0, &mut streams).unwrap();
        let expected = consensus_descent(&states, &a, e.cost(), 0.1).unwrap();
        assert_eq!(next, expected);
    }
}
