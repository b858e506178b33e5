//! Synchronous-round simulation of the D-RFP recursion: consensus descent
//! followed by a random and a fixed projection at every node.
//!
//! Every round each node `j`
//!
//! 1. mixes its in-neighbors' states and descends along the cost,
//!    `p_j = sum_i a_ji theta_i - zeta_k c`;
//! 2. takes a Polyak step toward one randomly drawn relaxable constraint,
//!    giving `q_j`;
//! 3. takes a Polyak step on its crucial constraint and projects onto
//!    `Theta`, giving the next state.
//!
//! All reads of a round happen on a frozen snapshot before any write.

mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convex::{check_beta, polyak_move, polyak_step, violation_distance, ConvexFn, PolyakMove};
use crate::error::{check_dim, Error, Result};
use crate::graph::{GraphSchedule, WeightMatrix};
use crate::linalg::axpy;
use crate::problem::{EpigraphProblem, ProductSet};
use crate::Scalar;

pub use trace::{RunTrace, Snapshot, StopRule, TraceRow, TRACE_HEADER};
pub(crate) use trace::Recorder;

/// Coordinates beyond this magnitude abort a run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Step sizes `zeta_k = scale / (k + offset)^power`, `k = 1, 2, ...`.
///
/// Restricting `power` to `(0.5, 1]` keeps the sum divergent and the sum of
/// squares finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule<T> {
    scale: T,
    offset: T,
    power: T,
}

impl<T: Scalar> StepSchedule<T> {
    pub fn new(scale: T, offset: T, power: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("step scale {scale} must be positive")));
        }
        if !(offset >= T::zero()) || !offset.is_finite() {
            return Err(Error::InvalidParameter(format!("step offset {offset} must be nonnegative")));
        }
        if !(power > T::lit(0.5) && power <= T::one()) {
            return Err(Error::InvalidParameter(format!("step power {power} must lie in (0.5, 1]")));
        }
        Ok(StepSchedule { scale, offset, power })
    }

    /// `zeta_k = 1 / k`
    pub fn harmonic() -> Self {
        StepSchedule {
            scale: T::one(),
            offset: T::zero(),
            power: T::one(),
        }
    }

    pub fn at(&self, k: usize) -> T {
        let base = T::from_usize_lossy(k) + self.offset;
        if self.power == T::one() {
            self.scale / base
        } else {
            self.scale / base.powf(self.power)
        }
    }
}

impl<T: Scalar> Default for StepSchedule<T> {
    fn default() -> Self {
        Self::harmonic()
    }
}

/// Seed for the per-node random streams. Node `j` draws from ChaCha stream
/// `j` of the seeded generator, so draws do not depend on evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed }
    }

    pub fn node_stream(&self, node: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(node as u64);
        rng
    }

    pub fn node_streams(&self, n: usize) -> Vec<ChaCha8Rng> {
        (0..n).map(|j| self.node_stream(j)).collect()
    }
}

/// Where the crucial constraint is evaluated in the fixed projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrucialEvaluation {
    /// At the freshest point `q_j` (after the random projection).
    #[default]
    AfterRandom,
    /// At the mixed point `p_j`, stepping from `q_j`.
    BeforeRandom,
}

/// How relaxable constraints are picked for the random projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    /// Uniform over the node's constraints, from its own random stream.
    #[default]
    Uniform,
    /// The constraint with the largest `g(x)_+ / ||u||`.
    MostViolated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions<T> {
    pub beta: T,
    pub max_iter: usize,
    /// Keep per-node states every `thinning` iterations; 0 keeps none.
    pub thinning: usize,
    pub stop: Option<StopRule<T>>,
    pub crucial_evaluation: CrucialEvaluation,
    pub selection: Selection,
    /// Random projections per round.
    pub random_projections: usize,
}

impl<T: Scalar> Default for RunOptions<T> {
    fn default() -> Self {
        RunOptions {
            beta: T::one(),
            max_iter: 100_000,
            thinning: 0,
            stop: None,
            crucial_evaluation: CrucialEvaluation::default(),
            selection: Selection::default(),
            random_projections: 1,
        }
    }
}

impl<T: Scalar> RunOptions<T> {
    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// `p_j = sum_i a_ji theta_i - zeta_k c` for every node, from one snapshot.
pub fn consensus_descent<T: Scalar>(states: &[Vec<T>], a: &WeightMatrix<T>, c: &[T], zeta_k: T) -> Result<Vec<Vec<T>>> {
    check_dim(a.node_count(), states.len())?;
    let d = c.len();
    for s in states {
        check_dim(d, s.len())?;
    }
    Ok((0..states.len())
        .map(|j| {
            let mut p = vec![T::zero(); d];
            for &i in a.graph().in_neighbors(j) {
                axpy(a.get(j, i), &states[i], &mut p);
            }
            axpy(-zeta_k, c, &mut p);
            p
        })
        .collect())
}

/// Polyak step toward the selected relaxable constraint `g_j[omega]`
/// (zero-based `omega`).
pub fn random_projection<T: Scalar>(p: &[T], g_j: &[ConvexFn<T>], omega: usize, beta: T) -> Result<Vec<T>> {
    let g = g_j.get(omega).ok_or(Error::IndexOutOfRange {
        index: omega + 1,
        len: g_j.len(),
    })?;
    polyak_step(p, g, beta)
}

/// Polyak step on the crucial constraint from `q`, evaluated at `q` or `p`
/// per `eval`, followed by projection onto `Theta`.
///
/// For the epigraph constraint `f_j(x) - t_j` the subgradient is
/// `(v_j, -e_j)` with squared norm `1 + ||v_j||^2`, so the `x` block moves
/// by `-beta * rho * v_j` and `t_j` by `+beta * rho`.
pub fn fixed_projection<T: Scalar>(
    q: &[T],
    p: &[T],
    crucial: &ConvexFn<T>,
    theta: &ProductSet<T>,
    beta: T,
    eval: CrucialEvaluation,
) -> Result<Vec<T>> {
    Ok(fixed_projection_detailed(q, p, crucial, theta, beta, eval)?.0)
}

fn fixed_projection_detailed<T: Scalar>(
    q: &[T],
    p: &[T],
    crucial: &ConvexFn<T>,
    theta: &ProductSet<T>,
    beta: T,
    eval: CrucialEvaluation,
) -> Result<(Vec<T>, Option<PolyakMove<T>>)> {
    check_dim(theta.dim(), q.len())?;
    check_dim(theta.dim(), p.len())?;
    let at = match eval {
        CrucialEvaluation::AfterRandom => q,
        CrucialEvaluation::BeforeRandom => p,
    };
    let mv = polyak_move(at, crucial, beta)?;
    let mut next = q.to_vec();
    if let Some(m) = &mv {
        axpy(-m.coefficient, &m.direction, &mut next);
    }
    theta.project_in_place(&mut next);
    Ok((next, mv))
}

/// What one node did in one round; handed to [`run_observed`] observers.
#[derive(Debug, Clone)]
pub struct NodeStep<'a, T> {
    pub iteration: usize,
    /// Zero-based node index.
    pub node: usize,
    pub previous: &'a [T],
    pub mixed: &'a [T],
    pub after_random: &'a [T],
    pub next: &'a [T],
    /// Zero-based indices of the relaxable constraints projected on, with
    /// the Polyak correction taken (`None` if already satisfied).
    pub random_moves: &'a [(usize, Option<PolyakMove<T>>)],
    /// Correction of the fixed projection (`None` if the crucial constraint held).
    pub crucial_move: Option<&'a PolyakMove<T>>,
}

/// Runs D-RFP from `theta_j = 0` on every node.
pub fn run<T: Scalar>(
    problem: &EpigraphProblem<T>,
    schedule: &GraphSchedule<T>,
    steps: &StepSchedule<T>,
    options: &RunOptions<T>,
    rng: RngStream,
) -> Result<RunTrace<T>> {
    run_observed(problem, schedule, steps, options, rng, |_| {})
}

/// [`run`] with a callback invoked for every node update.
pub fn run_observed<T: Scalar>(
    problem: &EpigraphProblem<T>,
    schedule: &GraphSchedule<T>,
    steps: &StepSchedule<T>,
    options: &RunOptions<T>,
    rng: RngStream,
    mut observer: impl FnMut(&NodeStep<'_, T>),
) -> Result<RunTrace<T>> {
    options.validate()?;
    let n = problem.node_count();
    check_dim(n, schedule.node_count())?;
    let d = problem.dim();
    let pi = schedule.consensus_weights()?;
    let mut streams = rng.node_streams(n);
    let mut states = vec![vec![T::zero(); d]; n];
    let mut recorder = Recorder::new(&pi, options.thinning, options.stop, options.max_iter);
    let mut moves = Vec::with_capacity(options.random_projections);
    let limit = T::lit(DIVERGENCE_LIMIT);

    let mut stopped_early = false;
    for k in 1..=options.max_iter {
        let mixed = consensus_descent(&states, schedule.matrix_at(k), problem.cost(), steps.at(k))?;
        let mut next_states = Vec::with_capacity(n);
        for (j, p) in mixed.iter().enumerate() {
            let constraints = problem.relaxable(j);
            let mut q = p.clone();
            moves.clear();
            if !constraints.is_empty() {
                for _ in 0..options.random_projections {
                    let omega = match options.selection {
                        Selection::Uniform => streams[j].random_range(0..constraints.len()),
                        Selection::MostViolated => most_violated(constraints, &q),
                    };
                    let mv = polyak_move(&q, &constraints[omega], options.beta)?;
                    if let Some(m) = &mv {
                        axpy(-m.coefficient, &m.direction, &mut q);
                    }
                    moves.push((omega, mv));
                }
            }
            let (next, crucial_move) = fixed_projection_detailed(
                &q,
                p,
                problem.crucial(j),
                problem.theta(),
                options.beta,
                options.crucial_evaluation,
            )?;
            check_finite(&next, limit, k, j)?;
            observer(&NodeStep {
                iteration: k,
                node: j,
                previous: &states[j],
                mixed: p,
                after_random: &q,
                next: &next,
                random_moves: &moves,
                crucial_move: crucial_move.as_ref(),
            });
            next_states.push(next);
        }
        states = next_states;
        if recorder.record(k, &states, |avg| problem.max_violation(avg), |avg| problem.objective(avg)) {
            stopped_early = k < options.max_iter;
            break;
        }
    }
    Ok(recorder.finish(states, stopped_early))
}

pub(crate) fn most_violated<T: Scalar>(constraints: &[ConvexFn<T>], x: &[T]) -> usize {
    let mut best = 0;
    let mut best_dist = T::neg_infinity();
    for (l, g) in constraints.iter().enumerate() {
        let dist = violation_distance(g, x);
        if dist > best_dist {
            best = l;
            best_dist = dist;
        }
    }
    best
}

pub(crate) fn check_finite<T: Scalar>(state: &[T], limit: T, iteration: usize, node: usize) -> Result<()> {
    if let Some((c, v)) = state.iter().enumerate().find(|(_, v)| !v.is_finite() || v.abs() > limit) {
        return Err(Error::Divergence {
            iteration,
            node: node + 1,
            detail: format!("coordinate {} = {v}", c + 1),
        });
    }
    Ok(())
}
