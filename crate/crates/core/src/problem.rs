//! Sum-of-local-objectives constrained problems and their epigraph form.

use crate::convex::{positive_part, ConvexFn, SimpleSet};
use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;
use crate::Scalar;

/// `min_{x in X} sum_i f_i(x)  s.t.  g_i(x) <= 0` over `n` nodes, where node
/// `i` privately knows `f_i` and its constraint list `g_i`.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    domain: SimpleSet<T>,
    objectives: Vec<ConvexFn<T>>,
    constraints: Vec<Vec<ConvexFn<T>>>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(domain: SimpleSet<T>, objectives: Vec<ConvexFn<T>>, constraints: Vec<Vec<ConvexFn<T>>>) -> Result<Self> {
        if objectives.is_empty() {
            return Err(Error::InvalidParameter("a problem needs at least one node".into()));
        }
        check_dim(objectives.len(), constraints.len())?;
        let m = domain.dim();
        for f in objectives.iter().chain(constraints.iter().flatten()) {
            check_dim(m, f.dim())?;
        }
        Ok(Problem {
            domain,
            objectives,
            constraints,
        })
    }

    /// Decision dimension `m`.
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn node_count(&self) -> usize {
        self.objectives.len()
    }

    pub fn domain(&self) -> &SimpleSet<T> {
        &self.domain
    }

    pub fn objectives(&self) -> &[ConvexFn<T>] {
        &self.objectives
    }

    pub fn constraints(&self) -> &[Vec<ConvexFn<T>>] {
        &self.constraints
    }

    /// `F(x) = sum_i f_i(x)`
    pub fn total_objective(&self, x: &[T]) -> T {
        self.objectives.iter().map(|f| f.eval(x)).sum()
    }

    /// Largest positive part over every local constraint at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        self.constraints
            .iter()
            .flatten()
            .map(|g| positive_part(g, x))
            .fold(T::zero(), T::max)
    }

    pub fn is_feasible(&self, x: &[T], tol: T) -> bool {
        self.domain.contains(x, tol) && self.max_violation(x) <= tol
    }
}

/// `Theta = X x R^tail`: a simple set on the leading block, free elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSet<T> {
    head: SimpleSet<T>,
    tail: usize,
}

impl<T: Scalar> ProductSet<T> {
    pub fn new(head: SimpleSet<T>, tail: usize) -> Self {
        ProductSet { head, tail }
    }

    pub fn head(&self) -> &SimpleSet<T> {
        &self.head
    }

    pub fn dim(&self) -> usize {
        self.head.dim() + self.tail
    }

    pub fn project_in_place(&self, theta: &mut [T]) {
        let m = self.head.dim();
        self.head.project_in_place(&mut theta[..m]);
    }

    pub fn contains(&self, theta: &[T], tol: T) -> bool {
        self.head.contains(&theta[..self.head.dim()], tol)
    }
}

/// Linear-objective problem `min_{theta in Theta} c^T theta` subject to one
/// crucial constraint `f_j(theta) <= 0` and a list of relaxable constraints
/// `g_j(theta) <= 0` per node.
///
/// [`epigraph_transform`] produces this from a [`Problem`] with
/// `theta = (x, t)`, `c = [0_m; 1_n] / n`, crucial constraints
/// `f_j(x) - t_j` and the `g_j` lifted to ignore `t`. Other instances of the
/// generic form can be assembled with [`EpigraphProblem::from_parts`].
#[derive(Debug, Clone)]
pub struct EpigraphProblem<T> {
    m: usize,
    cost: Vec<T>,
    theta: ProductSet<T>,
    crucial: Vec<ConvexFn<T>>,
    relaxable: Vec<Vec<ConvexFn<T>>>,
}

impl<T: Scalar> EpigraphProblem<T> {
    pub fn from_parts(
        cost: Vec<T>,
        theta: ProductSet<T>,
        crucial: Vec<ConvexFn<T>>,
        relaxable: Vec<Vec<ConvexFn<T>>>,
    ) -> Result<Self> {
        let d = theta.dim();
        check_dim(d, cost.len())?;
        check_dim(crucial.len(), relaxable.len())?;
        if crucial.is_empty() {
            return Err(Error::InvalidParameter("a problem needs at least one node".into()));
        }
        for f in crucial.iter().chain(relaxable.iter().flatten()) {
            check_dim(d, f.dim())?;
        }
        Ok(EpigraphProblem {
            m: theta.head().dim(),
            cost,
            theta,
            crucial,
            relaxable,
        })
    }

    /// Augmented dimension `d`.
    pub fn dim(&self) -> usize {
        self.cost.len()
    }

    /// Dimension of the leading `x` block.
    pub fn decision_dim(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.crucial.len()
    }

    pub fn cost(&self) -> &[T] {
        &self.cost
    }

    pub fn theta(&self) -> &ProductSet<T> {
        &self.theta
    }

    pub fn crucial(&self, j: usize) -> &ConvexFn<T> {
        &self.crucial[j]
    }

    pub fn relaxable(&self, j: usize) -> &[ConvexFn<T>] {
        &self.relaxable[j]
    }

    pub fn relaxable_count(&self) -> usize {
        self.relaxable.iter().map(Vec::len).sum()
    }

    pub fn objective(&self, theta: &[T]) -> T {
        dot(&self.cost, theta)
    }

    /// Largest positive part over all crucial and relaxable constraints.
    pub fn max_violation(&self, theta: &[T]) -> T {
        self.crucial
            .iter()
            .chain(self.relaxable.iter().flatten())
            .map(|f| positive_part(f, theta))
            .fold(T::zero(), T::max)
    }

    /// Zero-based coordinate of `t_j` for the 1-based node identifier `j`:
    /// the position selected by `e_j` inside the crucial constraint.
    pub fn node_selector(&self, j: usize) -> Result<usize> {
        let n = self.node_count();
        if j == 0 || j > n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        Ok(self.m + j - 1)
    }
}

/// Epigraph form: minimize `1^T t / n` over `(x, t) in X x R^n` subject to
/// `f_i(x) - t_i <= 0` and `g_i(x) <= 0`.
pub fn epigraph_transform<T: Scalar>(p: &Problem<T>) -> EpigraphProblem<T> {
    let m = p.dim();
    let n = p.node_count();
    let d = m + n;
    let inv_n = T::one() / T::from_usize_lossy(n);
    let mut cost = vec![T::zero(); d];
    cost[m..].iter_mut().for_each(|c| *c = inv_n);

    let crucial = p
        .objectives
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let mut minus_e = vec![T::zero(); d];
            minus_e[m + j] = -T::one();
            ConvexFn::weighted_sum(vec![
                (T::one(), ConvexFn::lift(f.clone(), d, 0).expect("x block fits")),
                (T::one(), ConvexFn::affine(minus_e, T::zero())),
            ])
            .expect("terms share dimension d")
        })
        .collect();
    let relaxable = p
        .constraints
        .iter()
        .map(|gs| {
            gs.iter()
                .map(|g| ConvexFn::lift(g.clone(), d, 0).expect("x block fits"))
                .collect()
        })
        .collect();

    EpigraphProblem {
        m,
        cost,
        theta: ProductSet::new(p.domain.clone(), n),
        crucial,
        relaxable,
    }
}

/// Stacks `(x, t)` into one augmented point.
pub fn stack<T: Scalar>(x: &[T], t: &[T]) -> Vec<T> {
    x.iter().chain(t).copied().collect()
}
