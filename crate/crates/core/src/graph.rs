//! Communication topology: digraphs, row-stochastic weights, Perron vectors
//! and connectivity checks for fixed and switching graph sequences.
//!
//! Edge `(i, j)` means node `i` receives from node `j`. Every node is its own
//! in- and out-neighbor, so self-loops are always present regardless of input.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::Scalar;

/// Directed communication graph on nodes `0..n` (zero-based internally).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    in_neighbors: Vec<BTreeSet<usize>>,
}

impl Digraph {
    /// Builds a digraph from zero-based `(receiver, sender)` pairs.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("a digraph needs at least one node".into()));
        }
        let mut in_neighbors: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Graph(format!(
                    "edge ({}, {}) has an endpoint outside 1..={n}",
                    i + 1,
                    j + 1
                )));
            }
            in_neighbors[i].insert(j);
        }
        Ok(Digraph { n, in_neighbors })
    }

    /// Builds a digraph from one-based `(receiver, sender)` pairs, as used in
    /// edge-list files and configs.
    pub fn from_one_based(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut zero_based = Vec::new();
        for (i, j) in edges {
            if i == 0 || j == 0 {
                return Err(Error::Graph(format!("edge ({i}, {j}) uses index 0; nodes are 1-indexed")));
            }
            zero_based.push((i - 1, j - 1));
        }
        Digraph::new(n, zero_based)
    }

    /// Parses the plain-text edge list format:
    ///
    /// ```text
    /// nodes 3
    /// 1 2
    /// 2 3
    /// 3 1
    /// ```
    ///
    /// Each pair `i j` means node `i` receives from node `j` (1-indexed).
    /// Blank lines and `#` comments are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Graph(format!("line {}: cannot parse {raw:?}", lineno + 1));
            let mut tokens = line.split_whitespace();
            let first = tokens.next().ok_or_else(bad)?;
            if first == "nodes" {
                if n.is_some() {
                    return Err(Error::Graph(format!("line {}: duplicate header", lineno + 1)));
                }
                let count = tokens.next().and_then(|t| t.parse::<usize>().ok()).ok_or_else(bad)?;
                n = Some(count);
            } else {
                if n.is_none() {
                    return Err(Error::Graph("edge list must start with `nodes N`".into()));
                }
                let i = first.parse::<usize>().map_err(|_| bad())?;
                let j = tokens.next().and_then(|t| t.parse::<usize>().ok()).ok_or_else(bad)?;
                edges.push((i, j));
            }
            if tokens.next().is_some() {
                return Err(bad());
            }
        }
        let n = n.ok_or_else(|| Error::Graph("missing `nodes N` header".into()))?;
        Digraph::from_one_based(n, edges)
    }

    /// Renders the graph in the edge list format, omitting implicit self-loops.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("nodes {}\n", self.n);
        for (i, j) in self.edges() {
            if i != j {
                let _ = writeln!(out, "{} {}", i + 1, j + 1);
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// In-neighbors of node `i` (zero-based), including `i` itself.
    pub fn in_neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.in_neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.in_neighbors.get(i).is_some_and(|s| s.contains(&j))
    }

    /// All zero-based `(receiver, sender)` pairs, self-loops included.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.in_neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
    }

    /// Edge-set union of graphs on the same node set.
    pub fn union<'a>(graphs: impl IntoIterator<Item = &'a Digraph>) -> Result<Digraph> {
        let mut iter = graphs.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Graph("union of an empty graph list".into()))?;
        let mut out = first.clone();
        for g in iter {
            if g.n != out.n {
                return Err(Error::Graph(format!(
                    "cannot union graphs with {} and {} nodes",
                    out.n, g.n
                )));
            }
            for (i, s) in g.in_neighbors.iter().enumerate() {
                out.in_neighbors[i].extend(s.iter().copied());
            }
        }
        Ok(out)
    }

    /// Nodes reachable from `start` following information flow
    /// (sender to receiver) when `forward`, or against it otherwise.
    fn reach(&self, start: usize, forward: bool) -> Vec<bool> {
        let mut out_neighbors = vec![Vec::new(); self.n];
        if forward {
            for (i, j) in self.edges() {
                out_neighbors[j].push(i);
            }
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            let next: Box<dyn Iterator<Item = &usize>> = if forward {
                Box::new(out_neighbors[v].iter())
            } else {
                Box::new(self.in_neighbors[v].iter())
            };
            for &w in next {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }
}

/// True iff every node reaches every other node along directed paths.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    g.reach(0, true).iter().all(|&r| r) && g.reach(0, false).iter().all(|&r| r)
}

fn stochastic_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(16.0))
}

/// Nonnegative, row-stochastic matrix adapted to a [`Digraph`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix<T> {
    n: usize,
    entries: Vec<T>,
    graph: Digraph,
}

impl<T: Scalar> WeightMatrix<T> {
    /// Validates a dense row-major matrix literal against the graph: positive
    /// exactly on edges (diagonal included), zero elsewhere, rows summing to 1.
    pub fn from_rows(graph: &Digraph, rows: &[Vec<T>]) -> Result<Self> {
        let n = graph.node_count();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Graph(format!("weight matrix must be {n}x{n}")));
        }
        let tol = stochastic_tol::<T>();
        for (i, row) in rows.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                let edge = graph.has_edge(i, j);
                if !a.is_finite() || a < T::zero() || (edge && a == T::zero()) || (!edge && a != T::zero()) {
                    return Err(Error::Graph(format!(
                        "weight a[{}][{}] = {a} is not adapted to the digraph",
                        i + 1,
                        j + 1
                    )));
                }
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::Graph(format!("row {} sums to {sum}, not 1", i + 1)));
            }
        }
        Ok(WeightMatrix {
            n,
            entries: rows.iter().flatten().copied().collect(),
            graph: graph.clone(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn graph(&self) -> &Digraph {
        &self.graph
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.entries.chunks(self.n).map(<[T]>::to_vec).collect()
    }

    pub fn column_sums(&self) -> Vec<T> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j)).sum())
            .collect()
    }
}

/// Equal-neighbor rule: `a[i][j] = 1 / |N_i^in|` for every in-neighbor `j`.
pub fn uniform_row_weights<T: Scalar>(g: &Digraph) -> WeightMatrix<T> {
    let n = g.node_count();
    let mut entries = vec![T::zero(); n * n];
    for i in 0..n {
        let nbrs = g.in_neighbors(i);
        let w = T::one() / T::from_usize_lossy(nbrs.len());
        for &j in nbrs {
            entries[i * n + j] = w;
        }
    }
    WeightMatrix {
        n,
        entries,
        graph: g.clone(),
    }
}

/// True iff the matrix is also column-stochastic.
pub fn is_balanced<T: Scalar>(a: &WeightMatrix<T>) -> bool {
    let tol = stochastic_tol::<T>();
    a.column_sums().iter().all(|&s| (s - T::one()).abs() <= tol)
}

/// Positive left eigenvector of a row-stochastic matrix for eigenvalue 1,
/// normalized to sum one.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronVector<T>(Vec<T>);

impl<T: Scalar> PerronVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn uniform(n: usize) -> Self {
        PerronVector(vec![T::one() / T::from_usize_lossy(n); n])
    }
}

pub const PERRON_MAX_ITER: usize = 100_000;

/// Perron vector by left power iteration from the uniform vector.
pub fn perron_vector<T: Scalar>(a: &WeightMatrix<T>) -> Result<PerronVector<T>> {
    perron_of_dense(a.n, &a.entries, PERRON_MAX_ITER)
}

/// Digraph of the nonzero pattern of a dense row-major matrix.
fn pattern_graph<T: Scalar>(n: usize, m: &[T]) -> Result<Digraph> {
    Digraph::new(
        n,
        (0..n * n).filter(|&idx| m[idx] != T::zero()).map(|idx| (idx / n, idx % n)),
    )
}

pub(crate) fn perron_of_dense<T: Scalar>(n: usize, m: &[T], max_iter: usize) -> Result<PerronVector<T>> {
    if !is_strongly_connected(&pattern_graph(n, m)?) {
        return Err(Error::Graph(
            "no positive Perron vector: the digraph is not strongly connected".into(),
        ));
    }
    let tol = T::lit(1e-13).max(T::epsilon() * T::lit(8.0));
    let mut pi = vec![T::one() / T::from_usize_lossy(n); n];
    let mut next = vec![T::zero(); n];
    for _ in 0..max_iter {
        next.iter_mut().for_each(|v| *v = T::zero());
        for (i, &p) in pi.iter().enumerate() {
            if p != T::zero() {
                for (nj, &a) in next.iter_mut().zip(&m[i * n..(i + 1) * n]) {
                    *nj = *nj + p * a;
                }
            }
        }
        let total: T = next.iter().copied().sum();
        next.iter_mut().for_each(|v| *v = *v / total);
        let change = pi
            .iter()
            .zip(&next)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()));
        std::mem::swap(&mut pi, &mut next);
        if change < tol {
            return Ok(PerronVector(pi));
        }
    }
    Err(Error::NotConverged {
        what: "Perron power iteration (is the digraph strongly connected?)",
        iterations: max_iter,
    })
}

/// Spectral radius of `A - 1 pi^T`, the rate at which disagreement contracts.
///
/// Estimated by power iteration on the matrix itself through repeated
/// squaring, `rho = lim ||B^(2^s)||^(1/2^s)`, with renormalization at every
/// squaring. This stays valid for complex or defective dominant eigenvalues,
/// where vector power iteration oscillates.
pub fn disagreement_contraction<T: Scalar>(a: &WeightMatrix<T>, pi: &PerronVector<T>) -> T {
    let n = a.n;
    let mut m: Vec<T> = (0..n * n)
        .map(|idx| a.entries[idx] - pi.0[idx % n])
        .collect();
    let mut log_rho = T::zero();
    let mut scale = T::one();
    let mut prev = T::infinity();
    for _ in 0..60 {
        let norm = frobenius(&m);
        if norm == T::zero() {
            return T::zero();
        }
        m.iter_mut().for_each(|v| *v = *v / norm);
        log_rho = log_rho + norm.ln() * scale;
        let est = log_rho.exp();
        if (est - prev).abs() <= T::epsilon() * est.max(T::min_positive_value()) {
            return est;
        }
        prev = est;
        m = square(n, &m);
        scale = scale / T::lit(2.0);
    }
    prev
}

fn frobenius<T: Scalar>(m: &[T]) -> T {
    m.iter().map(|&v| v * v).sum::<T>().sqrt()
}

fn square<T: Scalar>(n: usize, m: &[T]) -> Vec<T> {
    mat_mul(n, m, m)
}

pub(crate) fn mat_mul<T: Scalar>(n: usize, left: &[T], right: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let l = left[i * n + k];
            if l == T::zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] = out[i * n + j] + l * right[k * n + j];
            }
        }
    }
    out
}

/// A switching sequence of weight matrices, visited cyclically.
///
/// Iterations are numbered from 1; round `k` uses `graphs[(k - 1) % len]`.
/// With two graphs this is the odd/even alternation.
#[derive(Debug, Clone)]
pub struct GraphSchedule<T> {
    graphs: Vec<WeightMatrix<T>>,
}

impl<T: Scalar> GraphSchedule<T> {
    pub fn cyclic(graphs: Vec<WeightMatrix<T>>) -> Result<Self> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::Graph("graph schedule is empty".into()))?;
        let n = first.node_count();
        if graphs.iter().any(|g| g.node_count() != n) {
            return Err(Error::Graph("all scheduled graphs must have the same node count".into()));
        }
        Ok(GraphSchedule { graphs })
    }

    pub fn fixed(a: WeightMatrix<T>) -> Self {
        GraphSchedule { graphs: vec![a] }
    }

    pub fn node_count(&self) -> usize {
        self.graphs[0].node_count()
    }

    pub fn period(&self) -> usize {
        self.graphs.len()
    }

    pub fn graphs(&self) -> &[WeightMatrix<T>] {
        &self.graphs
    }

    /// Weight matrix used in round `k` (1-based).
    pub fn matrix_at(&self, k: usize) -> &WeightMatrix<T> {
        &self.graphs[(k.max(1) - 1) % self.graphs.len()]
    }

    /// Perron vector of the one-period product `A_L ... A_1`, which the
    /// Perron-weighted network average is invariant under over a full period.
    /// For a fixed graph this is the Perron vector of `A`.
    pub fn consensus_weights(&self) -> Result<PerronVector<T>> {
        if self.graphs.len() == 1 {
            return perron_vector(&self.graphs[0]);
        }
        let n = self.node_count();
        let mut product = self.graphs[0].entries.clone();
        for g in &self.graphs[1..] {
            product = mat_mul(n, &g.entries, &product);
        }
        perron_of_dense(n, &product, PERRON_MAX_ITER)
    }
}

/// True iff for every start round the union of `window` consecutive graphs
/// is strongly connected. One period of start rounds suffices because the
/// schedule is cyclic.
pub fn is_jointly_strongly_connected<T: Scalar>(s: &GraphSchedule<T>, window: usize) -> Result<bool> {
    if window < 1 {
        return Err(Error::InvalidParameter("connectivity window must be at least 1".into()));
    }
    let len = s.period();
    for start in 0..len {
        let union = Digraph::union((0..window).map(|off| s.graphs[(start + off) % len].graph()))?;
        if !is_strongly_connected(&union) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle3() -> Digraph {
        Digraph::from_one_based(3, [(2, 1), (3, 2), (1, 3)]).unwrap()
    }

    fn two_node_unbalanced() -> WeightMatrix<f64> {
        let g = Digraph::from_one_based(2, [(1, 2), (2, 1)]).unwrap();
        WeightMatrix::from_rows(&g, &[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap()
    }

    #[test]
    fn strong_connectivity_basics() {
        assert!(is_strongly_connected(&Digraph::new(1, []).unwrap()));
        assert!(is_strongly_connected(&cycle3()));
        assert!(!is_strongly_connected(&Digraph::from_one_based(2, [(1, 2)]).unwrap()));
    }

    #[test]
    fn self_loops_are_forced() {
        let g = Digraph::new(3, []).unwrap();
        for i in 0..3 {
            assert!(g.has_edge(i, i));
        }
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Digraph::from_one_based(2, [(1, 3)]).is_err());
        assert!(Digraph::from_one_based(2, [(0, 1)]).is_err());
        assert!(Digraph::new(0, []).is_err());
    }

    #[test]
    fn uniform_weights() {
        let complete = Digraph::from_one_based(2, [(1, 2), (2, 1)]).unwrap();
        let a = uniform_row_weights::<f64>(&complete);
        assert!(a.to_rows().iter().flatten().all(|&v| v == 0.5));

        let lonely = Digraph::new(2, [(0, 1)]).unwrap();
        let a = uniform_row_weights::<f64>(&lonely);
        assert_eq!(a.row(1), &[0.0, 1.0]);

        let a = uniform_row_weights::<f64>(&cycle3());
        for i in 0..3 {
            let row = a.row(i);
            assert_eq!(row.iter().filter(|&&v| v == 0.5).count(), 2);
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn from_rows_validates_pattern() {
        let g = Digraph::from_one_based(2, [(1, 2)]).unwrap();
        assert!(WeightMatrix::from_rows(&g, &[vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        assert!(WeightMatrix::from_rows(&g, &[vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
        assert!(WeightMatrix::from_rows(&g, &[vec![0.5, 0.5], vec![0.0, 1.0]]).is_ok());
    }

    #[test]
    fn perron_of_doubly_stochastic_is_uniform() {
        let g = Digraph::from_one_based(3, [(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)]).unwrap();
        let a = uniform_row_weights::<f64>(&g);
        let pi = perron_vector(&a).unwrap();
        for &p in pi.as_slice() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn perron_two_node() {
        let pi = perron_vector(&two_node_unbalanced()).unwrap();
        assert!((pi.as_slice()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((pi.as_slice()[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perron_fails_without_strong_connectivity() {
        // Node 2 never hears from node 1: mass drains to node 2.
        let g = Digraph::from_one_based(2, [(1, 2)]).unwrap();
        let a = uniform_row_weights::<f64>(&g);
        assert!(perron_vector(&a).is_err());
    }

    #[test]
    fn balance() {
        let g = Digraph::from_one_based(3, [(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)]).unwrap();
        assert!(is_balanced(&uniform_row_weights::<f64>(&g)));
        assert!(!is_balanced(&two_node_unbalanced()));
        assert!(is_balanced(&uniform_row_weights::<f64>(&Digraph::new(4, []).unwrap())));
    }

    #[test]
    fn contraction_values() {
        let g = Digraph::from_one_based(2, [(1, 2), (2, 1)]).unwrap();
        let a = uniform_row_weights::<f64>(&g);
        let pi = perron_vector(&a).unwrap();
        assert_eq!(disagreement_contraction(&a, &pi), 0.0);

        let a = two_node_unbalanced();
        let pi = perron_vector(&a).unwrap();
        let rho = disagreement_contraction(&a, &pi);
        assert!((rho - 0.25).abs() < 1e-9, "rho = {rho}");

        let a = uniform_row_weights::<f64>(&cycle3());
        let pi = perron_vector(&a).unwrap();
        let rho = disagreement_contraction(&a, &pi);
        // eigenvalues of (I + P)/2 for the 3-cycle permutation P: |1 + w|/2 = 1/2
        assert!((rho - 0.5).abs() < 1e-9, "rho = {rho}");
    }

    #[test]
    fn joint_connectivity() {
        // Each half of the 4-cycle alone is a path; together they close the cycle.
        let left = Digraph::from_one_based(4, [(2, 1), (3, 2)]).unwrap();
        let right = Digraph::from_one_based(4, [(4, 3), (1, 4)]).unwrap();
        assert!(!is_strongly_connected(&left));
        assert!(!is_strongly_connected(&right));
        let s = GraphSchedule::cyclic(vec![
            uniform_row_weights::<f64>(&left),
            uniform_row_weights::<f64>(&right),
        ])
        .unwrap();
        assert!(is_jointly_strongly_connected(&s, 2).unwrap());
        assert!(!is_jointly_strongly_connected(&s, 1).unwrap());
        assert!(is_jointly_strongly_connected(&s, 0).is_err());

        let fixed = GraphSchedule::fixed(uniform_row_weights::<f64>(&cycle3()));
        assert!(is_jointly_strongly_connected(&fixed, 1).unwrap());

        // node 1 has no in-edges from others anywhere
        let a = Digraph::from_one_based(3, [(2, 1), (3, 2)]).unwrap();
        let b = Digraph::from_one_based(3, [(3, 1), (2, 3)]).unwrap();
        let s = GraphSchedule::cyclic(vec![uniform_row_weights::<f64>(&a), uniform_row_weights::<f64>(&b)]).unwrap();
        assert!(!is_jointly_strongly_connected(&s, 2).unwrap());
    }

    #[test]
    fn schedule_alternates_from_round_one() {
        let g1 = Digraph::from_one_based(2, [(1, 2)]).unwrap();
        let g2 = Digraph::from_one_based(2, [(2, 1)]).unwrap();
        let s = GraphSchedule::cyclic(vec![uniform_row_weights::<f64>(&g1), uniform_row_weights::<f64>(&g2)]).unwrap();
        assert_eq!(s.matrix_at(1).graph(), &g1);
        assert_eq!(s.matrix_at(2).graph(), &g2);
        assert_eq!(s.matrix_at(3).graph(), &g1);
        let pi = s.consensus_weights().unwrap();
        assert!(pi.as_slice().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "# ring\nnodes 3\n2 1\n3 2\n\n1 3  # closing edge\n";
        let g = Digraph::parse_edge_list(text).unwrap();
        assert_eq!(g, cycle3());
        assert_eq!(Digraph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        assert!(Digraph::parse_edge_list("1 2\n").is_err());
        assert!(Digraph::parse_edge_list("nodes 2\n1 x\n").is_err());
        assert!(Digraph::parse_edge_list("nodes 2\n1 2 3\n").is_err());
    }
}
