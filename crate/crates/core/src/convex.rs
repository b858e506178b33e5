//! Convex functions with subgradient oracles, Polyak projection steps and
//! exact projections onto simple sets.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, norm, norm_sq};
use crate::Scalar;

/// A convex function `R^dim -> R` with a subgradient oracle.
///
/// Only convexity-preserving constructors are exposed, so every value of this
/// type is convex by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFn<T> {
    dim: usize,
    kind: Kind<T>,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind<T> {
    /// `a^T x + b`
    Affine { a: Vec<T>, b: T },
    /// `weight * ||M x + shift||`, `M` row-major with `shift.len()` rows;
    /// `None` stands for the identity.
    Norm {
        weight: T,
        matrix: Option<Vec<T>>,
        shift: Vec<T>,
    },
    /// `weight * ||x - center||^2`
    SquaredDistance { weight: T, center: Vec<T> },
    Max(Box<ConvexFn<T>>, Box<ConvexFn<T>>),
    /// Nonnegative combination.
    Sum(Vec<(T, ConvexFn<T>)>),
    /// `inner(x[offset..offset + inner.dim])`
    Lift { inner: Box<ConvexFn<T>>, offset: usize },
}

impl<T: Scalar> ConvexFn<T> {
    pub fn affine(a: Vec<T>, b: T) -> Self {
        ConvexFn {
            dim: a.len(),
            kind: Kind::Affine { a, b },
        }
    }

    pub fn constant(dim: usize, b: T) -> Self {
        Self::affine(vec![T::zero(); dim], b)
    }

    /// `weight * ||M x + shift||` for a dense row-major `M` with
    /// `shift.len()` rows and `dim` columns.
    pub fn norm_of_affine(weight: T, dim: usize, matrix: Vec<T>, shift: Vec<T>) -> Result<Self> {
        if weight < T::zero() {
            return Err(Error::InvalidParameter(format!("norm weight {weight} is negative")));
        }
        check_dim(shift.len() * dim, matrix.len())?;
        Ok(ConvexFn {
            dim,
            kind: Kind::Norm {
                weight,
                matrix: Some(matrix),
                shift,
            },
        })
    }

    /// `w * ||x - q||`, with the zero vector as subgradient at the kink `x = q`.
    pub fn weighted_distance(q: &[T], w: T) -> Result<Self> {
        if w < T::zero() {
            return Err(Error::InvalidParameter(format!("weight {w} is negative")));
        }
        Ok(ConvexFn {
            dim: q.len(),
            kind: Kind::Norm {
                weight: w,
                matrix: None,
                shift: q.iter().map(|&v| -v).collect(),
            },
        })
    }

    /// `w * ||x - c||^2`
    pub fn squared_distance(c: &[T], w: T) -> Result<Self> {
        if w < T::zero() {
            return Err(Error::InvalidParameter(format!("weight {w} is negative")));
        }
        Ok(ConvexFn {
            dim: c.len(),
            kind: Kind::SquaredDistance {
                weight: w,
                center: c.to_vec(),
            },
        })
    }

    /// Pointwise maximum.
    pub fn max(f: ConvexFn<T>, g: ConvexFn<T>) -> Result<Self> {
        check_dim(f.dim, g.dim)?;
        Ok(ConvexFn {
            dim: f.dim,
            kind: Kind::Max(Box::new(f), Box::new(g)),
        })
    }

    /// Nonnegative weighted sum of functions sharing one input dimension.
    pub fn weighted_sum(terms: Vec<(T, ConvexFn<T>)>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, f)| f.dim)
            .ok_or_else(|| Error::InvalidParameter("empty weighted sum".into()))?;
        for (w, f) in &terms {
            check_dim(dim, f.dim)?;
            if *w < T::zero() {
                return Err(Error::InvalidParameter(format!("sum weight {w} is negative")));
            }
        }
        Ok(ConvexFn {
            dim,
            kind: Kind::Sum(terms),
        })
    }

    /// Embeds `f` into `R^dim`, reading its argument from coordinates
    /// `offset..offset + f.dim()` and ignoring the rest.
    pub fn lift(f: ConvexFn<T>, dim: usize, offset: usize) -> Result<Self> {
        if offset + f.dim > dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: offset + f.dim,
            });
        }
        Ok(ConvexFn {
            dim,
            kind: Kind::Lift {
                inner: Box::new(f),
                offset,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.dim, "ConvexFn evaluated at a point of the wrong dimension");
        self.eval_unchecked(x)
    }

    fn eval_unchecked(&self, x: &[T]) -> T {
        match &self.kind {
            Kind::Affine { a, b } => dot(a, x) + *b,
            Kind::Norm {
                weight,
                matrix: None,
                shift,
            } => {
                *weight
                    * x.iter()
                        .zip(shift)
                        .map(|(&xi, &si)| (xi + si) * (xi + si))
                        .sum::<T>()
                        .sqrt()
            }
            Kind::Norm { weight, matrix, shift } => *weight * norm(&self.norm_residual(matrix, shift, x)),
            Kind::SquaredDistance { weight, center } => {
                *weight
                    * x.iter()
                        .zip(center)
                        .map(|(&xi, &ci)| (xi - ci) * (xi - ci))
                        .sum::<T>()
            }
            Kind::Max(f, g) => f.eval_unchecked(x).max(g.eval_unchecked(x)),
            Kind::Sum(terms) => terms.iter().map(|(w, f)| *w * f.eval_unchecked(x)).sum(),
            Kind::Lift { inner, offset } => inner.eval_unchecked(&x[*offset..*offset + inner.dim]),
        }
    }

    /// A member of the subdifferential at `x`.
    pub fn subgrad(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.dim, "ConvexFn subgradient at a point of the wrong dimension");
        let mut g = vec![T::zero(); self.dim];
        self.accumulate_subgrad(x, T::one(), &mut g);
        g
    }

    /// `out += scale * subgrad(x)`
    fn accumulate_subgrad(&self, x: &[T], scale: T, out: &mut [T]) {
        match &self.kind {
            Kind::Affine { a, .. } => axpy(scale, a, out),
            Kind::Norm { weight, matrix, shift } => {
                let r = self.norm_residual(matrix, shift, x);
                let len = norm(&r);
                if len == T::zero() {
                    return;
                }
                let c = scale * *weight / len;
                match matrix {
                    None => axpy(c, &r, out),
                    Some(m) => {
                        for (row, &ri) in m.chunks(self.dim).zip(&r) {
                            axpy(c * ri, row, out);
                        }
                    }
                }
            }
            Kind::SquaredDistance { weight, center } => {
                let c = scale * *weight * T::lit(2.0);
                for ((o, &xi), &ci) in out.iter_mut().zip(x).zip(center) {
                    *o = *o + c * (xi - ci);
                }
            }
            Kind::Max(f, g) => {
                if f.eval_unchecked(x) >= g.eval_unchecked(x) {
                    f.accumulate_subgrad(x, scale, out);
                } else {
                    g.accumulate_subgrad(x, scale, out);
                }
            }
            Kind::Sum(terms) => {
                for (w, f) in terms {
                    f.accumulate_subgrad(x, scale * *w, out);
                }
            }
            Kind::Lift { inner, offset } => {
                let end = *offset + inner.dim;
                inner.accumulate_subgrad(&x[*offset..end], scale, &mut out[*offset..end]);
            }
        }
    }

    fn norm_residual(&self, matrix: &Option<Vec<T>>, shift: &[T], x: &[T]) -> Vec<T> {
        match matrix {
            None => x.iter().zip(shift).map(|(&xi, &si)| xi + si).collect(),
            Some(m) => m
                .chunks(self.dim)
                .zip(shift)
                .map(|(row, &si)| dot(row, x) + si)
                .collect(),
        }
    }

    /// `(weight, center)` when the function is a single `w * ||x - c||^2`.
    pub fn as_squared_distance(&self) -> Option<(T, &[T])> {
        match &self.kind {
            Kind::SquaredDistance { weight, center } => Some((*weight, center)),
            _ => None,
        }
    }
}

/// `g(x) = ||x - p|| - l`; `g(x) <= 0` is membership in the closed ball.
pub fn ball_constraint<T: Scalar>(p: &[T], l: T) -> Result<ConvexFn<T>> {
    if !(l > T::zero()) {
        return Err(Error::InvalidParameter(format!("ball radius {l} must be positive")));
    }
    ConvexFn::weighted_sum(vec![
        (T::one(), ConvexFn::weighted_distance(p, T::one())?),
        (T::one(), ConvexFn::constant(p.len(), -l)),
    ])
}

/// `max(0, f(x))`
pub fn positive_part<T: Scalar>(f: &ConvexFn<T>, x: &[T]) -> T {
    f.eval(x).max(T::zero())
}

/// Separation measure `f(x)_+ / ||u||` of a point from `{f <= 0}`.
pub fn violation_distance<T: Scalar>(f: &ConvexFn<T>, x: &[T]) -> T {
    let v = positive_part(f, x);
    if v == T::zero() {
        return T::zero();
    }
    v / norm(&f.subgrad(x))
}

pub(crate) fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if beta > T::zero() && beta < T::lit(2.0) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("beta = {beta} must lie in (0, 2)")))
    }
}

/// The correction a Polyak step applies: `coefficient * direction` is
/// subtracted from the point, with `coefficient = beta * f_+ / ||u||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyakMove<T> {
    pub violation: T,
    pub coefficient: T,
    pub direction: Vec<T>,
}

impl<T: Scalar> PolyakMove<T> {
    /// `violation^2 / ||u||^2`, the squared-distance decrease scale.
    pub fn decrease_scale(&self) -> T {
        self.violation * self.violation / norm_sq(&self.direction)
    }
}

/// Evaluates the Polyak correction for `f` at `at`. Returns `None` when the
/// constraint holds there: the step coefficient is zero, so the fallback
/// direction the update rule stipulates never needs to be materialized.
pub fn polyak_move<T: Scalar>(at: &[T], f: &ConvexFn<T>, beta: T) -> Result<Option<PolyakMove<T>>> {
    check_beta(beta)?;
    check_dim(f.dim(), at.len())?;
    let violation = positive_part(f, at);
    if violation == T::zero() {
        return Ok(None);
    }
    let u = f.subgrad(at);
    let u_sq = norm_sq(&u);
    if !(u_sq > T::zero()) {
        return Err(Error::DegenerateSubgradient {
            violation: violation.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Some(PolyakMove {
        violation,
        coefficient: beta * violation / u_sq,
        direction: u,
    }))
}

/// One Polyak projection step `y - beta * f(y)_+ / ||u||^2 * u`.
pub fn polyak_step<T: Scalar>(y: &[T], f: &ConvexFn<T>, beta: T) -> Result<Vec<T>> {
    let mut z = y.to_vec();
    if let Some(mv) = polyak_move(y, f, beta)? {
        axpy(-mv.coefficient, &mv.direction, &mut z);
    }
    Ok(z)
}

/// Closed convex set with a closed-form Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum SimpleSet<T> {
    WholeSpace { dim: usize },
    Box { lower: Vec<T>, upper: Vec<T> },
    Ball { center: Vec<T>, radius: T },
    /// `{x : normal^T x <= offset}`
    Halfspace { normal: Vec<T>, offset: T },
}

impl<T: Scalar> SimpleSet<T> {
    pub fn whole(dim: usize) -> Self {
        SimpleSet::WholeSpace { dim }
    }

    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParameter("box lower bound exceeds upper bound".into()));
        }
        Ok(SimpleSet::Box { lower, upper })
    }

    pub fn ball(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidParameter(format!("ball radius {radius} must be positive")));
        }
        Ok(SimpleSet::Ball { center, radius })
    }

    pub fn halfspace(normal: Vec<T>, offset: T) -> Result<Self> {
        if norm_sq(&normal) == T::zero() {
            return Err(Error::InvalidParameter("halfspace normal must be nonzero".into()));
        }
        Ok(SimpleSet::Halfspace { normal, offset })
    }

    pub fn dim(&self) -> usize {
        match self {
            SimpleSet::WholeSpace { dim } => *dim,
            SimpleSet::Box { lower, .. } => lower.len(),
            SimpleSet::Ball { center, .. } => center.len(),
            SimpleSet::Halfspace { normal, .. } => normal.len(),
        }
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        match self {
            SimpleSet::WholeSpace { .. } => true,
            SimpleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol),
            SimpleSet::Ball { center, radius } => crate::linalg::dist(x, center) <= *radius + tol,
            SimpleSet::Halfspace { normal, offset } => dot(normal, x) <= *offset + tol,
        }
    }

    /// Euclidean projection, written into `x` in place.
    pub fn project_in_place(&self, x: &mut [T]) {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            SimpleSet::WholeSpace { .. } => {}
            SimpleSet::Box { lower, upper } => {
                for ((v, &l), &u) in x.iter_mut().zip(lower).zip(upper) {
                    *v = v.max(l).min(u);
                }
            }
            SimpleSet::Ball { center, radius } => {
                let d = crate::linalg::dist(x, center);
                if d > *radius {
                    let s = *radius / d;
                    for (v, &c) in x.iter_mut().zip(center) {
                        *v = c + (*v - c) * s;
                    }
                }
            }
            SimpleSet::Halfspace { normal, offset } => {
                let excess = dot(normal, x) - *offset;
                if excess > T::zero() {
                    axpy(-excess / norm_sq(normal), normal, x);
                }
            }
        }
    }

    pub fn project(&self, x: &[T]) -> Vec<T> {
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        out
    }
}
