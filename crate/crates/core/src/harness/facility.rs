//! Planar facility location: place one facility `x` minimizing
//! `sum_i w_i ||x - q_i||` while every node `i` keeps `x` inside its two
//! resource balls.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::convex::{ball_constraint, ConvexFn, SimpleSet};
use crate::error::{Error, Result};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Axis-aligned rectangle `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Rect {
    pub fn side(&self) -> f64 {
        (self.upper[0] - self.lower[0]).max(self.upper[1] - self.lower[1])
    }

    fn of_ball(b: &Ball) -> Rect {
        Rect {
            lower: [b.center[0] - b.radius, b.center[1] - b.radius],
            upper: [b.center[0] + b.radius, b.center[1] + b.radius],
        }
    }

    fn hull(&self, other: &Rect) -> Rect {
        Rect {
            lower: [self.lower[0].min(other.lower[0]), self.lower[1].min(other.lower[1])],
            upper: [self.upper[0].max(other.upper[0]), self.upper[1].max(other.upper[1])],
        }
    }

    /// `None` when the rectangles do not overlap.
    fn meet(&self, other: &Rect) -> Option<Rect> {
        let r = Rect {
            lower: [self.lower[0].max(other.lower[0]), self.lower[1].max(other.lower[1])],
            upper: [self.upper[0].min(other.upper[0]), self.upper[1].min(other.upper[1])],
        };
        (r.lower[0] <= r.upper[0] && r.lower[1] <= r.upper[1]).then_some(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilityLocation {
    pub weights: Vec<f64>,
    pub anchors: Vec<[f64; 2]>,
    /// `balls[i]` are node `i`'s resource constraints `||x - p|| <= l`.
    pub balls: Vec<Vec<Ball>>,
    /// The shared set `X`; `None` means the box enclosing all balls.
    #[serde(default)]
    pub domain: Option<Rect>,
}

impl FacilityLocation {
    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n == 0 {
            return Err(Error::Config("facility location needs at least one node".into()));
        }
        if self.anchors.len() != n || self.balls.len() != n {
            return Err(Error::Config(format!(
                "expected {n} anchors and {n} ball lists, got {} and {}",
                self.anchors.len(),
                self.balls.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config(format!("weight {w} must be finite and nonnegative")));
        }
        for b in self.balls.iter().flatten() {
            if !(b.radius > 0.0) || !b.radius.is_finite() {
                return Err(Error::Config(format!("ball radius {} must be positive", b.radius)));
            }
        }
        if let Some(d) = &self.domain {
            if !(d.lower[0] <= d.upper[0] && d.lower[1] <= d.upper[1]) {
                return Err(Error::Config("domain lower corner exceeds upper corner".into()));
            }
        }
        Ok(())
    }

    /// `X`: the configured domain, or the box enclosing all balls and anchors.
    pub fn domain_rect(&self) -> Rect {
        if let Some(d) = self.domain {
            return d;
        }
        let mut r = Rect {
            lower: self.anchors[0],
            upper: self.anchors[0],
        };
        for a in &self.anchors {
            r = r.hull(&Rect { lower: *a, upper: *a });
        }
        for b in self.balls.iter().flatten() {
            r = r.hull(&Rect::of_ball(b));
        }
        r
    }

    /// Smallest box known to contain the feasible set: `X` met with every
    /// ball's bounding square.
    pub fn search_rect(&self) -> Result<Rect> {
        self.balls
            .iter()
            .flatten()
            .try_fold(self.domain_rect(), |acc, b| acc.meet(&Rect::of_ball(b)))
            .ok_or_else(|| Error::Infeasible("constraint balls have no common bounding region".into()))
    }

    pub fn to_problem(&self) -> Result<Problem<f64>> {
        self.validate()?;
        let d = self.domain_rect();
        let objectives = self
            .weights
            .iter()
            .zip(&self.anchors)
            .map(|(&w, q)| ConvexFn::weighted_distance(q, w))
            .collect::<Result<Vec<_>>>()?;
        let constraints = self
            .balls
            .iter()
            .map(|bs| bs.iter().map(|b| ball_constraint(&b.center, b.radius)).collect())
            .collect::<Result<Vec<_>>>()?;
        Problem::new(SimpleSet::boxed(d.lower.to_vec(), d.upper.to_vec())?, objectives, constraints)
    }
}

/// Five-node instance used by the shipped experiments.
///
/// The anchors spread around the feasible lens so the unconstrained weighted
/// median lies outside it, and the weights differ so that a Perron-weighted
/// objective has a different minimizer than the true one.
pub fn default_instance() -> FacilityLocation {
    FacilityLocation {
        weights: vec![1.0, 2.0, 1.5, 0.5, 1.0],
        anchors: vec![[0.0, 0.0], [4.0, 0.5], [3.5, 4.0], [-1.0, 3.5], [1.5, -2.0]],
        balls: vec![
            vec![
                Ball { center: [0.0, 2.0], radius: 3.0 },
                Ball { center: [1.5, 1.5], radius: 2.5 },
            ],
            vec![
                Ball { center: [1.0, 3.0], radius: 2.5 },
                Ball { center: [0.5, 1.0], radius: 3.0 },
            ],
            vec![
                Ball { center: [-0.5, 1.0], radius: 3.0 },
                Ball { center: [1.0, 2.0], radius: 2.0 },
            ],
            vec![
                Ball { center: [2.0, 2.5], radius: 3.0 },
                Ball { center: [0.0, 0.5], radius: 3.5 },
            ],
            vec![
                Ball { center: [1.0, 4.0], radius: 3.0 },
                Ball { center: [-1.0, 2.0], radius: 3.5 },
            ],
        ],
        domain: None,
    }
}

/// Sampling ranges for [`generate_facility_location`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryBounds {
    /// Anchors are uniform on `[-h, h]^2`.
    pub anchor_half_width: f64,
    /// Ball centers are uniform on `[-h, h]^2`; 0 puts them at the origin.
    pub center_half_width: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub balls_per_node: usize,
}

impl Default for GeometryBounds {
    fn default() -> Self {
        GeometryBounds {
            anchor_half_width: 5.0,
            center_half_width: 2.0,
            radius_min: 2.0,
            radius_max: 4.0,
            weight_min: 0.5,
            weight_max: 2.0,
            balls_per_node: 2,
        }
    }
}

pub const GENERATOR_MAX_ATTEMPTS: usize = 10_000;

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Samples an instance whose `2n` balls share a common interior point,
/// rejecting draws until one does.
pub fn generate_facility_location<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    bounds: &GeometryBounds,
) -> Result<FacilityLocation> {
    if n == 0 {
        return Err(Error::Config("cannot generate an instance with zero nodes".into()));
    }
    if !(bounds.radius_min > 0.0 && bounds.radius_min <= bounds.radius_max) {
        return Err(Error::Config("radius range must satisfy 0 < radius_min <= radius_max".into()));
    }
    if !(bounds.weight_min >= 0.0 && bounds.weight_min <= bounds.weight_max) {
        return Err(Error::Config("weight range must satisfy 0 <= weight_min <= weight_max".into()));
    }
    if bounds.anchor_half_width < 0.0 || bounds.center_half_width < 0.0 {
        return Err(Error::Config("half widths must be nonnegative".into()));
    }
    let point = |rng: &mut R, h: f64| [uniform(rng, -h, h), uniform(rng, -h, h)];
    for _ in 0..GENERATOR_MAX_ATTEMPTS {
        let weights = (0..n).map(|_| uniform(rng, bounds.weight_min, bounds.weight_max)).collect();
        let anchors = (0..n).map(|_| point(rng, bounds.anchor_half_width)).collect();
        let balls = (0..n)
            .map(|_| {
                (0..bounds.balls_per_node)
                    .map(|_| Ball {
                        center: point(rng, bounds.center_half_width),
                        radius: uniform(rng, bounds.radius_min, bounds.radius_max),
                    })
                    .collect()
            })
            .collect();
        let inst = FacilityLocation {
            weights,
            anchors,
            balls,
            domain: None,
        };
        let margin = 1e-3 * bounds.radius_min;
        if common_point(&inst, margin).is_some() {
            return Ok(inst);
        }
    }
    Err(Error::Infeasible(format!(
        "no instance with a common feasible point after {GENERATOR_MAX_ATTEMPTS} draws"
    )))
}

/// A point at least `margin` inside every ball, found by cyclic projections
/// onto the shrunken balls.
pub fn common_point(inst: &FacilityLocation, margin: f64) -> Option<[f64; 2]> {
    let balls: Vec<Ball> = inst
        .balls
        .iter()
        .flatten()
        .map(|b| Ball {
            center: b.center,
            radius: b.radius - margin,
        })
        .collect();
    if balls.iter().any(|b| b.radius <= 0.0) {
        return None;
    }
    let Some(first) = balls.first() else {
        return Some(inst.anchors[0]);
    };
    let mut x = first.center;
    for _ in 0..20_000 {
        let start = x;
        for b in &balls {
            let dx = x[0] - b.center[0];
            let dy = x[1] - b.center[1];
            let d = dx.hypot(dy);
            if d > b.radius {
                let s = b.radius / d;
                x = [b.center[0] + dx * s, b.center[1] + dy * s];
            }
        }
        if (x[0] - start[0]).hypot(x[1] - start[1]) < 1e-13 {
            break;
        }
    }
    let inside = balls
        .iter()
        .all(|b| (x[0] - b.center[0]).hypot(x[1] - b.center[1]) <= b.radius + 1e-12);
    inside.then_some(x)
}
