//! Distributed constrained convex optimization over unbalanced digraphs.
//!
//! Nodes of a directed network cooperatively minimize `sum_i f_i(x)` subject
//! to private local constraints. The problem is rewritten in epigraph form so
//! every node shares the same linear cost, which removes the Perron-vector
//! bias plain distributed subgradient descent suffers on row-stochastic
//! (unbalanced) weights. Each round mixes neighbor states, takes a Polyak step
//! toward one randomly chosen local constraint, then a fixed Polyak step on
//! the node's epigraph constraint.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the experiment harness uses.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod convex;
pub mod engine;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod problem;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ConvexFn64 = convex::ConvexFn<f64>;
pub type SimpleSet64 = convex::SimpleSet<f64>;
pub type WeightMatrix64 = graph::WeightMatrix<f64>;
pub type PerronVector64 = graph::PerronVector<f64>;
pub type GraphSchedule64 = graph::GraphSchedule<f64>;
pub type Problem64 = problem::Problem<f64>;
pub type EpigraphProblem64 = problem::EpigraphProblem<f64>;
pub type RunTrace64 = engine::RunTrace<f64>;
pub type RunOptions64 = engine::RunOptions<f64>;
pub type StepSchedule64 = engine::StepSchedule<f64>;

pub type ConvexFn32 = convex::ConvexFn<f32>;
pub type Problem32 = problem::Problem<f32>;
pub type EpigraphProblem32 = problem::EpigraphProblem<f32>;
pub type RunTrace32 = engine::RunTrace<f32>;
