//! Exact sparse, slowly varying regression over a similarity graph.
//!
//! One ridge regression is fit per graph vertex, with a penalty on coefficient
//! differences across edges and three support budgets: per-vertex sparsity,
//! union sparsity, and total support change along edges. The support search
//! is solved exactly by an outer-approximation branch-and-cut over a convex
//! cost of the binary support, warm-started by a stepwise heuristic.

pub mod benchmark;
pub mod error;
pub mod io;
pub mod linalg;
pub mod master;
pub mod oracle;
pub mod problem;
pub mod scalar;
pub mod selftest;
pub mod stepwise;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use problem::{
    build_quadform, check_feasible, true_objective, ProblemInstance, QuadForm, SimilarityGraph, SparsityBudget,
    Support, VertexBlock,
};
pub use scalar::Real;

pub type Instance64 = ProblemInstance<f64>;
pub type Instance32 = ProblemInstance<f32>;
pub type QuadForm64 = QuadForm<f64>;
pub type QuadForm32 = QuadForm<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
