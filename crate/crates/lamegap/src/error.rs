//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by geometry construction, solvers, and the sweep harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fell outside its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A named hypothesis of a lower-bound preset or classifier was violated.
    #[error("hypothesis `{condition}` violated: {detail}")]
    Hypothesis {
        condition: &'static str,
        detail: String,
    },

    /// A point was handed to a gap-local field but lies outside the gap slab.
    #[error("point ({x:.6}, {y:.6}) lies outside the gap slab")]
    OutsideGap { x: f64, y: f64 },

    /// The rigid-motion Gram matrix failed its positive-definiteness floor.
    #[error(
        "Gram matrix not positive definite: smallest eigenvalue {lambda_min:.6e} \
         is below the floor {floor:.6e}"
    )]
    GramNotSpd { lambda_min: f64, floor: f64 },

    /// The sparse linear solver did not reach the requested residual.
    #[error("linear solve failed: {0}")]
    Solve(String),

    /// Adaptive quadrature exhausted its refinement budget.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// Mesh generation produced an invalid cell or boundary facet.
    #[error("mesh generation failed: {0}")]
    Mesh(String),

    /// Config file could not be parsed or contained inconsistent fields.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
