//! Numerical study of gradient concentration in a narrow elastic gap.
//!
//! An infinitely rigid inclusion sits a distance `eps` above the boundary
//! of a plane elastic matrix; the gap between the two boundaries closes
//! like `d(x')^m` near a contact set `Sigma'`. As `eps` shrinks, the
//! gradient of the elastic field blows up inside the gap, at a rate and
//! location controlled by the gap exponent `m`, the ambient dimension, and
//! the parity and growth order of the Dirichlet datum on the outer
//! boundary.
//!
//! The crate has two independent halves that are played against each other:
//!
//! * the *analytic side* ([`rates`], [`quadrature`]): closed-form rate
//!   algebra, blow-up envelopes, locus decision tables, and adaptive
//!   quadrature of the singular gap integrals that drive them;
//! * the *numeric side* ([`mesh`], [`fem`], [`decomp`]): a graded
//!   finite element discretization of the gap domain, a rigid-inclusion
//!   decomposition solver, and gradient probes along the predicted
//!   blow-up fibers.
//!
//! The [`sweep`] harness runs the numeric side over a decreasing sequence
//! of gap widths and fits the observed rates against the analytic
//! predictions; `acceptance` wires the whole catalog of checks together.

pub mod acceptance;
pub mod auxfield;
pub mod config;
pub mod decomp;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod rates;
pub mod skyline;
pub mod sweep;
pub mod tol;

pub use error::{Error, Result};
