//! Computational engine for hyperbolic spin Calogero-Moser systems and spin
//! Toda lattices attached to subsets of simple roots.
//!
//! Modules, bottom up:
//! - [`liealg`]: root data, Chevalley basis, invariant form, bracket;
//! - [`dynr`]: the dynamical r-matrix family and its Yang-Baxter residuals;
//! - [`poisson`]: Lie-Poisson brackets and Hamiltonian vector fields at points;
//! - [`models`]: Hamiltonians, equations of motion, Lax operators, reductions;
//! - [`factor`]: matrix exponential, Gauss factorizations and exact solvers;
//! - [`numint`]: RK4 reference integrator and invariant monitors.

pub mod dynr;
pub mod error;
pub mod factor;
pub mod liealg;
pub mod models;
pub mod numint;
pub mod poisson;
pub mod sample;

pub use error::{Error, Result};
