//! Numerical laboratory for mean value sets on discretized Riemannian
//! manifolds: build conformal chart meshes, assemble Laplace–Beltrami
//! operators, solve the membrane and lower obstacle problems against
//! Dirichlet Green's functions, and verify the mean value property,
//! nestedness, volume identity, curvature expansions, and the growth
//! estimates of the obstacle solutions.

pub mod error;
pub mod estimates;
pub mod export;
pub mod green;
pub mod manifold;
pub mod meanvalue;
pub mod obstacle;
pub mod operators;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};

/// Manifold dimension of the discrete artifact. Kept symbolic so the
/// r^{-n} load and the volume identity |D| = r^n read the same as the
/// dimension-generic statements.
pub const DIM: u32 = 2;
