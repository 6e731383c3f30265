//! Matrix-free P1 finite elements for `-Δu + νu = f` on the unit square.
//!
//! Local element matrices are computed once for all elements and stored in
//! batched form. Residuals `r = b - Ax` are evaluated element by element
//! with gather/scatter index arrays, so the global matrix is never formed on
//! the solver path. Richardson, cyclic two-level Chebyshev and three-level
//! Chebyshev iterations are built on top of that residual.
//!
//! The [`reference`] module holds a sparse-assembly oracle used by the test
//! suites and by the `direct` mode of the benchmark binary.

pub mod elements;
pub mod error;
pub mod experiment;
pub mod mesh;
pub mod operator;
pub mod reference;
pub mod solvers;
pub mod spectrum;

pub use elements::ElementBatch;
pub use error::{Error, Result};
pub use mesh::{IndexArrays, Mesh};
pub use operator::{DirichletData, LinearOperator, MatrixFreeOperator, ScatterMode};
pub use solvers::{ChebyshevCycle, ConvergenceHistory, Method, RootOrder, SolveOptions, Solution, SpectralBounds};

/// Number of basis functions per P1 triangle.
pub const NB: usize = 3;

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Euclidean distance between two vectors of equal length.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
