//! Tensor-structured preconditioned conjugate gradients for finite-difference
//! Poisson problems on 2D and 3D tensor-product grids.
//!
//! Grid functions are [`DenseTensor`]s stored first-index-fastest, so `vec`
//! is free. The minus Laplacian is a Kronecker sum of 1D stencils
//! ([`PoissonOperator`]) and is never assembled outside of tests.

pub mod cost;
pub mod error;
pub mod laplace1d;
pub mod operator;
pub mod pcg;
pub mod precond;
pub mod problems;
pub mod tensor;

pub use error::{Error, Result};
pub use laplace1d::{BoundaryCondition, Laplacian1D, SpectralDecomposition, SpectrumSource};
pub use operator::{
    apply_bc_updates, center, nullspace_component, BoundaryData, FacePair, FaceValue,
    PoissonOperator,
};
pub use pcg::{
    eta_series, kappa, pcg, true_residual, Breakdown, BreakdownKind, ConvergenceLog, EtaSeries,
    IterationRecord, SolverConfig, SolverWarning,
};
pub use precond::{PrecondConfig, Preconditioner};
pub use tensor::{DenseMatrix, DenseTensor, Shape};
