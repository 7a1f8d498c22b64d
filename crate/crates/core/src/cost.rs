//! Closed-form elementary-operation counts (one multiply or add = one op).
//!
//! Saxpy-type updates and inner products cost `2N` each, `N` being the
//! number of grid cells. A sparse Laplacian application costs `2 * nnz`
//! per fiber and direction, which is `6N` per direction for a
//! three-nonzeros-per-row stencil. The full variant treats every `L_l`
//! as dense, `2 N n_l` per direction.

use serde::{Deserialize, Serialize};

use crate::tensor::Shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Iter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    Sparse,
}

fn cells(shape: Shape) -> u64 {
    shape.len() as u64
}

fn dim_sum(shape: Shape) -> u64 {
    shape.dims().iter().map(|&d| d as u64).sum()
}

/// One application of the minus Laplacian.
pub fn apply_cost(shape: Shape, variant: Variant) -> u64 {
    match variant {
        Variant::Sparse => 6 * shape.ndim() as u64 * cells(shape),
        Variant::Full => 2 * cells(shape) * dim_sum(shape),
    }
}

/// PCG cost without preconditioning: initialization is one application,
/// one saxpy and one inner product; an iteration is one application,
/// three saxpys and two inner products.
pub fn cost_model(shape: Shape, phase: Phase, variant: Variant) -> u64 {
    let n = cells(shape);
    let vector_ops = match phase {
        Phase::Init => 4 * n,
        Phase::Iter => 10 * n,
    };
    apply_cost(shape, variant) + vector_ops
}

/// `4 N (sum of dims + 1/4)`: two changes of basis and a Hadamard product.
pub fn pinv_apply_cost(shape: Shape) -> u64 {
    4 * cells(shape) * dim_sum(shape) + cells(shape)
}

/// Initialization of the pseudoinverse without the eigendecompositions.
pub fn pinv_init_cost(shape: Shape) -> u64 {
    shape.ndim() as u64 * cells(shape)
}

/// One centering of a grid function.
pub fn centering_cost(shape: Shape) -> u64 {
    3 * cells(shape)
}
