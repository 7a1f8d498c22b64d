//! Dense two- and three-way tensors stored first-index-fastest.
//!
//! Element `(i, j, k)` of an `n x q x t` tensor lives at linear index
//! `i + n*j + n*q*k`, so the flat buffer *is* the vectorization of the
//! tensor (columns stacked one beneath the other, then frontal slices).
//! Every kernel in the crate relies on that layout: a mode product is a
//! plain GEMM on a reinterpreted view of the buffer.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Small per-direction matrices (eigenbases, splittings, test oracles).
/// Column-major, as nalgebra stores it.
pub type DenseMatrix = DMatrix<f64>;

/// Extents of a 2D or 3D grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: [usize; 3],
    ndim: usize,
}

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.len() != 2 && dims.len() != 3 {
            return Err(Error::InvalidShape(format!(
                "expected 2 or 3 dimensions, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "all extents must be positive, got {dims:?}"
            )));
        }
        let mut full = [1; 3];
        full[..dims.len()].copy_from_slice(dims);
        Ok(Shape {
            dims: full,
            ndim: dims.len(),
        })
    }

    /// Panics on a zero extent; use [`Shape::new`] for unchecked input.
    pub fn d2(n: usize, q: usize) -> Self {
        Shape::new(&[n, q]).expect("positive extents")
    }

    pub fn d3(n: usize, q: usize, t: usize) -> Self {
        Shape::new(&[n, q, t]).expect("positive extents")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.ndim]
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims()[mode]
    }

    /// Number of cells (product of extents).
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear offset between consecutive entries of a `mode` fiber.
    pub fn stride(&self, mode: usize) -> usize {
        self.dims[..mode].iter().product()
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.ndim);
        let mut lin = 0;
        let mut stride = 1;
        for (d, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.dims[d]);
            lin += i * stride;
            stride *= self.dims[d];
        }
        lin
    }

    fn with_dim(&self, mode: usize, extent: usize) -> Shape {
        let mut s = *self;
        s.dims[mode] = extent;
        s
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Shape::new(&v)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.dims().to_vec()
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims().iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        DenseTensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Builds a tensor by evaluating `f` at every multi-index (`[i, j]` or `[i, j, k]`).
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let dims = shape.dims();
        let mut data = Vec::with_capacity(shape.len());
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..shape.len() {
            data.push(f(&idx));
            for (d, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < dims[d] {
                    break;
                }
                *i = 0;
            }
        }
        DenseTensor { shape, data }
    }

    /// Inverse of [`DenseTensor::vec`].
    pub fn unvec(data: Vec<f64>, shape: Shape) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                got: data.len(),
            });
        }
        Ok(DenseTensor { shape, data })
    }

    /// The vectorization; a view of the storage, no copy.
    pub fn vec(&self) -> &[f64] {
        &self.data
    }

    pub fn vec_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.shape.index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let i = self.shape.index(idx);
        self.data[i] = value;
    }

    pub fn sum(&self) -> f64 {
        pairwise_sum(&self.data)
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|x| *x *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &DenseTensor) -> Result<()> {
        check_same_shape(self, x)?;
        self.data
            .iter_mut()
            .zip(&x.data)
            .for_each(|(y, &x)| *y += a * x);
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }
}

fn check_same_shape(a: &DenseTensor, b: &DenseTensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch {
            expected: a.shape.dims().to_vec(),
            got: b.shape.dims().to_vec(),
        });
    }
    Ok(())
}

pub fn vec(t: &DenseTensor) -> Vec<f64> {
    t.data.clone()
}

pub fn unvec(v: &[f64], shape: Shape) -> Result<DenseTensor> {
    DenseTensor::unvec(v.to_vec(), shape)
}

const PAIRWISE_BLOCK: usize = 128;

/// Pairwise summation; error grows with `log n` rather than `n`.
pub(crate) fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= PAIRWISE_BLOCK {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

pub(crate) fn pairwise_dot(x: &[f64], y: &[f64]) -> f64 {
    if x.len() <= PAIRWISE_BLOCK {
        return x.iter().zip(y).map(|(a, b)| a * b).sum();
    }
    let mid = x.len() / 2;
    pairwise_dot(&x[..mid], &y[..mid]) + pairwise_dot(&x[mid..], &y[mid..])
}

/// `<X, Y> = <vec(X), vec(Y)>`.
pub fn inner(x: &DenseTensor, y: &DenseTensor) -> Result<f64> {
    check_same_shape(x, y)?;
    Ok(pairwise_dot(&x.data, &y.data))
}

pub fn frobenius_norm(x: &DenseTensor) -> f64 {
    pairwise_dot(&x.data, &x.data).sqrt()
}

pub fn hadamard(x: &DenseTensor, y: &DenseTensor) -> Result<DenseTensor> {
    check_same_shape(x, y)?;
    let data = x.data.iter().zip(&y.data).map(|(a, b)| a * b).collect();
    Ok(DenseTensor {
        shape: x.shape,
        data,
    })
}

/// Entrywise reciprocal; entries with `|x| <= tol` map to zero.
pub fn hadamard_pinv(x: &DenseTensor, tol: f64) -> DenseTensor {
    let data = x
        .data
        .iter()
        .map(|&v| if v.abs() > tol { 1.0 / v } else { 0.0 })
        .collect();
    DenseTensor {
        shape: x.shape,
        data,
    }
}

/// `Y + a X`.
pub fn saxpy(a: f64, x: &DenseTensor, y: &DenseTensor) -> Result<DenseTensor> {
    let mut out = y.clone();
    out.axpy(a, x)?;
    Ok(out)
}

/// `M x_mode T`: multiplies `m` against every `mode` fiber of `t` (modes count from 0).
pub fn mode_product(m: &DenseMatrix, mode: usize, t: &DenseTensor) -> Result<DenseTensor> {
    let shape = t.shape;
    if mode >= shape.ndim() {
        return Err(Error::DimensionMismatch {
            context: "mode_product",
            detail: format!("mode {mode} out of range for {}-way tensor", shape.ndim()),
        });
    }
    if m.ncols() != shape.dim(mode) {
        return Err(Error::DimensionMismatch {
            context: "mode_product",
            detail: format!(
                "matrix has {} columns, mode {mode} has extent {}",
                m.ncols(),
                shape.dim(mode)
            ),
        });
    }
    let out_shape = shape.with_dim(mode, m.nrows());
    let mut out = DenseTensor::zeros(out_shape);
    mode_product_into(m, mode, shape, &t.data, &mut out.data, 0.0);
    Ok(out)
}

/// `out = M x_mode x + beta * out`, with `x` laid out by `shape` and `out`
/// by `shape` with extent `mode` replaced by `m.nrows()`. No checks.
pub(crate) fn mode_product_into(
    m: &DenseMatrix,
    mode: usize,
    shape: Shape,
    x: &[f64],
    out: &mut [f64],
    beta: f64,
) {
    let [d0, d1, d2] = shape.dims;
    let rows = m.nrows();
    match mode {
        0 => {
            let xv = DMatrixView::from_slice(x, d0, d1 * d2);
            let mut ov = DMatrixViewMut::from_slice(out, rows, d1 * d2);
            ov.gemm(1.0, m, &xv, beta);
        }
        1 => {
            let mt = m.transpose();
            let in_slab = d0 * d1;
            let out_slab = d0 * rows;
            for k in 0..d2 {
                let xv = DMatrixView::from_slice(&x[k * in_slab..(k + 1) * in_slab], d0, d1);
                let mut ov = DMatrixViewMut::from_slice(
                    &mut out[k * out_slab..(k + 1) * out_slab],
                    d0,
                    rows,
                );
                ov.gemm(1.0, &xv, &mt, beta);
            }
        }
        2 => {
            let mt = m.transpose();
            let xv = DMatrixView::from_slice(x, d0 * d1, d2);
            let mut ov = DMatrixViewMut::from_slice(out, d0 * d1, rows);
            ov.gemm(1.0, &xv, &mt, beta);
        }
        _ => unreachable!("mode checked by caller"),
    }
}

/// `(A, B[, C] | T)`: one matrix per mode applied to all fibers of that mode.
pub fn linear_transform(mats: &[&DenseMatrix], t: &DenseTensor) -> Result<DenseTensor> {
    if mats.len() != t.shape.ndim() {
        return Err(Error::DimensionMismatch {
            context: "linear_transform",
            detail: format!(
                "{} matrices given for a {}-way tensor",
                mats.len(),
                t.shape.ndim()
            ),
        });
    }
    let mut cur = mode_product(mats[0], 0, t)?;
    for (mode, m) in mats.iter().enumerate().skip(1) {
        cur = mode_product(m, mode, &cur)?;
    }
    Ok(cur)
}

/// Dense Kronecker product of the factors in the order written:
/// `kron_assemble(&[B, A]) = B ⊗ A`. Test oracle only.
pub fn kron_assemble(factors: &[&DenseMatrix]) -> DenseMatrix {
    let mut iter = factors.iter();
    let first = match iter.next() {
        Some(f) => (*f).clone(),
        None => return DenseMatrix::identity(1, 1),
    };
    iter.fold(first, |acc, a| kron2(&acc, a))
}

fn kron2(b: &DenseMatrix, a: &DenseMatrix) -> DenseMatrix {
    let (m, n) = a.shape();
    let (p, q) = b.shape();
    let mut out = DenseMatrix::zeros(m * p, n * q);
    for bj in 0..q {
        for bi in 0..p {
            let s = b[(bi, bj)];
            if s == 0.0 {
                continue;
            }
            for aj in 0..n {
                for ai in 0..m {
                    out[(bi * m + ai, bj * n + aj)] = s * a[(ai, aj)];
                }
            }
        }
    }
    out
}
