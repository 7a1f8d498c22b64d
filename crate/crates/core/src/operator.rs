//! The 2D/3D minus Laplacian as a Kronecker sum of 1D factors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace1d::{BoundaryCondition, FaceKind, Laplacian1D, SpectrumSource};
use crate::tensor::{kron_assemble, pairwise_sum, DenseMatrix, DenseTensor, Shape};

/// Largest operator (rows) [`PoissonOperator::assemble_dense`] will build.
pub const DENSE_ASSEMBLY_LIMIT: usize = 10_000;

/// `L_n x_1 U + L_q x_2 U [+ L_t x_3 U]`, never assembled in production paths.
#[derive(Clone, Debug)]
pub struct PoissonOperator {
    factors: Vec<Laplacian1D>,
    shape: Shape,
}

impl PoissonOperator {
    pub fn new(factors: Vec<Laplacian1D>) -> Result<Self> {
        let dims: Vec<usize> = factors.iter().map(Laplacian1D::n).collect();
        let shape = Shape::new(&dims)?;
        Ok(PoissonOperator { factors, shape })
    }

    /// Convenience constructor from `(extent, bc)` pairs, x direction first.
    pub fn from_bcs(spec: &[(usize, BoundaryCondition)]) -> Result<Self> {
        let factors = spec
            .iter()
            .map(|&(n, bc)| Laplacian1D::new(n, bc))
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }

    pub fn factors(&self) -> &[Laplacian1D] {
        &self.factors
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn bcs(&self) -> Vec<BoundaryCondition> {
        self.factors.iter().map(Laplacian1D::bc).collect()
    }

    /// Singular iff every factor is singular.
    pub fn is_singular(&self) -> bool {
        self.factors.iter().all(Laplacian1D::is_singular)
    }

    fn check(&self, x: &DenseTensor) -> Result<()> {
        if x.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.dims().to_vec(),
                got: x.shape().dims().to_vec(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.check(x)?;
        let mut out = DenseTensor::zeros(self.shape);
        self.apply_into(x.vec(), out.vec_mut());
        Ok(out)
    }

    /// Application together with its elementary-operation count.
    pub fn apply_counting(&self, x: &DenseTensor) -> Result<(DenseTensor, u64)> {
        self.check(x)?;
        let mut out = DenseTensor::zeros(self.shape);
        let ops = self.apply_into(x.vec(), out.vec_mut());
        Ok((out, ops))
    }

    /// `out = A x` on raw buffers, returning the elementary-operation count.
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) -> u64 {
        out.fill(0.0);
        self.factors
            .iter()
            .enumerate()
            .map(|(mode, f)| f.stencil().accumulate_mode(mode, self.shape, x, out))
            .sum()
    }

    pub fn assemble_dense(&self) -> Result<DenseMatrix> {
        let rows = self.shape.len();
        if rows > DENSE_ASSEMBLY_LIMIT {
            return Err(Error::TooLarge {
                rows,
                limit: DENSE_ASSEMBLY_LIMIT,
            });
        }
        let dense: Vec<DenseMatrix> = self.factors.iter().map(Laplacian1D::to_dense).collect();
        let ids: Vec<DenseMatrix> = self
            .factors
            .iter()
            .map(|f| DenseMatrix::identity(f.n(), f.n()))
            .collect();
        let d = self.factors.len();
        let mut total = DenseMatrix::zeros(rows, rows);
        // Kronecker factors are written slowest direction first.
        for mode in 0..d {
            let terms: Vec<&DenseMatrix> = (0..d)
                .rev()
                .map(|m| if m == mode { &dense[m] } else { &ids[m] })
                .collect();
            total += kron_assemble(&terms);
        }
        Ok(total)
    }

    /// `S(i,j[,k]) = lambda_i(L_n) + lambda_j(L_q) [+ lambda_k(L_t)]`,
    /// each factor's eigenvalues in ascending order.
    pub fn spectrum_sums(&self, source: SpectrumSource) -> Result<DenseTensor> {
        let eigs = self
            .factors
            .iter()
            .map(|f| f.spectrum(source).map(|s| s.eigenvalues))
            .collect::<Result<Vec<_>>>()?;
        Ok(sum_tensor(self.shape, &eigs))
    }
}

pub(crate) fn sum_tensor(shape: Shape, eigs: &[Vec<f64>]) -> DenseTensor {
    DenseTensor::from_fn(shape, |ix| ix.iter().zip(eigs).map(|(&i, e)| e[i]).sum())
}

/// Subtracts the global mean.
pub fn center(x: &DenseTensor) -> DenseTensor {
    let mut out = x.clone();
    center_in_place(out.vec_mut());
    out
}

/// Returns the operation count (`3N`: sum, divide-amortized, subtract).
pub(crate) fn center_in_place(x: &mut [f64]) -> u64 {
    let mean = pairwise_sum(x) / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    3 * x.len() as u64
}

/// Norm of the projection of `vec(X)` onto the constant vector.
pub fn nullspace_component(x: &DenseTensor) -> f64 {
    x.sum().abs() / (x.shape().len() as f64).sqrt()
}

/// Value prescribed on one face of a direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum FaceValue {
    /// Dirichlet data `u_B` / `u_E`.
    Potential(f64),
    /// Neumann data `e_B` / `e_E`.
    Field(f64),
}

impl FaceValue {
    pub fn value(self) -> f64 {
        match self {
            FaceValue::Potential(v) | FaceValue::Field(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FacePair {
    pub begin: Option<FaceValue>,
    pub end: Option<FaceValue>,
}

/// Per-direction face data, constant over each face.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub axes: Vec<FacePair>,
}

impl BoundaryData {
    pub fn none(ndim: usize) -> Self {
        BoundaryData {
            axes: vec![FacePair::default(); ndim],
        }
    }

    pub fn set_begin(&mut self, axis: usize, v: FaceValue) {
        self.axes[axis].begin = Some(v);
    }

    pub fn set_end(&mut self, axis: usize, v: FaceValue) {
        self.axes[axis].end = Some(v);
    }

    pub fn is_empty(&self) -> bool {
        self.axes
            .iter()
            .all(|p| p.begin.is_none() && p.end.is_none())
    }
}

fn check_face(axis: usize, kind: FaceKind, v: Option<FaceValue>) -> Result<()> {
    let ok = match (kind, v) {
        (_, None) => true,
        (FaceKind::Dirichlet, Some(FaceValue::Potential(_))) => true,
        (FaceKind::Neumann, Some(FaceValue::Field(_))) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::BoundaryMismatch {
            axis,
            reason: format!("{kind:?} face cannot carry {v:?}"),
        })
    }
}

/// Adds each prescribed face value to the boundary slice perpendicular to
/// its direction (first slice for `begin`, last for `end`).
pub fn apply_bc_updates(
    h: &DenseTensor,
    bcs: &[BoundaryCondition],
    bd: &BoundaryData,
) -> Result<DenseTensor> {
    let shape = h.shape();
    if bcs.len() != shape.ndim() || bd.axes.len() > shape.ndim() {
        return Err(Error::DimensionMismatch {
            context: "apply_bc_updates",
            detail: format!(
                "{} boundary conditions and {} face pairs for a {}-way tensor",
                bcs.len(),
                bd.axes.len(),
                shape.ndim()
            ),
        });
    }
    let mut out = h.clone();
    for (axis, pair) in bd.axes.iter().enumerate() {
        let (kb, ke) = bcs[axis].faces();
        check_face(axis, kb, pair.begin)?;
        check_face(axis, ke, pair.end)?;
        let n = shape.dim(axis);
        for (face, idx) in [(pair.begin, 0), (pair.end, n - 1)] {
            if let Some(v) = face {
                add_to_slice(&mut out, axis, idx, v.value());
            }
        }
    }
    Ok(out)
}

fn add_to_slice(t: &mut DenseTensor, axis: usize, index: usize, value: f64) {
    let shape = t.shape();
    let s = shape.stride(axis);
    let n = shape.dim(axis);
    let block = s * n;
    for chunk in t.vec_mut().chunks_exact_mut(block) {
        chunk[index * s..(index + 1) * s]
            .iter_mut()
            .for_each(|v| *v += value);
    }
}
