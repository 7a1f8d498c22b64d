//! Low-Kronecker-rank approximation of the pseudoinverse (2D only).
//!
//! The reciprocal eigenvalue-sum matrix `G` (n x q) is truncated to its
//! best rank-`r` approximation `sum_k sigma_k x_k y_k^T`. Each dyad becomes a
//! Kronecker product of two symmetric matrices
//! `M_q,k (x) M_n,k` with `M_n,k = V_n diag(sigma_k x_k) V_n^T` and
//! `M_q,k = V_q diag(y_k) V_q^T`, so the application is a sum of `r`
//! two-sided products `M_n,k R M_q,k^T`.

use nalgebra::SVD;

use super::{IndefiniteWarning, PinvState};
use crate::error::{Error, Result};
use crate::laplace1d::SpectrumSource;
use crate::operator::PoissonOperator;
use crate::tensor::{mode_product_into, pairwise_sum, DenseMatrix, DenseTensor, Shape};

#[derive(Clone, Debug)]
pub struct LowRankState {
    rank: usize,
    shape: Shape,
    m_n: Vec<DenseMatrix>,
    m_q: Vec<DenseMatrix>,
    singular_values: Vec<f64>,
    left: DenseMatrix,
    right: DenseMatrix,
}

impl LowRankState {
    pub fn new(op: &PoissonOperator, rank: usize, source: SpectrumSource) -> Result<Self> {
        let shape = op.shape();
        if shape.ndim() != 2 {
            return Err(Error::Unsupported(
                "low-rank preconditioner is 2D-only".to_string(),
            ));
        }
        let (n, q) = (shape.dim(0), shape.dim(1));
        if rank == 0 || rank > n.min(q) {
            return Err(Error::param(
                "rank",
                format!("must lie in 1..={}, got {rank}", n.min(q)),
            ));
        }
        let pinv = PinvState::new(op, source)?;
        let g = DenseMatrix::from_column_slice(n, q, pinv.ghat().vec());
        let svd = SVD::try_new(g, true, true, 1e-15, 10_000).ok_or(Error::EigenSolver(n.max(q)))?;
        let u = svd.u.expect("left vectors requested");
        let v_t = svd.v_t.expect("right vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
        let left = DenseMatrix::from_fn(n, order.len(), |i, c| u[(i, order[c])]);
        let right = DenseMatrix::from_fn(q, order.len(), |j, c| v_t[(order[c], j)]);

        let (vn, vq) = (&pinv.vectors()[0], &pinv.vectors()[1]);
        let mut m_n = Vec::with_capacity(rank);
        let mut m_q = Vec::with_capacity(rank);
        for k in 0..rank {
            let mut scaled_n = vn.clone();
            for (c, mut col) in scaled_n.column_iter_mut().enumerate() {
                col *= singular_values[k] * left[(c, k)];
            }
            m_n.push(scaled_n * vn.transpose());
            let mut scaled_q = vq.clone();
            for (c, mut col) in scaled_q.column_iter_mut().enumerate() {
                col *= right[(c, k)];
            }
            m_q.push(scaled_q * vq.transpose());
        }
        Ok(LowRankState {
            rank,
            shape,
            m_n,
            m_q,
            singular_values,
            left,
            right,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// All singular values of `G`, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Factor pairs `(M_n,k, M_q,k)`.
    pub fn factors(&self) -> impl Iterator<Item = (&DenseMatrix, &DenseMatrix)> {
        self.m_n.iter().zip(&self.m_q)
    }

    /// `|| G - G_r ||_F` from the discarded singular values.
    pub fn truncation_error(&self) -> f64 {
        self.singular_values[self.rank..]
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt()
    }

    /// The retained rank-`r` approximation of `G` as an `n x q` matrix.
    pub fn approximation(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.left.nrows(), self.right.nrows());
        for k in 0..self.rank {
            g += self.left.column(k) * self.right.column(k).transpose() * self.singular_values[k];
        }
        g
    }

    pub(crate) fn init_ops(&self) -> u64 {
        let (n, q) = (self.shape.dim(0) as u64, self.shape.dim(1) as u64);
        // reciprocal sums, then two n^3 / q^3 products per retained term
        2 * n * q + self.rank as u64 * 2 * (n * n * n + q * q * q)
    }

    pub fn apply(&self, r: &DenseTensor) -> Result<(DenseTensor, Option<IndefiniteWarning>)> {
        let mut ops = 0;
        self.apply_counted(r, &mut ops)
    }

    pub(crate) fn apply_counted(
        &self,
        r: &DenseTensor,
        ops: &mut u64,
    ) -> Result<(DenseTensor, Option<IndefiniteWarning>)> {
        if r.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.dims().to_vec(),
                got: r.shape().dims().to_vec(),
            });
        }
        let len = self.shape.len();
        let (n, q) = (self.shape.dim(0), self.shape.dim(1));
        let mut z = vec![0.0; len];
        let mut tmp = vec![0.0; len];
        for (mn, mq) in self.m_n.iter().zip(&self.m_q) {
            mode_product_into(mn, 0, self.shape, r.vec(), &mut tmp, 0.0);
            mode_product_into(mq, 1, self.shape, &tmp, &mut z, 1.0);
            *ops += (2 * len * (n + q) + len) as u64;
        }
        let dot = pairwise_sum(
            &z.iter()
                .zip(r.vec())
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        );
        *ops += 2 * len as u64;
        let warning = (dot <= 0.0).then_some(IndefiniteWarning { inner: dot });
        Ok((DenseTensor::unvec(z, self.shape)?, warning))
    }
}
