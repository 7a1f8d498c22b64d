//! Moore-Penrose pseudoinverse of the Kronecker-sum Laplacian, applied as
//! a change into the tensor eigenbasis, an entrywise scaling by the
//! thresholded reciprocal eigenvalue sums, and a change back.

use crate::error::{Error, Result};
use crate::laplace1d::SpectrumSource;
use crate::operator::{sum_tensor, PoissonOperator};
use crate::tensor::{hadamard_pinv, mode_product_into, DenseMatrix, DenseTensor, Shape};

/// Eigenvalue sums at or below this modulus are treated as zero.
pub const PINV_THRESHOLD: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct PinvState {
    vectors: Vec<DenseMatrix>,
    vectors_t: Vec<DenseMatrix>,
    eigenvalues: Vec<Vec<f64>>,
    ghat: DenseTensor,
}

impl PinvState {
    pub fn new(op: &PoissonOperator, source: SpectrumSource) -> Result<Self> {
        Self::with_threshold(op, source, PINV_THRESHOLD)
    }

    pub fn with_threshold(op: &PoissonOperator, source: SpectrumSource, tol: f64) -> Result<Self> {
        if !(tol >= 0.0) {
            return Err(Error::param("tol", "threshold must be nonnegative"));
        }
        let spectra = op
            .factors()
            .iter()
            .map(|f| f.spectrum(source))
            .collect::<Result<Vec<_>>>()?;
        let eigenvalues: Vec<Vec<f64>> = spectra.iter().map(|s| s.eigenvalues.clone()).collect();
        let sums = sum_tensor(op.shape(), &eigenvalues);
        let ghat = hadamard_pinv(&sums, tol);
        let vectors: Vec<DenseMatrix> = spectra.into_iter().map(|s| s.vectors).collect();
        let vectors_t = vectors.iter().map(|v| v.transpose()).collect();
        Ok(PinvState {
            vectors,
            vectors_t,
            eigenvalues,
            ghat,
        })
    }

    pub fn vectors(&self) -> &[DenseMatrix] {
        &self.vectors
    }

    pub fn eigenvalues(&self) -> &[Vec<f64>] {
        &self.eigenvalues
    }

    /// Thresholded entrywise reciprocal of the eigenvalue-sum tensor.
    pub fn ghat(&self) -> &DenseTensor {
        &self.ghat
    }

    pub fn shape(&self) -> Shape {
        self.ghat.shape()
    }

    pub(crate) fn init_ops(&self) -> u64 {
        // one add per extra direction plus the reciprocal, per entry
        (self.vectors.len() * self.ghat.shape().len()) as u64
    }

    pub fn apply(&self, r: &DenseTensor) -> Result<DenseTensor> {
        let mut ops = 0;
        self.apply_counted(r, &mut ops)
    }

    /// Application together with its elementary-operation count.
    pub fn apply_counting(&self, r: &DenseTensor) -> Result<(DenseTensor, u64)> {
        let mut ops = 0;
        let z = self.apply_counted(r, &mut ops)?;
        Ok((z, ops))
    }

    pub(crate) fn apply_counted(&self, r: &DenseTensor, ops: &mut u64) -> Result<DenseTensor> {
        let shape = self.shape();
        if r.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.dims().to_vec(),
                got: r.shape().dims().to_vec(),
            });
        }
        let n = shape.len();
        let mut a = r.vec().to_vec();
        let mut b = vec![0.0; n];
        for (mode, vt) in self.vectors_t.iter().enumerate() {
            mode_product_into(vt, mode, shape, &a, &mut b, 0.0);
            std::mem::swap(&mut a, &mut b);
            *ops += 2 * (shape.dim(mode) * n) as u64;
        }
        a.iter_mut().zip(self.ghat.vec()).for_each(|(x, g)| *x *= g);
        *ops += n as u64;
        for (mode, v) in self.vectors.iter().enumerate() {
            mode_product_into(v, mode, shape, &a, &mut b, 0.0);
            std::mem::swap(&mut a, &mut b);
            *ops += 2 * (shape.dim(mode) * n) as u64;
        }
        DenseTensor::unvec(a, shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace1d::BoundaryCondition::*;
    use crate::operator::center;
    use crate::tensor::{frobenius_norm, inner};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: Shape) -> DenseTensor {
        DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    fn diff_norm(a: &DenseTensor, b: &DenseTensor) -> f64 {
        let mut d = a.clone();
        d.axpy(-1.0, b).unwrap();
        frobenius_norm(&d)
    }

    #[test]
    fn ghat_examples() {
        let pp = PoissonOperator::from_bcs(&[(4, Periodic), (6, Periodic)]).unwrap();
        let st = PinvState::new(&pp, SpectrumSource::Numeric).unwrap();
        assert_eq!(st.ghat().get(&[0, 0]), 0.0);
        assert_eq!(st.ghat().vec().iter().filter(|&&g| g == 0.0).count(), 1);

        let dd = PoissonOperator::from_bcs(&[(3, Dirichlet), (3, Dirichlet)]).unwrap();
        let st = PinvState::new(&dd, SpectrumSource::Numeric).unwrap();
        let expect = 1.0 / (2.0 * (2.0 - 2f64.sqrt()));
        assert!((st.ghat().get(&[0, 0]) - expect).abs() < 1e-12);
        let gmax = st.ghat().vec().iter().copied().fold(0.0, f64::max);
        assert!(st.ghat().vec().iter().all(|&g| g >= 0.0 && g <= gmax));
        assert_eq!(gmax, st.ghat().get(&[0, 0]));
    }

    #[test]
    fn inverts_nonsingular_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let op = PoissonOperator::from_bcs(&[(7, DirichletNeumann), (5, Periodic)]).unwrap();
        let st = PinvState::new(&op, SpectrumSource::Numeric).unwrap();
        let r = random(&mut rng, op.shape());
        let back = op.apply(&st.apply(&r).unwrap()).unwrap();
        assert!(diff_norm(&back, &r) <= 1e-10 * frobenius_norm(&r));
    }

    #[test]
    fn range_inverse_on_singular_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let op = PoissonOperator::from_bcs(&[(6, Periodic), (8, Periodic)]).unwrap();
        let st = PinvState::new(&op, SpectrumSource::Numeric).unwrap();
        let r = center(&random(&mut rng, op.shape()));
        let back = op.apply(&st.apply(&r).unwrap()).unwrap();
        assert!(diff_norm(&back, &r) <= 1e-10 * frobenius_norm(&r));

        let x = center(&random(&mut rng, op.shape()));
        let px = st.apply(&op.apply(&x).unwrap()).unwrap();
        assert!(diff_norm(&px, &x) <= 1e-10 * frobenius_norm(&x));
    }

    #[test]
    fn matches_dense_pseudoinverse_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let op = PoissonOperator::from_bcs(&[(4, Neumann), (3, Periodic), (5, Neumann)]).unwrap();
        let st = PinvState::new(&op, SpectrumSource::Numeric).unwrap();
        let a = op.assemble_dense().unwrap();
        let pinv = a.pseudo_inverse(1e-10).unwrap();
        let r = random(&mut rng, op.shape());
        let z = st.apply(&r).unwrap();
        let oracle = pinv * DVector::from_column_slice(r.vec());
        let err = (DVector::from_column_slice(z.vec()) - &oracle).norm();
        assert!(err <= 1e-9 * oracle.norm().max(1.0));
    }

    #[test]
    fn symmetric_semidefinite_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let op = PoissonOperator::from_bcs(&[(5, Neumann), (6, Periodic)]).unwrap();
        let st = PinvState::new(&op, SpectrumSource::Analytic).unwrap();
        let r1 = random(&mut rng, op.shape());
        let r2 = random(&mut rng, op.shape());
        let z1 = st.apply(&r1).unwrap();
        let z2 = st.apply(&r2).unwrap();
        assert!(inner(&z1, &r1).unwrap() >= -1e-12 * inner(&r1, &r1).unwrap());
        let a = inner(&z1, &r2).unwrap();
        let b = inner(&r1, &z2).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let mut comb = r1.scaled(2.0);
        comb.axpy(-3.0, &r2).unwrap();
        let mut expect = z1.scaled(2.0);
        expect.axpy(-3.0, &z2).unwrap();
        let got = st.apply(&comb).unwrap();
        assert!(diff_norm(&got, &expect) <= 1e-12 * frobenius_norm(&expect));
    }

    #[test]
    fn apply_cost_matches_formula() {
        let op = PoissonOperator::from_bcs(&[(5, Periodic), (10, Periodic)]).unwrap();
        let st = PinvState::new(&op, SpectrumSource::Numeric).unwrap();
        let mut ops = 0;
        st.apply_counted(&DenseTensor::zeros(op.shape()), &mut ops)
            .unwrap();
        // 4 nq (n + q + 1/4)
        assert_eq!(ops, 4 * 50 * 15 + 50);
    }
}
