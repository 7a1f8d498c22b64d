//! Weighted Jacobi splitting `A = omega*D + (O + (1 - omega)*D)` applied
//! direction by direction, as a preconditioner (`p` sweeps from zero) and
//! as a stand-alone stationary solver.

use crate::error::{Error, Result};
use crate::laplace1d::Stencil;
use crate::operator::{sum_tensor, PoissonOperator};
use crate::tensor::{frobenius_norm, DenseMatrix, DenseTensor};

#[derive(Clone, Debug)]
pub struct JacobiState {
    p: usize,
    omega: f64,
    off: Vec<Stencil>,
    dhat_inv: DenseTensor,
}

impl JacobiState {
    pub fn new(op: &PoissonOperator, p: usize, omega: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::param("p", "at least one sweep required"));
        }
        if !(omega >= 1.0) || !omega.is_finite() {
            return Err(Error::param(
                "omega",
                format!("must lie in [1, inf), got {omega}"),
            ));
        }
        let diags: Vec<Vec<f64>> = op.factors().iter().map(|f| f.diagonal()).collect();
        let off = op
            .factors()
            .iter()
            .zip(&diags)
            .map(|(f, d)| {
                let od = d.iter().map(|&v| v * (1.0 - omega)).collect();
                Stencil::new(od, f.corners().2)
            })
            .collect();
        let mut dhat = sum_tensor(op.shape(), &diags);
        dhat.scale(omega);
        let dhat_inv =
            DenseTensor::unvec(dhat.vec().iter().map(|v| 1.0 / v).collect(), op.shape())?;
        Ok(JacobiState {
            p,
            omega,
            off,
            dhat_inv,
        })
    }

    pub fn sweeps(&self) -> usize {
        self.p
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `O_omega(L_l)` for each direction, as dense matrices.
    pub fn off_matrices(&self) -> Vec<DenseMatrix> {
        self.off.iter().map(Stencil::to_dense).collect()
    }

    /// Entrywise inverse of `D_hat_omega`.
    pub fn dhat_inv(&self) -> &DenseTensor {
        &self.dhat_inv
    }

    pub(crate) fn init_ops(&self) -> u64 {
        // diagonal sums, scaling, reciprocal
        3 * self.dhat_inv.shape().len() as u64
    }

    /// One stationary step `x <- D^-1 (b - O x)`; `x` holds the previous iterate.
    fn sweep(&self, b: &[f64], x: &mut Vec<f64>, scratch: &mut [f64]) -> u64 {
        let shape = self.dhat_inv.shape();
        scratch.fill(0.0);
        let mut ops: u64 = self
            .off
            .iter()
            .enumerate()
            .map(|(mode, s)| s.accumulate_mode(mode, shape, x, scratch))
            .sum();
        for ((xi, &bi), (&oi, &di)) in x
            .iter_mut()
            .zip(b)
            .zip(scratch.iter().zip(self.dhat_inv.vec()))
        {
            *xi = di * (bi - oi);
        }
        ops += 2 * b.len() as u64;
        ops
    }

    pub fn apply(&self, op: &PoissonOperator, r: &DenseTensor) -> Result<DenseTensor> {
        let mut ops = 0;
        self.apply_counted(op, r, &mut ops)
    }

    pub(crate) fn apply_counted(
        &self,
        _op: &PoissonOperator,
        r: &DenseTensor,
        ops: &mut u64,
    ) -> Result<DenseTensor> {
        if r.shape() != self.dhat_inv.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.dhat_inv.shape().dims().to_vec(),
                got: r.shape().dims().to_vec(),
            });
        }
        // X_0 = 0, so the first sweep reduces to a diagonal scaling.
        let mut x: Vec<f64> = r
            .vec()
            .iter()
            .zip(self.dhat_inv.vec())
            .map(|(a, d)| a * d)
            .collect();
        *ops += r.vec().len() as u64;
        let mut scratch = vec![0.0; x.len()];
        for _ in 1..self.p {
            *ops += self.sweep(r.vec(), &mut x, &mut scratch);
        }
        DenseTensor::unvec(x, r.shape())
    }
}

/// Settings for the stand-alone stationary iteration.
#[derive(Clone, Debug)]
pub struct StationaryConfig {
    pub omega: f64,
    pub max_iter: usize,
    /// Stop once the true residual norm falls to this absolute level.
    pub stop_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct JacobiRun {
    pub x: DenseTensor,
    /// True residual norms; entry 0 belongs to the initial guess.
    pub residuals: Vec<f64>,
    /// Cumulative operation counts aligned with `residuals`.
    pub ops: Vec<u64>,
    pub diverged: bool,
}

impl JacobiRun {
    /// First iteration whose residual is at most `level`.
    pub fn iterations_to(&self, level: f64) -> Option<usize> {
        self.residuals.iter().position(|&r| r <= level)
    }
}

const DIVERGENCE_FACTOR: f64 = 1e12;

/// Runs `x_j = D_omega^-1 (h - O_omega x_{j-1})` as a solver, recording the
/// true residual after every step.
pub fn jacobi_standalone(
    op: &PoissonOperator,
    h: &DenseTensor,
    cfg: &StationaryConfig,
    x0: Option<&DenseTensor>,
) -> Result<JacobiRun> {
    let st = JacobiState::new(op, 1, cfg.omega)?;
    let shape = op.shape();
    if h.shape() != shape {
        return Err(Error::ShapeMismatch {
            expected: shape.dims().to_vec(),
            got: h.shape().dims().to_vec(),
        });
    }
    let mut x = match x0 {
        Some(x0) if x0.shape() != shape => {
            return Err(Error::ShapeMismatch {
                expected: shape.dims().to_vec(),
                got: x0.shape().dims().to_vec(),
            })
        }
        Some(x0) => x0.vec().to_vec(),
        None => vec![0.0; shape.len()],
    };
    let mut scratch = vec![0.0; x.len()];
    let mut ax = vec![0.0; x.len()];
    let residual = |x: &[f64], ax: &mut [f64]| {
        op.apply_into(x, ax);
        ax.iter()
            .zip(h.vec())
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    };
    let r0 = residual(&x, &mut ax);
    let mut residuals = vec![r0];
    let mut ops = vec![0u64];
    let mut total = 0u64;
    let mut diverged = false;
    for _ in 0..cfg.max_iter {
        if cfg
            .stop_residual
            .is_some_and(|t| residuals.last().copied().unwrap_or(0.0) <= t)
        {
            break;
        }
        total += st.sweep(h.vec(), &mut x, &mut scratch);
        let r = residual(&x, &mut ax);
        residuals.push(r);
        ops.push(total);
        if !r.is_finite() || r > DIVERGENCE_FACTOR * r0.max(frobenius_norm(h)) {
            diverged = true;
            break;
        }
    }
    Ok(JacobiRun {
        x: DenseTensor::unvec(x, shape)?,
        residuals,
        ops,
        diverged,
    })
}
