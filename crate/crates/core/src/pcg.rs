//! Preconditioned conjugate gradients on tensors, with per-iteration
//! diagnostics and an elementary-operation ledger.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{center_in_place, nullspace_component, PoissonOperator};
use crate::precond::Preconditioner;
use crate::tensor::{frobenius_norm, inner, pairwise_dot, pairwise_sum, DenseTensor};

/// Right-hand sides with a larger relative null-space component are refused.
pub const CENTERING_TOLERANCE: f64 = 1e-10;

/// Machine epsilon `2^-52`, the additive shift of the scaled error proxy.
pub const ETA_SHIFT: f64 = f64::EPSILON;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// `None` centers exactly when the operator is singular.
    pub center_each_iter: Option<bool>,
    /// Stop once `||H - A U|| <= stop_tol * ||H||`.
    pub stop_tol: Option<f64>,
    pub record_true_residual: bool,
}

impl SolverConfig {
    pub fn new(max_iter: usize) -> Self {
        SolverConfig {
            max_iter,
            center_each_iter: None,
            stop_tol: None,
            record_true_residual: true,
        }
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = Some(tol);
        self
    }

    pub fn with_centering(mut self, on: bool) -> Self {
        self.center_each_iter = Some(on);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if let Some(t) = self.stop_tol {
            if !(t > 0.0) {
                return Err(Error::param(
                    "stop_tol",
                    format!("must be positive, got {t}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub s: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rho: f64,
    /// Norm of the recursively updated residual.
    pub computed_residual: f64,
    pub true_residual: Option<f64>,
    pub kappa: Option<f64>,
    pub null_norm: f64,
    pub solution_norm: f64,
    pub ops_cum: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverWarning {
    IndefinitePreconditioner {
        iteration: usize,
        inner: f64,
    },
    /// `eta_1` vanished, so the proxy was scaled by one.
    EtaScaleFallback,
    /// `<R, Z>` fell to the rounding level of `rho_0`; iteration stopped.
    Stagnated {
        iteration: usize,
        rho: f64,
    },
}

/// Shifted, square-rooted `kappa` series and its residual-matched scaling.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EtaSeries {
    pub eta: Vec<f64>,
    pub scaled: Vec<f64>,
    pub alpha: f64,
    pub fallback: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLog {
    /// Entry 0 describes the initial guess.
    pub records: Vec<IterationRecord>,
    pub eta: Option<EtaSeries>,
    pub warnings: Vec<SolverWarning>,
    pub centered: bool,
    pub init_ops: u64,
}

impl ConvergenceLog {
    /// Iterations performed (records past the initial one).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_true_residual(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.true_residual)
    }

    /// First iteration whose true residual is at most `level`.
    pub fn iterations_to(&self, level: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.true_residual.is_some_and(|t| t <= level))
            .map(|r| r.s)
    }

    pub fn ops_total(&self) -> u64 {
        self.records.last().map_or(self.init_ops, |r| r.ops_cum)
    }

    fn finish(&mut self) {
        let kappas: Option<Vec<f64>> = self.records.iter().map(|r| r.kappa).collect();
        if let Some(k) = kappas {
            let r1 = self
                .records
                .get(1)
                .or(self.records.first())
                .and_then(|r| r.true_residual)
                .unwrap_or(0.0);
            let eta = eta_series(&k, r1);
            if eta.fallback {
                self.warnings.push(SolverWarning::EtaScaleFallback);
            }
            self.eta = Some(eta);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakdownKind {
    /// `<R, Z> <= 0`
    NonPositiveRho,
    /// `<W, P> <= 0`
    NonPositiveCurvature,
}

#[derive(Clone, Debug)]
pub struct Breakdown {
    pub kind: BreakdownKind,
    pub iteration: usize,
    pub value: f64,
    pub solution: DenseTensor,
    pub log: ConvergenceLog,
}

impl fmt::Display for Breakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            BreakdownKind::NonPositiveRho => "<R, Z>",
            BreakdownKind::NonPositiveCurvature => "<W, P>",
        };
        write!(
            f,
            "PCG breakdown at iteration {}: {what} = {:e} is not positive",
            self.iteration, self.value
        )
    }
}

/// `||H - A U||_F`
pub fn true_residual(op: &PoissonOperator, h: &DenseTensor, u: &DenseTensor) -> Result<f64> {
    let mut r = h.clone();
    r.axpy(-1.0, &op.apply(u)?)?;
    Ok(frobenius_norm(&r))
}

/// `<U, A U> - 2 <U, H>`, the energy error shifted by `-||u*||_A^2`.
pub fn kappa(op: &PoissonOperator, h: &DenseTensor, u: &DenseTensor) -> Result<f64> {
    let au = op.apply(u)?;
    Ok(inner(u, &au)? - 2.0 * inner(u, h)?)
}

/// `eta_s = sqrt(kappa_s - min kappa)` and `alpha * eta_s + 2^-52` with
/// `alpha = r1 / eta_1` (one when `eta_1` is below machine epsilon).
///
/// `eta_1` is the second entry when the list starts at the initial guess,
/// or the only entry otherwise.
pub fn eta_series(kappas: &[f64], r1: f64) -> EtaSeries {
    if kappas.is_empty() {
        return EtaSeries::default();
    }
    let min = kappas.iter().copied().fold(f64::INFINITY, f64::min);
    let eta: Vec<f64> = kappas.iter().map(|k| (k - min).max(0.0).sqrt()).collect();
    let eta1 = if eta.len() >= 2 { eta[1] } else { eta[0] };
    let (alpha, fallback) = if eta1 <= ETA_SHIFT {
        (1.0, true)
    } else {
        (r1 / eta1, false)
    };
    let scaled = eta.iter().map(|e| alpha * e + ETA_SHIFT).collect();
    EtaSeries {
        eta,
        scaled,
        alpha,
        fallback,
    }
}

fn check_shape(op: &PoissonOperator, x: &DenseTensor) -> Result<()> {
    if x.shape() != op.shape() {
        return Err(Error::ShapeMismatch {
            expected: op.shape().dims().to_vec(),
            got: x.shape().dims().to_vec(),
        });
    }
    Ok(())
}

struct Diagnostics {
    true_residual: Option<f64>,
    kappa: Option<f64>,
}

/// Solves `A U = H` from `u0`.
///
/// On breakdown the error carries the iterate and log accumulated so far.
pub fn pcg(
    op: &PoissonOperator,
    h: &DenseTensor,
    m: &Preconditioner,
    u0: &DenseTensor,
    cfg: &SolverConfig,
) -> Result<(DenseTensor, ConvergenceLog)> {
    cfg.validate()?;
    check_shape(op, h)?;
    check_shape(op, u0)?;
    let h_norm = frobenius_norm(h);
    if op.is_singular() {
        let component = nullspace_component(h);
        if component > CENTERING_TOLERANCE * h_norm {
            return Err(Error::NotCentered {
                component,
                norm: h_norm,
            });
        }
    }
    let center = cfg.center_each_iter.unwrap_or_else(|| op.is_singular());
    let shape = op.shape();
    let len = shape.len();
    let nn = len as u64;
    let hv = h.vec();

    let mut scratch = vec![0.0; len];
    let diag = |u: &[f64], scratch: &mut [f64], want: bool| -> Diagnostics {
        if !want {
            return Diagnostics {
                true_residual: None,
                kappa: None,
            };
        }
        op.apply_into(u, scratch);
        let uau = pairwise_dot(u, scratch);
        let uh = pairwise_dot(u, hv);
        scratch.iter_mut().zip(hv).for_each(|(a, b)| *a = b - *a);
        Diagnostics {
            true_residual: Some(pairwise_dot(scratch, scratch).sqrt()),
            kappa: Some(uau - 2.0 * uh),
        }
    };
    let want_diag = cfg.record_true_residual || cfg.stop_tol.is_some();
    let stop_ops = |ops: &mut u64| {
        if cfg.stop_tol.is_some() {
            // apply, residual saxpy, norm
            *ops += op_apply_ops(op) + 4 * nn;
        }
    };

    let mut log = ConvergenceLog {
        centered: center,
        init_ops: m.init_ops(),
        ..Default::default()
    };
    let mut ops = log.init_ops;

    let mut u = u0.vec().to_vec();
    let mut w = vec![0.0; len];
    ops += op.apply_into(&u, &mut w);
    let mut r: Vec<f64> = hv.iter().zip(&w).map(|(a, b)| a - b).collect();
    ops += 2 * nn;
    let r_t = DenseTensor::unvec(r.clone(), shape)?;
    let (z_t, warn) = m.apply_counted(op, &r_t, &mut ops)?;
    if let Some(wn) = warn {
        log.warnings.push(SolverWarning::IndefinitePreconditioner {
            iteration: 0,
            inner: wn.inner,
        });
    }
    let mut z = z_t.into_vec();
    if center {
        ops += center_in_place(&mut z);
    }
    let mut rho = pairwise_dot(&r, &z);
    ops += 2 * nn;
    let mut p = z.clone();

    let d = diag(&u, &mut scratch, want_diag);
    stop_ops(&mut ops);
    let u_tensor = |u: &[f64]| DenseTensor::unvec(u.to_vec(), shape);
    log.records.push(IterationRecord {
        s: 0,
        alpha: None,
        beta: None,
        rho,
        computed_residual: pairwise_dot(&r, &r).sqrt(),
        true_residual: d.true_residual,
        kappa: d.kappa,
        null_norm: null_norm(&u),
        solution_norm: pairwise_dot(&u, &u).sqrt(),
        ops_cum: ops,
    });
    let stop_level = cfg.stop_tol.map(|t| t * h_norm);
    let reached = |d: &Diagnostics| match (stop_level, d.true_residual) {
        (Some(level), Some(t)) => t <= level,
        _ => false,
    };
    let all_zero = |v: &[f64]| v.iter().all(|&x| x == 0.0);

    if all_zero(&r) || reached(&d) {
        log.finish();
        return Ok((u_tensor(&u)?, log));
    }
    let breakdown = |kind, iteration, value, u: &[f64], mut log: ConvergenceLog| -> Result<_> {
        log.finish();
        Err(Error::Breakdown(Box::new(Breakdown {
            kind,
            iteration,
            value,
            solution: u_tensor(u)?,
            log,
        })))
    };
    if !(rho > 0.0) {
        return breakdown(BreakdownKind::NonPositiveRho, 0, rho, &u, log);
    }
    // below this, sign and size of <R, Z> are rounding noise
    let floor = f64::EPSILON * f64::EPSILON * rho;

    for s in 1..=cfg.max_iter {
        ops += op.apply_into(&p, &mut w);
        let curvature = pairwise_dot(&w, &p);
        ops += 2 * nn;
        if !(curvature > 0.0) {
            if rho <= floor {
                log.warnings
                    .push(SolverWarning::Stagnated { iteration: s, rho });
                break;
            }
            return breakdown(BreakdownKind::NonPositiveCurvature, s, curvature, &u, log);
        }
        let alpha = rho / curvature;
        u.iter_mut().zip(&p).for_each(|(x, pi)| *x += alpha * pi);
        r.iter_mut().zip(&w).for_each(|(x, wi)| *x -= alpha * wi);
        ops += 4 * nn;

        let r_t = DenseTensor::unvec(r.clone(), shape)?;
        let (z_t, warn) = m.apply_counted(op, &r_t, &mut ops)?;
        if let Some(wn) = warn {
            log.warnings.push(SolverWarning::IndefinitePreconditioner {
                iteration: s,
                inner: wn.inner,
            });
        }
        z = z_t.into_vec();
        if center {
            ops += center_in_place(&mut z);
        }
        let rho_new = pairwise_dot(&r, &z);
        ops += 2 * nn;
        let beta = rho_new / rho;
        p.iter_mut().zip(&z).for_each(|(x, zi)| *x = zi + beta * *x);
        ops += 2 * nn;

        let d = diag(&u, &mut scratch, want_diag);
        stop_ops(&mut ops);
        log.records.push(IterationRecord {
            s,
            alpha: Some(alpha),
            beta: Some(beta),
            rho: rho_new,
            computed_residual: pairwise_dot(&r, &r).sqrt(),
            true_residual: d.true_residual,
            kappa: d.kappa,
            null_norm: null_norm(&u),
            solution_norm: pairwise_dot(&u, &u).sqrt(),
            ops_cum: ops,
        });
        if reached(&d) || all_zero(&r) {
            break;
        }
        if !(rho_new > 0.0) {
            if rho_new.abs() <= floor {
                log.warnings.push(SolverWarning::Stagnated {
                    iteration: s,
                    rho: rho_new,
                });
                break;
            }
            if s == cfg.max_iter {
                break;
            }
            return breakdown(BreakdownKind::NonPositiveRho, s, rho_new, &u, log);
        }
        rho = rho_new;
    }
    log.finish();
    Ok((u_tensor(&u)?, log))
}

fn null_norm(u: &[f64]) -> f64 {
    pairwise_sum(u).abs() / (u.len() as f64).sqrt()
}

fn op_apply_ops(op: &PoissonOperator) -> u64 {
    op.factors()
        .iter()
        .enumerate()
        .map(|(mode, f)| {
            let fibers = (op.shape().len() / op.shape().dim(mode)) as u64;
            2 * f.stencil().nnz() as u64 * fibers
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace1d::BoundaryCondition::{self, *};
    use crate::laplace1d::SpectrumSource;
    use crate::operator::center;
    use crate::precond::PrecondConfig;
    use crate::tensor::Shape;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: Shape) -> DenseTensor {
        DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    fn solve(
        op: &PoissonOperator,
        h: &DenseTensor,
        cfg: PrecondConfig,
        sc: &SolverConfig,
    ) -> (DenseTensor, ConvergenceLog) {
        let m = Preconditioner::build(op, &cfg, SpectrumSource::Numeric).unwrap();
        pcg(op, h, &m, &DenseTensor::zeros(op.shape()), sc).unwrap()
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let op = PoissonOperator::from_bcs(&[(4, Dirichlet), (5, Dirichlet)]).unwrap();
        let h = DenseTensor::zeros(op.shape());
        let (u, log) = solve(&op, &h, PrecondConfig::Identity, &SolverConfig::new(10));
        assert_eq!(u, h);
        assert_eq!(log.iterations(), 0);
        assert_eq!(log.records[0].true_residual, Some(0.0));
    }

    fn dense_cg(a: &DMatrix<f64>, b: &DVector<f64>, steps: usize) -> Vec<(f64, f64)> {
        let mut x = DVector::zeros(b.len());
        let mut r = b - a * &x;
        let mut p = r.clone();
        let mut rho = r.dot(&r);
        let mut out = Vec::new();
        for _ in 0..steps {
            let w = a * &p;
            let alpha = rho / w.dot(&p);
            x += alpha * &p;
            r -= alpha * &w;
            let rho_new = r.dot(&r);
            let beta = rho_new / rho;
            p = &r + beta * &p;
            rho = rho_new;
            out.push((alpha, beta));
        }
        out
    }

    #[test]
    fn identity_matches_dense_cg() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let op = PoissonOperator::from_bcs(&[(4, Dirichlet), (5, Dirichlet)]).unwrap();
        let h = random(&mut rng, op.shape());
        let (_, log) = solve(&op, &h, PrecondConfig::Identity, &SolverConfig::new(12));
        let oracle = dense_cg(
            &op.assemble_dense().unwrap(),
            &DVector::from_column_slice(h.vec()),
            12,
        );
        for (rec, (a, b)) in log.records[1..].iter().zip(oracle) {
            assert!((rec.alpha.unwrap() - a).abs() <= 1e-10 * a.abs());
            assert!((rec.beta.unwrap() - b).abs() <= 1e-10 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn initial_computed_residual_is_true_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let op = PoissonOperator::from_bcs(&[(6, Neumann), (4, DirichletNeumann)]).unwrap();
        let h = random(&mut rng, op.shape());
        let u0 = random(&mut rng, op.shape());
        let m = Preconditioner::Identity;
        let (_, log) = pcg(&op, &h, &m, &u0, &SolverConfig::new(3)).unwrap();
        let t = true_residual(&op, &h, &u0).unwrap();
        assert!((log.records[0].computed_residual - t).abs() <= 1e-14 * t);
    }

    #[test]
    fn singular_uncentered_rhs_rejected() {
        let op = PoissonOperator::from_bcs(&[(4, Periodic), (5, Neumann)]).unwrap();
        let h = DenseTensor::filled(op.shape(), 1.0);
        let err = pcg(
            &op,
            &h,
            &Preconditioner::Identity,
            &DenseTensor::zeros(op.shape()),
            &SolverConfig::new(5),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotCentered { .. }));
    }

    #[test]
    fn finite_termination_small_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let bcs = [Dirichlet, DirichletNeumann, NeumannDirichlet];
        for &(a, b) in &[(0, 1), (1, 2), (2, 0)] {
            let op = PoissonOperator::from_bcs(&[(5, bcs[a]), (7, bcs[b])]).unwrap();
            let h = random(&mut rng, op.shape());
            let (_, log) = solve(&op, &h, PrecondConfig::Identity, &SolverConfig::new(35));
            let t = log.final_true_residual().unwrap();
            assert!(t <= 1e-8 * frobenius_norm(&h), "{t}");
        }
    }

    #[test]
    fn kappa_and_true_residual_at_exact_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let op = PoissonOperator::from_bcs(&[(5, Dirichlet), (4, Neumann)]).unwrap();
        let h = random(&mut rng, op.shape());
        let a = op.assemble_dense().unwrap();
        let ustar = a.lu().solve(&DVector::from_column_slice(h.vec())).unwrap();
        let ustar = DenseTensor::unvec(ustar.as_slice().to_vec(), op.shape()).unwrap();
        assert!(true_residual(&op, &h, &ustar).unwrap() <= 1e-12 * frobenius_norm(&h));
        let k = kappa(&op, &h, &ustar).unwrap();
        let expect = -inner(&ustar, &h).unwrap();
        assert!((k - expect).abs() <= 1e-10 * expect.abs());
        let zero = DenseTensor::zeros(op.shape());
        assert_eq!(kappa(&op, &h, &zero).unwrap(), 0.0);
        assert_eq!(true_residual(&op, &h, &zero).unwrap(), frobenius_norm(&h));
    }

    #[test]
    fn eta_examples() {
        let e = eta_series(&[3.0, 3.0, 3.0], 1.0);
        assert!(e.eta.iter().all(|&x| x == 0.0));
        assert!(e.scaled.iter().all(|&x| x == ETA_SHIFT));
        assert!(e.fallback);
        assert_eq!(ETA_SHIFT, 2.220446049250313e-16);

        let e = eta_series(&[0.0, -3.0, -4.0, -4.0], 2.0);
        assert_eq!(e.eta[2], 0.0);
        assert_eq!(e.eta[0], 2.0);
        assert_eq!(e.alpha, 2.0);
        assert_eq!(
            e.scaled.iter().copied().fold(f64::INFINITY, f64::min),
            ETA_SHIFT
        );
    }

    #[test]
    fn centering_keeps_iterates_orthogonal_to_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let op = PoissonOperator::from_bcs(&[(8, Periodic), (6, Neumann), (5, Periodic)]).unwrap();
        let h = center(&random(&mut rng, op.shape()));
        for cfg in [
            PrecondConfig::Identity,
            PrecondConfig::Pinv,
            PrecondConfig::Jacobi { p: 2, omega: 1.3 },
        ] {
            let (_, log) = solve(&op, &h, cfg, &SolverConfig::new(15));
            assert!(log.centered);
            for rec in &log.records[1..] {
                assert!(rec.null_norm <= 1e-9 * rec.solution_norm);
            }
        }
    }

    #[test]
    fn cost_ledger_per_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        for dims in [
            vec![(6usize, Periodic), (9, Periodic)],
            vec![(4, Periodic), (5, Periodic), (6, Periodic)],
        ] {
            let op = PoissonOperator::from_bcs(&dims).unwrap();
            let h = center(&random(&mut rng, op.shape()));
            let sc = SolverConfig {
                record_true_residual: false,
                ..SolverConfig::new(4).with_centering(false)
            };
            let (_, log) = solve(&op, &h, PrecondConfig::Identity, &sc);
            let n = op.shape().len() as u64;
            let (init, iter) = if dims.len() == 2 { (16, 22) } else { (22, 28) };
            assert_eq!(log.records[0].ops_cum, init * n);
            for w in log.records.windows(2) {
                assert_eq!(w[1].ops_cum - w[0].ops_cum, iter * n);
            }
        }
    }

    #[test]
    fn pinv_converges_in_few_steps_on_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let op = PoissonOperator::from_bcs(&[(12, Periodic), (20, Periodic)]).unwrap();
        let h = center(&random(&mut rng, op.shape()));
        let (_, log) = solve(&op, &h, PrecondConfig::Pinv, &SolverConfig::new(10));
        let hn = frobenius_norm(&h);
        assert!(log.records[..=3.min(log.iterations())]
            .iter()
            .any(|r| r.true_residual.unwrap() <= 1e-10 * hn));
    }

    #[test]
    fn stop_tol_stops_early() {
        let mut rng = ChaCha8Rng::seed_from_u64(58);
        let op = PoissonOperator::from_bcs(&[(10, Dirichlet), (10, Dirichlet)]).unwrap();
        let h = random(&mut rng, op.shape());
        let sc = SolverConfig::new(500).with_stop_tol(1e-6);
        let (_, log) = solve(&op, &h, PrecondConfig::Identity, &sc);
        assert!(log.iterations() < 500);
        assert!(log.final_true_residual().unwrap() <= 1e-6 * frobenius_norm(&h));
        assert!(SolverConfig::new(0).validate().is_err());
        assert!(SolverConfig::new(3).with_stop_tol(0.0).validate().is_err());
    }

    #[test]
    fn curvature_breakdown_not_triggered_on_psd() {
        let op = PoissonOperator::from_bcs(&[(3, BoundaryCondition::Dirichlet), (3, Dirichlet)])
            .unwrap();
        let h = DenseTensor::filled(op.shape(), 1.0);
        let (_, log) = solve(&op, &h, PrecondConfig::Identity, &SolverConfig::new(20));
        assert!(log.final_true_residual().unwrap() <= 1e-14);
    }
}
