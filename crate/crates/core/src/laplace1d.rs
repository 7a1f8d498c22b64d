//! One-direction finite-difference minus Laplacians and their spectra.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    Periodic,
    Dirichlet,
    Neumann,
    DirichletNeumann,
    NeumannDirichlet,
}

/// Kind of condition imposed on one face of a direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Periodic,
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub const ALL: [BoundaryCondition; 5] = [
        BoundaryCondition::Periodic,
        BoundaryCondition::Dirichlet,
        BoundaryCondition::Neumann,
        BoundaryCondition::DirichletNeumann,
        BoundaryCondition::NeumannDirichlet,
    ];

    /// Corner values `(alpha, beta, gamma)` of the stencil matrix.
    pub fn corners(self) -> (f64, f64, f64) {
        match self {
            BoundaryCondition::Periodic => (2.0, 2.0, -1.0),
            BoundaryCondition::Dirichlet => (2.0, 2.0, 0.0),
            BoundaryCondition::Neumann => (1.0, 1.0, 0.0),
            BoundaryCondition::DirichletNeumann => (2.0, 1.0, 0.0),
            BoundaryCondition::NeumannDirichlet => (1.0, 2.0, 0.0),
        }
    }

    /// Whether the 1D matrix has a (simple) zero eigenvalue.
    pub fn is_singular(self) -> bool {
        matches!(
            self,
            BoundaryCondition::Periodic | BoundaryCondition::Neumann
        )
    }

    pub fn faces(self) -> (FaceKind, FaceKind) {
        use FaceKind::*;
        match self {
            BoundaryCondition::Periodic => (Periodic, Periodic),
            BoundaryCondition::Dirichlet => (Dirichlet, Dirichlet),
            BoundaryCondition::Neumann => (Neumann, Neumann),
            BoundaryCondition::DirichletNeumann => (Dirichlet, Neumann),
            BoundaryCondition::NeumannDirichlet => (Neumann, Dirichlet),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryCondition::Periodic => "periodic",
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::DirichletNeumann => "dirichlet-neumann",
            BoundaryCondition::NeumannDirichlet => "neumann-dirichlet",
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundaryCondition::ALL
            .into_iter()
            .find(|bc| bc.name() == s)
            .ok_or_else(|| Error::param("bc", format!("unknown boundary condition `{s}`")))
    }
}

pub fn is_singular_1d(bc: BoundaryCondition) -> bool {
    bc.is_singular()
}

/// Symmetric stencil with unit negative off-diagonals, an arbitrary
/// diagonal and an optional wrap-around corner coupling.
#[derive(Clone, Debug)]
pub(crate) struct Stencil {
    diag: Vec<f64>,
    corner: f64,
}

impl Stencil {
    pub(crate) fn new(diag: Vec<f64>, corner: f64) -> Self {
        Stencil { diag, corner }
    }

    pub(crate) fn nnz(&self) -> usize {
        let n = self.diag.len();
        let diag = self.diag.iter().filter(|&&d| d != 0.0).count();
        let corner = if self.corner != 0.0 { 2 } else { 0 };
        2 * (n - 1) + diag + corner
    }

    pub(crate) fn to_dense(&self) -> DenseMatrix {
        let n = self.diag.len();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = -1.0;
                m[(i + 1, i)] = -1.0;
            }
        }
        m[(0, n - 1)] += self.corner;
        m[(n - 1, 0)] += self.corner;
        m
    }

    /// `out += S x_mode x`. Returns the number of elementary operations
    /// (one per multiply, one per add; two per stored nonzero per fiber).
    pub(crate) fn accumulate_mode(
        &self,
        mode: usize,
        shape: Shape,
        x: &[f64],
        out: &mut [f64],
    ) -> u64 {
        let n = self.diag.len();
        debug_assert_eq!(shape.dim(mode), n);
        let total = shape.len();
        let fibers = total / n;
        let skip_diag = self.diag.iter().all(|&d| d == 0.0);
        let g = self.corner;
        let d = &self.diag;
        if mode == 0 {
            for (xf, of) in x.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
                if !skip_diag {
                    for i in 0..n {
                        of[i] += d[i] * xf[i];
                    }
                }
                for i in 1..n {
                    of[i] -= xf[i - 1];
                    of[i - 1] -= xf[i];
                }
                if g != 0.0 {
                    of[0] += g * xf[n - 1];
                    of[n - 1] += g * xf[0];
                }
            }
        } else {
            let s = shape.stride(mode);
            let block = n * s;
            for (xb, ob) in x.chunks_exact(block).zip(out.chunks_exact_mut(block)) {
                for i in 0..n {
                    let (lo, hi) = (i * s, (i + 1) * s);
                    let orow = &mut ob[lo..hi];
                    if !skip_diag {
                        let di = d[i];
                        orow.iter_mut()
                            .zip(&xb[lo..hi])
                            .for_each(|(o, &v)| *o += di * v);
                    }
                    if i > 0 {
                        orow.iter_mut()
                            .zip(&xb[lo - s..lo])
                            .for_each(|(o, &v)| *o -= v);
                    }
                    if i + 1 < n {
                        orow.iter_mut()
                            .zip(&xb[hi..hi + s])
                            .for_each(|(o, &v)| *o -= v);
                    }
                    if g != 0.0 {
                        let j = if i == 0 {
                            Some(n - 1)
                        } else if i == n - 1 {
                            Some(0)
                        } else {
                            None
                        };
                        if let Some(j) = j {
                            let src = &xb[j * s..(j + 1) * s];
                            orow.iter_mut().zip(src).for_each(|(o, &v)| *o += g * v);
                        }
                    }
                }
            }
        }
        2 * (self.nnz() * fibers) as u64
    }
}

/// Discrete minus Laplacian in one direction: tridiagonal `(-1, 2, -1)`
/// with boundary-dependent corners.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Laplacian1D {
    n: usize,
    bc: BoundaryCondition,
}

pub const MIN_POINTS: usize = 3;

impl Laplacian1D {
    pub fn new(n: usize, bc: BoundaryCondition) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::param(
                "n",
                format!("at least {MIN_POINTS} grid points required, got {n}"),
            ));
        }
        Ok(Laplacian1D { n, bc })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn corners(&self) -> (f64, f64, f64) {
        self.bc.corners()
    }

    pub fn is_singular(&self) -> bool {
        self.bc.is_singular()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let (alpha, beta, _) = self.corners();
        let mut d = vec![2.0; self.n];
        d[0] = alpha;
        d[self.n - 1] = beta;
        d
    }

    pub(crate) fn stencil(&self) -> Stencil {
        Stencil::new(self.diagonal(), self.corners().2)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.stencil().to_dense()
    }

    /// Sparse `L x`.
    pub fn apply_1d(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        self.stencil()
            .accumulate_mode(0, Shape::d2(self.n, 1), x, &mut out);
        Ok(out)
    }

    pub fn analytic_spectrum(&self) -> SpectralDecomposition {
        analytic_spectrum(self.n, self.bc)
    }

    pub fn numeric_spectrum(&self) -> Result<SpectralDecomposition> {
        numeric_spectrum(self)
    }

    pub fn spectrum(&self, source: SpectrumSource) -> Result<SpectralDecomposition> {
        match source {
            SpectrumSource::Numeric => self.numeric_spectrum(),
            SpectrumSource::Analytic => Ok(self.analytic_spectrum()),
        }
    }
}

/// Where eigenpairs of the 1D factors come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumSource {
    /// Dense symmetric eigensolver; more accurate reconstruction in practice.
    #[default]
    Numeric,
    /// Closed-form sines and cosines.
    Analytic,
}

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SpectralDecomposition {
    fn sorted(eigenvalues: Vec<f64>, vectors: DenseMatrix) -> Self {
        let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let n = vectors.nrows();
        let values = order.iter().map(|&k| eigenvalues[k]).collect();
        let vectors = DenseMatrix::from_fn(n, order.len(), |i, c| vectors[(i, order[c])]);
        SpectralDecomposition {
            eigenvalues: values,
            vectors,
        }
    }

    /// `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut scaled = self.vectors.clone();
        for (c, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(c).scale_mut(lam);
        }
        scaled * self.vectors.transpose()
    }
}

fn normalize_columns(v: &mut DenseMatrix) {
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
}

/// Closed-form eigenpairs, normalized and sorted ascending.
pub fn analytic_spectrum(n: usize, bc: BoundaryCondition) -> SpectralDecomposition {
    let nf = n as f64;
    let lam = |theta: f64| 2.0 - 2.0 * theta.cos();
    let mut values = Vec::with_capacity(n);
    let mut vectors = DenseMatrix::zeros(n, n);
    match bc {
        BoundaryCondition::Periodic => {
            values.push(0.0);
            vectors.column_mut(0).fill(1.0);
            let pairs = (n - 1) / 2;
            for k in 1..=pairs {
                let theta = 2.0 * k as f64 * PI / nf;
                values.push(lam(theta));
                values.push(lam(theta));
                for j in 1..=n {
                    vectors[(j - 1, 2 * k - 1)] = (j as f64 * theta).cos();
                    vectors[(j - 1, 2 * k)] = (j as f64 * theta).sin();
                }
            }
            if n.is_multiple_of(2) {
                values.push(4.0);
                for j in 0..n {
                    vectors[(j, n - 1)] = if j % 2 == 0 { 1.0 } else { -1.0 };
                }
            } else {
                // odd n: the alternating vector is not periodic; the cosine/sine
                // pairs above already span the spectrum, re-orthonormalize them.
                modified_gram_schmidt(&mut vectors);
            }
        }
        BoundaryCondition::Dirichlet => {
            for k in 1..=n {
                let theta = k as f64 * PI / (nf + 1.0);
                values.push(lam(theta));
                for j in 1..=n {
                    vectors[(j - 1, k - 1)] = (j as f64 * theta).sin();
                }
            }
        }
        BoundaryCondition::Neumann => {
            for k in 1..=n {
                let theta = (k - 1) as f64 * PI / nf;
                values.push(lam(theta));
                for j in 1..=n {
                    vectors[(j - 1, k - 1)] = ((j as f64 - 0.5) * theta).cos();
                }
            }
        }
        BoundaryCondition::DirichletNeumann | BoundaryCondition::NeumannDirichlet => {
            for k in 1..=n {
                let theta = (2 * k - 1) as f64 * PI / (2.0 * nf + 1.0);
                values.push(lam(theta));
                for j in 1..=n {
                    let jf = j as f64;
                    vectors[(j - 1, k - 1)] = if bc == BoundaryCondition::DirichletNeumann {
                        (jf * theta - k as f64 * PI).sin()
                    } else {
                        (jf * theta - theta / 2.0).cos()
                    };
                }
            }
        }
    }
    normalize_columns(&mut vectors);
    SpectralDecomposition::sorted(values, vectors)
}

fn modified_gram_schmidt(v: &mut DenseMatrix) {
    for c in 0..v.ncols() {
        for p in 0..c {
            let proj = v.column(p).dot(&v.column(c)) / v.column(p).norm_squared();
            let prev = v.column(p).clone_owned();
            v.column_mut(c).axpy(-proj, &prev, 1.0);
        }
    }
}

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigendecomposition by a dense symmetric solver.
pub fn numeric_spectrum(l: &Laplacian1D) -> Result<SpectralDecomposition> {
    let eig = SymmetricEigen::try_new(l.to_dense(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::EigenSolver(l.n))?;
    Ok(SpectralDecomposition::sorted(
        eig.eigenvalues.iter().copied().collect(),
        eig.eigenvectors,
    ))
}
