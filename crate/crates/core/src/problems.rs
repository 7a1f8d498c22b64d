//! Test-problem generators and the experiment driver.
//!
//! Every generated right-hand side is centered when the operator is
//! singular and scaled to `||H||_F = 1 / cells`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace1d::{BoundaryCondition, Laplacian1D, SpectrumSource, MIN_POINTS};
use crate::operator::{apply_bc_updates, center, BoundaryData, FaceValue, PoissonOperator};
use crate::pcg::{pcg, BreakdownKind, ConvergenceLog, SolverConfig};
use crate::precond::{PrecondConfig, Preconditioner};
use crate::tensor::{frobenius_norm, DenseTensor, Shape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemParams {
    /// `+1` where `(di*i + dj*j) mod period == 0`, `-1` where it equals `period/2`.
    DiagonalLines { period: usize, di: usize, dj: usize },
    /// Uniform charge on x-columns `start..start+width`.
    Band { start: usize, width: usize },
    /// Random positive and negative stripes across the x-direction.
    RandomStripes {
        variant: Problem3Variant,
        positive: (usize, usize),
        negative: (usize, usize),
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub shape: Shape,
    pub bcs: Vec<BoundaryCondition>,
    pub boundary: BoundaryData,
    pub params: ProblemParams,
    pub seed: Option<u64>,
}

impl ProblemSpec {
    pub fn operator(&self) -> Result<PoissonOperator> {
        let factors = self
            .shape
            .dims()
            .iter()
            .zip(&self.bcs)
            .map(|(&n, &bc)| Laplacian1D::new(n, bc))
            .collect::<Result<Vec<_>>>()?;
        PoissonOperator::new(factors)
    }

    /// `h` plus the boundary-value updates.
    pub fn rhs(&self, h: &DenseTensor) -> Result<DenseTensor> {
        if self.boundary.is_empty() {
            return Ok(h.clone());
        }
        apply_bc_updates(h, &self.bcs, &self.boundary)
    }
}

/// Scales `h` to Frobenius norm `1 / cells`.
pub fn normalize(h: &DenseTensor) -> Result<DenseTensor> {
    let norm = frobenius_norm(h);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::param(
            "h",
            "cannot normalize a zero or non-finite tensor",
        ));
    }
    let target = 1.0 / h.shape().len() as f64;
    let mut out = h.scaled(target / norm);
    // one correction pass removes the rounding of the first scale factor
    let again = frobenius_norm(&out);
    out.scale(target / again);
    Ok(out)
}

fn check_min(n: usize, what: &'static str) -> Result<()> {
    if n < MIN_POINTS {
        return Err(Error::param(
            what,
            format!("need at least 3 points, got {n}"),
        ));
    }
    Ok(())
}

/// Diagonal-line pattern on a doubly periodic grid, with the default
/// orientation `(2i + j) mod q`.
pub fn gen_problem1(n: usize, q: usize, period: usize) -> Result<(ProblemSpec, DenseTensor)> {
    gen_problem1_with(n, q, period, 2, 1)
}

pub fn gen_problem1_with(
    n: usize,
    q: usize,
    period: usize,
    di: usize,
    dj: usize,
) -> Result<(ProblemSpec, DenseTensor)> {
    check_min(n, "n")?;
    check_min(q, "q")?;
    if period < 2 || !period.is_multiple_of(2) {
        return Err(Error::param(
            "period",
            format!("must be even and >= 2, got {period}"),
        ));
    }
    let shape = Shape::d2(n, q);
    let raw = DenseTensor::from_fn(shape, |ix| {
        let d = (di * ix[0] + dj * ix[1]) % period;
        if d == 0 {
            1.0
        } else if d == period / 2 {
            -1.0
        } else {
            0.0
        }
    });
    let h = normalize(&center(&raw))?;
    let spec = ProblemSpec {
        name: format!("p1_{n}x{q}"),
        shape,
        bcs: vec![BoundaryCondition::Periodic; 2],
        boundary: BoundaryData::none(2),
        params: ProblemParams::DiagonalLines { period, di, dj },
        seed: None,
    };
    Ok((spec, h))
}

/// The four grid sizes of the diagonal-line problem.
pub const PROBLEM1_SIZES: [(usize, usize); 4] = [(5, 10), (20, 40), (50, 100), (500, 1000)];

pub const PROBLEM2_SHAPE: (usize, usize) = (40, 120);
pub const PROBLEM2_FIELD: f64 = -0.5;

/// Charged band in a 40 x 120 domain, grounded on the left and with
/// prescribed field `-1/2` on the right; periodic vertically.
///
/// `H` holds only the normalized charge; the boundary updates travel in the
/// returned [`BoundaryData`] and are added by [`ProblemSpec::rhs`].
pub fn gen_problem2() -> Result<(ProblemSpec, DenseTensor, BoundaryData)> {
    let (n, q) = PROBLEM2_SHAPE;
    let (start, width) = (n / 3 - 1, 3);
    let shape = Shape::d2(n, q);
    let raw = DenseTensor::from_fn(shape, |ix| {
        if (start..start + width).contains(&ix[0]) {
            1.0
        } else {
            0.0
        }
    });
    let h = normalize(&raw)?;
    let mut boundary = BoundaryData::none(2);
    boundary.set_begin(0, FaceValue::Potential(0.0));
    boundary.set_end(0, FaceValue::Field(PROBLEM2_FIELD));
    let spec = ProblemSpec {
        name: "p2_40x120".to_string(),
        shape,
        bcs: vec![
            BoundaryCondition::DirichletNeumann,
            BoundaryCondition::Periodic,
        ],
        boundary: boundary.clone(),
        params: ProblemParams::Band { start, width },
        seed: None,
    };
    Ok((spec, h, boundary))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Problem3Variant {
    #[serde(rename = "2d_512x256")]
    D2_512x256,
    #[serde(rename = "3d_128x64x8")]
    D3_128x64x8,
    #[serde(rename = "3d_128x64x64")]
    D3_128x64x64,
    #[serde(rename = "3d_512x256x8")]
    D3_512x256x8,
}

impl Problem3Variant {
    pub const ALL: [Problem3Variant; 4] = [
        Problem3Variant::D2_512x256,
        Problem3Variant::D3_128x64x8,
        Problem3Variant::D3_128x64x64,
        Problem3Variant::D3_512x256x8,
    ];

    pub fn shape(self) -> Shape {
        match self {
            Problem3Variant::D2_512x256 => Shape::d2(512, 256),
            Problem3Variant::D3_128x64x8 => Shape::d3(128, 64, 8),
            Problem3Variant::D3_128x64x64 => Shape::d3(128, 64, 64),
            Problem3Variant::D3_512x256x8 => Shape::d3(512, 256, 8),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Problem3Variant::D2_512x256 => "2d_512x256",
            Problem3Variant::D3_128x64x8 => "3d_128x64x8",
            Problem3Variant::D3_128x64x64 => "3d_128x64x64",
            Problem3Variant::D3_512x256x8 => "3d_512x256x8",
        }
    }
}

impl fmt::Display for Problem3Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Problem3Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Problem3Variant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::param("variant", format!("unknown variant `{s}`")))
    }
}

/// Random charge: uniform positive values on a stripe of width `n/8`,
/// uniform negative values on a stripe of width `n/16`, rescaled to an
/// exactly balanced sum. Uses ChaCha8 seeded with `seed`.
pub fn gen_problem3(variant: Problem3Variant, seed: u64) -> Result<(ProblemSpec, DenseTensor)> {
    let shape = variant.shape();
    let n = shape.dim(0);
    let positive = (n / 4, n / 8);
    let negative = (5 * n / 8, n / 16);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_stripe = |i: usize, (s, w): (usize, usize)| (s..s + w).contains(&i);
    let raw = DenseTensor::from_fn(shape, |ix| {
        if in_stripe(ix[0], positive) {
            rng.random_range(f64::EPSILON..=1.0)
        } else if in_stripe(ix[0], negative) {
            -rng.random_range(f64::EPSILON..=1.0)
        } else {
            0.0
        }
    });
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for &v in raw.vec() {
        if v > 0.0 {
            pos.push(v);
        } else if v < 0.0 {
            neg.push(-v);
        }
    }
    let ratio = crate::tensor::pairwise_sum(&pos) / crate::tensor::pairwise_sum(&neg);
    let balanced = DenseTensor::unvec(
        raw.vec()
            .iter()
            .map(|&v| if v < 0.0 { v * ratio } else { v })
            .collect(),
        shape,
    )?;
    let h = normalize(&center(&balanced))?;
    let spec = ProblemSpec {
        name: format!("p3_{}", variant.tag()),
        shape,
        bcs: vec![BoundaryCondition::Periodic; shape.ndim()],
        boundary: BoundaryData::none(shape.ndim()),
        params: ProblemParams::RandomStripes {
            variant,
            positive,
            negative,
        },
        seed: Some(seed),
    };
    Ok((spec, h))
}

/// The nine right-hand sides: four diagonal-line sizes, the band problem
/// and the four random-stripe variants.
pub fn all_problems(seed: u64) -> Result<Vec<(ProblemSpec, DenseTensor)>> {
    let mut out = Vec::with_capacity(9);
    for (n, q) in PROBLEM1_SIZES {
        out.push(gen_problem1(n, q, q)?);
    }
    let (spec, h, _) = gen_problem2()?;
    out.push((spec, h));
    for v in Problem3Variant::ALL {
        out.push(gen_problem3(v, seed)?);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub config: PrecondConfig,
    pub log: ConvergenceLog,
    pub breakdown: Option<BreakdownKind>,
    pub solution: DenseTensor,
}

/// One zero-start solve per preconditioner on `spec.rhs(h)`.
///
/// Breakdowns are kept as partial runs; other errors abort.
pub fn run_experiment(
    spec: &ProblemSpec,
    h: &DenseTensor,
    configs: &[PrecondConfig],
    cfg: &SolverConfig,
    source: SpectrumSource,
) -> Result<Vec<ExperimentRun>> {
    let op = spec.operator()?;
    let rhs = spec.rhs(h)?;
    let u0 = DenseTensor::zeros(op.shape());
    configs
        .iter()
        .map(|c| {
            let m = Preconditioner::build(&op, c, source)?;
            match pcg(&op, &rhs, &m, &u0, cfg) {
                Ok((u, log)) => Ok(ExperimentRun {
                    config: c.clone(),
                    log,
                    breakdown: None,
                    solution: u,
                }),
                Err(Error::Breakdown(b)) => Ok(ExperimentRun {
                    config: c.clone(),
                    log: b.log,
                    breakdown: Some(b.kind),
                    solution: b.solution,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}
