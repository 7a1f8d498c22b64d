//! Preconditioners for the Kronecker-sum Laplacian.
//!
//! Every family splits into a one-shot initialization producing immutable
//! state and a pure application `R -> Z`. Applications report their
//! elementary-operation count so the solver can keep a cost ledger.

mod jacobi;
mod lowrank;
mod pinv;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use jacobi::{jacobi_standalone, JacobiRun, JacobiState, StationaryConfig};
pub use lowrank::LowRankState;
pub use pinv::{PinvState, PINV_THRESHOLD};

use crate::error::{Error, Result};
use crate::laplace1d::SpectrumSource;
use crate::operator::PoissonOperator;
use crate::tensor::DenseTensor;

/// Which preconditioner to build, with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrecondConfig {
    Identity,
    Jacobi { p: usize, omega: f64 },
    LowRank { rank: usize },
    Pinv,
}

impl fmt::Display for PrecondConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecondConfig::Identity => f.write_str("none"),
            PrecondConfig::Jacobi { p, omega } => write!(f, "jacobi:p={p},omega={omega}"),
            PrecondConfig::LowRank { rank } => write!(f, "lowrank:r={rank}"),
            PrecondConfig::Pinv => f.write_str("pinv"),
        }
    }
}

impl FromStr for PrecondConfig {
    type Err = Error;

    /// `none | pinv | jacobi:p=3,omega=1.3 | lowrank:r=3`
    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h, a),
            None => (s, ""),
        };
        let mut p = None;
        let mut omega = None;
        let mut rank = None;
        for kv in args.split(',').filter(|a| !a.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                Error::param("precond", format!("expected key=value, got `{kv}`"))
            })?;
            let bad = || Error::param("precond", format!("bad value for `{k}`: `{v}`"));
            match k {
                "p" => p = Some(v.parse::<usize>().map_err(|_| bad())?),
                "omega" | "w" => omega = Some(v.parse::<f64>().map_err(|_| bad())?),
                "r" | "rank" => rank = Some(v.parse::<usize>().map_err(|_| bad())?),
                _ => return Err(Error::param("precond", format!("unknown key `{k}`"))),
            }
        }
        match head {
            "none" | "identity" => Ok(PrecondConfig::Identity),
            "pinv" => Ok(PrecondConfig::Pinv),
            "jacobi" => Ok(PrecondConfig::Jacobi {
                p: p.unwrap_or(1),
                omega: omega.unwrap_or(1.0),
            }),
            "lowrank" => Ok(PrecondConfig::LowRank {
                rank: rank.ok_or_else(|| Error::param("precond", "lowrank needs r=<rank>"))?,
            }),
            _ => Err(Error::param(
                "precond",
                format!("unknown preconditioner `{head}`"),
            )),
        }
    }
}

/// Raised when a low-rank application yields `<Z, R> <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndefiniteWarning {
    pub inner: f64,
}

#[derive(Clone, Debug)]
pub enum Preconditioner {
    Identity,
    Jacobi(JacobiState),
    LowRank(LowRankState),
    Pinv(PinvState),
}

impl Preconditioner {
    pub fn build(
        op: &PoissonOperator,
        cfg: &PrecondConfig,
        source: SpectrumSource,
    ) -> Result<Self> {
        Ok(match *cfg {
            PrecondConfig::Identity => Preconditioner::Identity,
            PrecondConfig::Jacobi { p, omega } => {
                Preconditioner::Jacobi(JacobiState::new(op, p, omega)?)
            }
            PrecondConfig::LowRank { rank } => {
                Preconditioner::LowRank(LowRankState::new(op, rank, source)?)
            }
            PrecondConfig::Pinv => Preconditioner::Pinv(PinvState::new(op, source)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preconditioner::Identity => "none",
            Preconditioner::Jacobi(_) => "jacobi",
            Preconditioner::LowRank(_) => "lowrank",
            Preconditioner::Pinv(_) => "pinv",
        }
    }

    /// Operation count of initialization, eigensolves and SVDs excluded.
    pub fn init_ops(&self) -> u64 {
        match self {
            Preconditioner::Identity => 0,
            Preconditioner::Jacobi(st) => st.init_ops(),
            Preconditioner::LowRank(st) => st.init_ops(),
            Preconditioner::Pinv(st) => st.init_ops(),
        }
    }

    pub fn apply(&self, op: &PoissonOperator, r: &DenseTensor) -> Result<DenseTensor> {
        let mut ops = 0;
        self.apply_counted(op, r, &mut ops).map(|(z, _)| z)
    }

    pub(crate) fn apply_counted(
        &self,
        op: &PoissonOperator,
        r: &DenseTensor,
        ops: &mut u64,
    ) -> Result<(DenseTensor, Option<IndefiniteWarning>)> {
        if r.shape() != op.shape() {
            return Err(Error::ShapeMismatch {
                expected: op.shape().dims().to_vec(),
                got: r.shape().dims().to_vec(),
            });
        }
        Ok(match self {
            Preconditioner::Identity => (identity_apply(r), None),
            Preconditioner::Jacobi(st) => (st.apply_counted(op, r, ops)?, None),
            Preconditioner::LowRank(st) => {
                let (z, warn) = st.apply_counted(r, ops)?;
                (z, warn)
            }
            Preconditioner::Pinv(st) => (st.apply_counted(r, ops)?, None),
        })
    }
}

pub fn identity_apply(r: &DenseTensor) -> DenseTensor {
    r.clone()
}
