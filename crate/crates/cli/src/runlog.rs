//! JSON run logs and gnuplot-ready series.

use kronpcg::precond::JacobiRun;
use kronpcg::{BoundaryCondition, ConvergenceLog, DenseTensor, SolverWarning, SpectrumSource};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pcg,
    Jacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub max_iter: usize,
    pub center: bool,
    pub stop_tol: Option<f64>,
    pub spectrum: SpectrumSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub s: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub computed_res: Option<f64>,
    pub true_res: Option<f64>,
    pub kappa: Option<f64>,
    pub eta_scaled: Option<f64>,
    pub null_norm: Option<f64>,
    pub ops_cum: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalNorms {
    pub rhs: f64,
    pub true_res: Option<f64>,
    pub relative_true_res: Option<f64>,
    pub computed_res: Option<f64>,
    pub solution: f64,
    pub null_component: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLogFile {
    pub problem: String,
    pub shape: Vec<usize>,
    pub bcs: Vec<BoundaryCondition>,
    pub preconditioner: String,
    pub seed: Option<u64>,
    pub config: RunConfig,
    pub initial: IterationEntry,
    pub iterations: Vec<IterationEntry>,
    pub warnings: Vec<SolverWarning>,
    pub notes: Vec<String>,
    pub breakdown: Option<String>,
    pub diverged: bool,
    pub final_norms: FinalNorms,
}

/// Identification of a run, shared by both constructors.
pub struct RunMeta<'a> {
    pub problem: &'a str,
    pub bcs: &'a [BoundaryCondition],
    pub preconditioner: String,
    pub seed: Option<u64>,
    pub config: RunConfig,
}

fn finite_or_none(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl RunLogFile {
    pub fn from_pcg(
        meta: RunMeta<'_>,
        log: &ConvergenceLog,
        rhs: &DenseTensor,
        solution: &DenseTensor,
        breakdown: Option<String>,
    ) -> Self {
        let scaled = log.eta.as_ref().map(|e| e.scaled.as_slice()).unwrap_or(&[]);
        let mut entries = log.records.iter().enumerate().map(|(i, r)| IterationEntry {
            s: r.s,
            alpha: r.alpha,
            beta: r.beta,
            rho: Some(r.rho),
            computed_res: Some(r.computed_residual),
            true_res: r.true_residual,
            kappa: r.kappa,
            eta_scaled: scaled.get(i).copied(),
            null_norm: Some(r.null_norm),
            ops_cum: r.ops_cum,
        });
        let initial = entries.next().expect("log has an initial record");
        let iterations: Vec<_> = entries.collect();
        let last = iterations.last().unwrap_or(&initial);
        let rhs_norm = kronpcg::tensor::frobenius_norm(rhs);
        let final_norms = FinalNorms {
            rhs: rhs_norm,
            true_res: last.true_res,
            relative_true_res: last.true_res.map(|t| t / rhs_norm),
            computed_res: last.computed_res,
            solution: kronpcg::tensor::frobenius_norm(solution),
            null_component: kronpcg::nullspace_component(solution),
        };
        RunLogFile {
            problem: meta.problem.to_string(),
            shape: rhs.shape().dims().to_vec(),
            bcs: meta.bcs.to_vec(),
            preconditioner: meta.preconditioner,
            seed: meta.seed,
            config: meta.config,
            initial: initial.clone(),
            iterations,
            warnings: log.warnings.clone(),
            notes: Vec::new(),
            breakdown,
            diverged: false,
            final_norms,
        }
    }

    pub fn from_jacobi(meta: RunMeta<'_>, run: &JacobiRun, rhs: &DenseTensor) -> Self {
        let mut entries = run
            .residuals
            .iter()
            .zip(&run.ops)
            .enumerate()
            .map(|(s, (&r, &ops))| IterationEntry {
                s,
                alpha: None,
                beta: None,
                rho: None,
                computed_res: None,
                true_res: finite_or_none(r),
                kappa: None,
                eta_scaled: None,
                null_norm: None,
                ops_cum: ops,
            });
        let initial = entries.next().expect("run has an initial residual");
        let iterations: Vec<_> = entries.collect();
        let last = iterations.last().unwrap_or(&initial);
        let rhs_norm = kronpcg::tensor::frobenius_norm(rhs);
        let final_norms = FinalNorms {
            rhs: rhs_norm,
            true_res: last.true_res,
            relative_true_res: last.true_res.map(|t| t / rhs_norm),
            computed_res: None,
            solution: kronpcg::tensor::frobenius_norm(&run.x),
            null_component: kronpcg::nullspace_component(&run.x),
        };
        RunLogFile {
            problem: meta.problem.to_string(),
            shape: rhs.shape().dims().to_vec(),
            bcs: meta.bcs.to_vec(),
            preconditioner: meta.preconditioner,
            seed: meta.seed,
            config: meta.config,
            initial,
            iterations,
            warnings: Vec::new(),
            notes: Vec::new(),
            breakdown: None,
            diverged: run.diverged,
            final_norms,
        }
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), String> {
        if self.iterations.len() > self.config.max_iter {
            return Err(format!(
                "{} iterations exceed max_iter {}",
                self.iterations.len(),
                self.config.max_iter
            ));
        }
        if self.initial.s != 0 {
            return Err("initial record must have s = 0".into());
        }
        for (k, e) in self.iterations.iter().enumerate() {
            if e.s != k + 1 {
                return Err(format!("iteration {k} has index {}", e.s));
            }
        }
        if self.shape.len() != self.bcs.len() {
            return Err("one boundary condition per direction required".into());
        }
        if !self.diverged {
            let fields = std::iter::once(&self.initial)
                .chain(&self.iterations)
                .flat_map(|e| {
                    [
                        e.alpha,
                        e.beta,
                        e.rho,
                        e.computed_res,
                        e.true_res,
                        e.kappa,
                        e.eta_scaled,
                        e.null_norm,
                    ]
                })
                .flatten();
            if let Some(bad) = fields.into_iter().find(|v| !v.is_finite()) {
                return Err(format!("non-finite value {bad}"));
            }
        }
        Ok(())
    }

    /// Relative true residual first at or below `level`.
    pub fn iterations_to(&self, level: f64) -> Option<usize> {
        let rhs = self.final_norms.rhs;
        std::iter::once(&self.initial)
            .chain(&self.iterations)
            .find(|e| e.true_res.is_some_and(|t| t <= level * rhs))
            .map(|e| e.s)
    }

    pub fn ops_total(&self) -> u64 {
        self.iterations.last().unwrap_or(&self.initial).ops_cum
    }

    /// Whitespace-separated columns `s ops_cum true_res eta_scaled`.
    pub fn gnuplot(&self) -> String {
        let mut out = String::from("# s ops_cum true_res eta_scaled\n");
        let fmt = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |x| format!("{x:e}"));
        for e in std::iter::once(&self.initial).chain(&self.iterations) {
            out.push_str(&format!(
                "{} {} {} {}\n",
                e.s,
                e.ops_cum,
                fmt(e.true_res),
                fmt(e.eta_scaled)
            ));
        }
        out
    }
}
