//! Subcommand definitions and drivers.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kronpcg::pcg::CENTERING_TOLERANCE;
use kronpcg::precond::{jacobi_standalone, StationaryConfig};
use kronpcg::problems::{
    all_problems, gen_problem1, gen_problem2, gen_problem3, Problem3Variant, ProblemSpec,
};
use kronpcg::tensor::frobenius_norm;
use kronpcg::{
    center, nullspace_component, pcg, BoundaryCondition, DenseTensor, Error, Laplacian1D,
    PoissonOperator, PrecondConfig, Preconditioner, SolverConfig, SpectrumSource,
};
use serde::Serialize;

use crate::args::{boundary_data, parse_bcs, parse_size};
use crate::error::{CliError, CliResult};
use crate::runlog::{Method, RunConfig, RunLogFile, RunMeta};
use crate::tensor_file;

#[derive(Debug, Parser)]
#[command(
    name = "kronpcg",
    version,
    about = "Tensor-structured PCG for finite-difference Poisson problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a test right-hand side.
    Gen(GenArgs),
    /// Solve A U = H for a right-hand side file.
    Solve(SolveArgs),
    /// Run a canned experiment and write logs plus a summary table.
    Experiment(ExperimentArgs),
    /// Print 1D eigenvalues as CSV.
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProblemKind {
    P1,
    P2,
    P3,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum CenterMode {
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SourceArg {
    Numeric,
    Analytic,
}

impl From<SourceArg> for SpectrumSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Numeric => SpectrumSource::Numeric,
            SourceArg::Analytic => SpectrumSource::Analytic,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExperimentName {
    Exp1,
    Exp2,
    Exp3,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemKind,
    /// Grid size for p1, e.g. 50x100.
    #[arg(long)]
    pub size: Option<String>,
    /// Stripe period for p1; defaults to the second extent.
    #[arg(long)]
    pub period: Option<usize>,
    /// p3 variant: 2d_512x256, 3d_128x64x8, 3d_128x64x64 or 3d_512x256x8.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Problem description written by `gen` (supplies BCs and face values).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// `x=periodic,y=neumann` or a single name for every direction.
    #[arg(long)]
    pub bc: Option<String>,
    /// none | identity | pinv | jacobi:p=3,omega=1.3 | lowrank:r=3
    #[arg(long, default_value = "none")]
    pub precond: String,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Relative true-residual stopping level.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = CenterMode::Auto)]
    pub center: CenterMode,
    #[arg(long, value_enum, default_value_t = SourceArg::Numeric)]
    pub spectrum: SourceArg,
    /// Potential on the first face, e.g. `x=0`.
    #[arg(long = "uB")]
    pub u_begin: Vec<String>,
    /// Potential on the last face.
    #[arg(long = "uE")]
    pub u_end: Vec<String>,
    /// Field on the first face.
    #[arg(long = "eB", allow_hyphen_values = true)]
    pub e_begin: Vec<String>,
    /// Field on the last face, e.g. `x=-0.5`.
    #[arg(long = "eE", allow_hyphen_values = true)]
    pub e_end: Vec<String>,
    /// JSON run log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Gnuplot data file.
    #[arg(long)]
    pub dat: Option<PathBuf>,
    /// Solution tensor file.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SourceArg::Numeric)]
    pub spectrum: SourceArg,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub bc: String,
    #[arg(long, value_enum, default_value_t = SourceArg::Analytic)]
    pub source: SourceArg,
    /// Also print the extreme eigenvalues of the Kronecker sum.
    #[arg(long)]
    pub extrema: bool,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::Spectrum(a) => cmd_spectrum(&a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    tensor_file::write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    tensor_file::write_atomic(path, text.as_bytes())
}

fn dims_label(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

pub fn cmd_gen(a: &GenArgs) -> CliResult<()> {
    let (spec, h) = match a.problem {
        ProblemKind::P1 => {
            let dims = parse_size(a.size.as_deref().unwrap_or("50x100"))?;
            let [n, q] = dims[..] else {
                return Err(usage("p1 is two-dimensional"));
            };
            gen_problem1(n, q, a.period.unwrap_or(q))?
        }
        ProblemKind::P2 => {
            if a.size.is_some() {
                return Err(usage("p2 has a fixed size"));
            }
            let (spec, h, _) = gen_problem2()?;
            (spec, h)
        }
        ProblemKind::P3 => {
            let variant: Problem3Variant = a
                .variant
                .as_deref()
                .unwrap_or("2d_512x256")
                .parse()
                .map_err(|e: Error| usage(e.to_string()))?;
            gen_problem3(variant, a.seed)?
        }
    };
    tensor_file::write(&a.out, &h)?;
    write_json(&sidecar(&a.out), &spec)?;
    println!(
        "wrote {} ({} {}, ||H|| = {:e})",
        a.out.display(),
        spec.name,
        dims_label(spec.shape.dims()),
        frobenius_norm(&h)
    );
    Ok(())
}

fn load_spec(path: &Path) -> CliResult<ProblemSpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn cmd_solve(a: &SolveArgs) -> CliResult<()> {
    let h = tensor_file::read(&a.input)?;
    let shape = h.shape();
    let ndim = shape.ndim();
    let spec = a.spec.as_deref().map(load_spec).transpose()?;
    if let Some(s) = &spec {
        if s.shape != shape {
            return Err(usage(format!(
                "spec shape {} does not match tensor shape {}",
                dims_label(s.shape.dims()),
                dims_label(shape.dims())
            )));
        }
    }
    let bcs = match (&a.bc, &spec) {
        (Some(b), _) => parse_bcs(b, ndim)?,
        (None, Some(s)) => s.bcs.clone(),
        (None, None) => return Err(usage("--bc or --spec is required")),
    };
    let mut bd = boundary_data(ndim, &a.u_begin, &a.u_end, &a.e_begin, &a.e_end)?;
    if bd.is_empty() {
        if let Some(s) = &spec {
            bd = s.boundary.clone();
        }
    }
    let op = PoissonOperator::from_bcs(
        &shape
            .dims()
            .iter()
            .copied()
            .zip(bcs.iter().copied())
            .collect::<Vec<_>>(),
    )?;
    let mut rhs = if bd.is_empty() {
        h
    } else {
        kronpcg::apply_bc_updates(&h, &bcs, &bd)?
    };

    let mut notes = Vec::new();
    if op.is_singular() {
        let comp = nullspace_component(&rhs);
        if comp > CENTERING_TOLERANCE * frobenius_norm(&rhs) {
            if matches!(a.center, CenterMode::Off) {
                return Err(usage(format!(
                    "operator is singular and the right-hand side has a constant component of {comp:e}; \
                     rerun with --center auto or on"
                )));
            }
            rhs = center(&rhs);
            notes.push(format!(
                "right-hand side centered (removed component {comp:e})"
            ));
        }
    }

    let pc: PrecondConfig = a.precond.parse().map_err(|e: Error| usage(e.to_string()))?;
    let source = a.spectrum.into();
    let m = Preconditioner::build(&op, &pc, source)?;
    let mut cfg = SolverConfig::new(a.max_iter);
    cfg.stop_tol = a.tol;
    cfg.center_each_iter = match a.center {
        CenterMode::Auto => None,
        CenterMode::On => Some(true),
        CenterMode::Off => Some(false),
    };
    cfg.validate()?;

    let problem = spec.as_ref().map_or_else(
        || {
            a.input
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        },
        |s| s.name.clone(),
    );
    let meta = RunMeta {
        problem: &problem,
        bcs: &bcs,
        preconditioner: pc.to_string(),
        seed: spec.as_ref().and_then(|s| s.seed),
        config: RunConfig {
            method: Method::Pcg,
            max_iter: a.max_iter,
            center: cfg.center_each_iter.unwrap_or(op.is_singular()),
            stop_tol: a.tol,
            spectrum: source,
        },
    };

    let u0 = DenseTensor::zeros(shape);
    let (u, log, failure) = match pcg(&op, &rhs, &m, &u0, &cfg) {
        Ok((u, log)) => (u, log, None),
        Err(Error::Breakdown(b)) => {
            let msg = b.to_string();
            (b.solution, b.log, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };
    let mut file = RunLogFile::from_pcg(meta, &log, &rhs, &u, failure.clone());
    file.notes = notes;
    emit_outputs(a, &file, &u)?;

    for w in &file.warnings {
        eprintln!("warning: {}", serde_json::to_string(w)?);
    }
    if let Some(msg) = failure {
        return Err(CliError::Breakdown(msg));
    }
    println!("preconditioner: {}", file.preconditioner);
    println!("iterations: {}", file.iterations.len());
    if let (Some(t), Some(r)) = (
        file.final_norms.true_res,
        file.final_norms.relative_true_res,
    ) {
        println!("final true residual: {t:e} (relative {r:e})");
    }
    println!("operations: {}", file.ops_total());
    Ok(())
}

fn emit_outputs(a: &SolveArgs, file: &RunLogFile, u: &DenseTensor) -> CliResult<()> {
    if let Some(p) = &a.log {
        write_json(p, file)?;
    }
    if let Some(p) = &a.dat {
        write_text(p, &file.gnuplot())?;
    }
    if let Some(p) = &a.solution {
        tensor_file::write(p, u)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    problem: String,
    preconditioner: String,
    #[serde(rename = "iters_to_1e-9")]
    iters_to_1e_9: Option<usize>,
    final_true_res: Option<f64>,
    ops_cum: u64,
}

const SUMMARY_LEVEL: f64 = 1e-9;

struct Recorder {
    dir: PathBuf,
    rows: Vec<SummaryRow>,
}

impl Recorder {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Recorder {
            dir: dir.to_path_buf(),
            rows: Vec::new(),
        })
    }

    fn record(&mut self, log: &RunLogFile) -> CliResult<()> {
        log.validate()
            .map_err(|e| usage(format!("invalid run log: {e}")))?;
        let stem: String = format!("{}__{}", log.problem, log.preconditioner)
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        write_json(&self.dir.join(format!("{stem}.json")), log)?;
        write_text(&self.dir.join(format!("{stem}.dat")), &log.gnuplot())?;
        println!(
            "{:<28} {:<26} iters_to_1e-9={:<6} final={:e}",
            log.problem,
            log.preconditioner,
            log.iterations_to(SUMMARY_LEVEL)
                .map_or_else(|| "-".to_string(), |k| k.to_string()),
            log.final_norms.true_res.unwrap_or(f64::NAN)
        );
        self.rows.push(SummaryRow {
            problem: log.problem.clone(),
            preconditioner: log.preconditioner.clone(),
            iters_to_1e_9: log.iterations_to(SUMMARY_LEVEL),
            final_true_res: log.final_norms.true_res,
            ops_cum: log.ops_total(),
        });
        Ok(())
    }

    fn finish(self) -> CliResult<()> {
        let path = self.dir.join("summary.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::io(&path, e.into_error()))?;
        tensor_file::write_atomic(&path, &bytes)
    }
}

fn pcg_run(
    spec: &ProblemSpec,
    h: &DenseTensor,
    pc: &PrecondConfig,
    max_iter: usize,
    source: SpectrumSource,
) -> CliResult<RunLogFile> {
    let op = spec.operator()?;
    let rhs = spec.rhs(h)?;
    let m = Preconditioner::build(&op, pc, source)?;
    let cfg = SolverConfig::new(max_iter);
    let (u, log, failure) = match pcg(&op, &rhs, &m, &DenseTensor::zeros(op.shape()), &cfg) {
        Ok((u, log)) => (u, log, None),
        Err(Error::Breakdown(b)) => {
            let msg = b.to_string();
            (b.solution, b.log, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };
    let meta = RunMeta {
        problem: &spec.name,
        bcs: &spec.bcs,
        preconditioner: pc.to_string(),
        seed: spec.seed,
        config: RunConfig {
            method: Method::Pcg,
            max_iter,
            center: op.is_singular(),
            stop_tol: None,
            spectrum: source,
        },
    };
    Ok(RunLogFile::from_pcg(meta, &log, &rhs, &u, failure))
}

pub fn cmd_experiment(a: &ExperimentArgs) -> CliResult<()> {
    let source: SpectrumSource = a.spectrum.into();
    let mut rec = Recorder::new(&a.out)?;
    match a.name {
        ExperimentName::Exp1 => exp1(&mut rec, source)?,
        ExperimentName::Exp2 => exp2(&mut rec, source)?,
        ExperimentName::Exp3 => {
            for (spec, h) in all_problems(a.seed)? {
                rec.record(&pcg_run(&spec, &h, &PrecondConfig::Pinv, 10, source)?)?;
            }
        }
    }
    rec.finish()?;
    println!("wrote {}", a.out.join("summary.csv").display());
    Ok(())
}

const EXP1_CG_ITER: usize = 500;
const EXP1_JACOBI_ITER: usize = 8000;
const EXP1_OMEGAS: [f64; 3] = [1.0, 1.15, 1.3];

fn exp1(rec: &mut Recorder, source: SpectrumSource) -> CliResult<()> {
    let (spec, h) = gen_problem1(50, 100, 100)?;
    let op = spec.operator()?;
    let cg = pcg_run(&spec, &h, &PrecondConfig::Identity, EXP1_CG_ITER, source)?;
    let floor = std::iter::once(&cg.initial)
        .chain(&cg.iterations)
        .filter_map(|e| e.true_res)
        .fold(f64::INFINITY, f64::min)
        / cg.final_norms.rhs;
    rec.record(&cg)?;

    let mut gap = csv::Writer::from_writer(Vec::new());
    gap.write_record(["method", "level", "iterations"])?;
    let levels = [SUMMARY_LEVEL, 10.0 * floor];
    for &level in &levels {
        gap.write_record([
            "cg".to_string(),
            format!("{level:e}"),
            opt(cg.iterations_to(level)),
        ])?;
    }
    for omega in EXP1_OMEGAS {
        let cfg = StationaryConfig {
            omega,
            max_iter: EXP1_JACOBI_ITER,
            stop_residual: None,
        };
        let run = jacobi_standalone(&op, &h, &cfg, None)?;
        let meta = RunMeta {
            problem: &spec.name,
            bcs: &spec.bcs,
            preconditioner: format!("jacobi-standalone:omega={omega}"),
            seed: None,
            config: RunConfig {
                method: Method::Jacobi,
                max_iter: EXP1_JACOBI_ITER,
                center: false,
                stop_tol: None,
                spectrum: source,
            },
        };
        let log = RunLogFile::from_jacobi(meta, &run, &h);
        for &level in &levels {
            gap.write_record([
                log.preconditioner.clone(),
                format!("{level:e}"),
                opt(log.iterations_to(level)),
            ])?;
        }
        rec.record(&log)?;
    }
    let path = rec.dir.join("gap.csv");
    let bytes = gap
        .into_inner()
        .map_err(|e| CliError::io(&path, e.into_error()))?;
    tensor_file::write_atomic(&path, &bytes)?;
    println!("CG floor (relative): {floor:e}");
    Ok(())
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(String::new, |k| k.to_string())
}

const EXP2_ITER: usize = 300;

fn exp2(rec: &mut Recorder, source: SpectrumSource) -> CliResult<()> {
    let (spec, h, _) = gen_problem2()?;
    let mut configs: Vec<PrecondConfig> = ["none", "jacobi:p=3,omega=1.3", "lowrank:r=3", "pinv"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, Error>>()?;
    for p in 1..=4 {
        for omega in EXP1_OMEGAS {
            configs.push(PrecondConfig::Jacobi { p, omega });
        }
    }
    for rank in 1..=5 {
        configs.push(PrecondConfig::LowRank { rank });
    }
    let mut seen = Vec::new();
    for pc in configs {
        if seen.contains(&pc) {
            continue;
        }
        rec.record(&pcg_run(&spec, &h, &pc, EXP2_ITER, source)?)?;
        seen.push(pc);
    }
    Ok(())
}

pub fn cmd_spectrum(a: &SpectrumArgs) -> CliResult<()> {
    let bcs: Vec<BoundaryCondition> = parse_bcs(&a.bc, a.n.len())?;
    let source: SpectrumSource = a.source.into();
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(["axis", "index", "eigenvalue"])?;
    let (mut lo, mut hi) = (0.0, 0.0);
    for (axis, (&n, &bc)) in a.n.iter().zip(&bcs).enumerate() {
        let sd = Laplacian1D::new(n, bc)?.spectrum(source)?;
        for (k, v) in sd.eigenvalues.iter().enumerate() {
            w.write_record([axis.to_string(), k.to_string(), v.to_string()])?;
        }
        lo += sd.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        hi += sd
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
    }
    if a.extrema {
        w.write_record(["sum", "min", &lo.to_string()])?;
        w.write_record(["sum", "max", &hi.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io("<stdout>", e))
}
