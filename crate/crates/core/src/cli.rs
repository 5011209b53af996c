//! Command-line front end.

use crate::analysis::classify::{classify, closure_bound, ClassifyConfig, ClassifyError, SCHEMA_VERSION};
use crate::analysis::cone::{tangent_cone, tangent_cone_stratum, ConeConfig, ConeError, ConeMode, ConeResult, DEFAULT_TOL_CONE};
use crate::analysis::system::{build_cspace_system, build_stratum_system, PolySystem, SystemError};
use crate::linkage::{load_linkage_with, numeric_rank, Linkage, LinkageError, DEFAULT_RANK_TOL};
use crate::solver::{
    closest_branch_pair, limiting_tangents, local_dimension, sweep_section, DimensionEstimate, DimensionStatus, RadiusSummary,
    RayTangent, SamplingConfig, SectionSpec, SolverError,
};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Rank,
    Cone,
    ConeStratum,
    Cspace,
    Stratum,
    Classify,
    Section,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Debug, Parser)]
#[command(name = "locmob", version, about = "Local mobility and singularity analysis of multi-loop linkages")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Linkage description (JSON).
    pub linkage: PathBuf,
    /// Expansion order ν (cone commands: highest cone order).
    #[arg(long)]
    pub order: Option<usize>,
    /// Minor size for the stratum commands.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub tol_rank: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_CONE)]
    pub tol_cone: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Section axes, e.g. `x1,x5`.
    #[arg(long, default_value = "x1,x2")]
    pub section: String,
    /// Sweep range `start:end:steps`.
    #[arg(long, default_value = "-0.3:0.3:200", allow_hyphen_values = true)]
    pub range: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Base configuration as comma-separated joint values (default all zero).
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<String>,
    /// Parameter override `NAME=VALUE`; repeatable.
    #[arg(long = "param")]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub command: Command,
    pub linkage: PathBuf,
    pub order: Option<usize>,
    pub k: Option<usize>,
    pub section: Option<SectionSpec>,
    pub out: PathBuf,
    pub seed: u64,
    pub tol_rank: f64,
    pub tol_cone: f64,
    pub mode: ConeMode,
    pub base: Option<Vec<f64>>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Linkage(#[from] LinkageError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn parse_axis(s: &str) -> Result<usize, CliError> {
    s.trim()
        .strip_prefix('x')
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&i| i >= 1)
        .map(|i| i - 1)
        .ok_or_else(|| CliError::Usage(format!("bad section axis `{s}` (expected x<index>)")))
}

pub fn parse_section(axes: &str, range: &str) -> Result<SectionSpec, CliError> {
    let (a, o) = axes.split_once(',').ok_or_else(|| CliError::Usage(format!("bad --section `{axes}` (expected xI,xJ)")))?;
    let parts: Vec<&str> = range.split(':').collect();
    let bad = || CliError::Usage(format!("bad --range `{range}` (expected start:end:steps)"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(SectionSpec::new(parse_axis(a)?, parse_axis(o)?, start, end, steps))
}

impl RunRequest {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let mut params = BTreeMap::new();
        for p in &cli.params {
            let (k, v) = p.split_once('=').ok_or_else(|| CliError::Usage(format!("bad --param `{p}` (expected NAME=VALUE)")))?;
            let v: f64 = v.trim().parse().map_err(|_| CliError::Usage(format!("bad value in --param `{p}`")))?;
            params.insert(k.trim().to_string(), v);
        }
        let base = cli
            .at
            .as_deref()
            .map(|s| s.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>())
            .transpose()
            .map_err(|_| CliError::Usage("bad --at list".into()))?;
        let section = if cli.command == Command::Section { Some(parse_section(&cli.section, &cli.range)?) } else { None };
        if matches!(cli.command, Command::Stratum | Command::ConeStratum) && cli.k.is_none() {
            return Err(CliError::Usage(format!("{:?} requires --k", cli.command).to_lowercase()));
        }
        if !(cli.tol_rank > 0.0 && cli.tol_cone > 0.0) {
            return Err(CliError::Usage("tolerances must be positive".into()));
        }
        Ok(Self {
            command: cli.command,
            linkage: cli.linkage.clone(),
            order: cli.order,
            k: cli.k,
            section,
            out: cli.out.clone(),
            seed: cli.seed,
            tol_rank: cli.tol_rank,
            tol_cone: cli.tol_cone,
            mode: match cli.mode {
                ModeArg::Exact => ConeMode::Exact,
                ModeArg::Sampled => ConeMode::Sampled,
            },
            base,
            params,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub differential_dof: usize,
    pub singular_values: Vec<f64>,
    pub kernel: Vec<Vec<f64>>,
    pub closure_bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dimension: Option<usize>,
    pub status: DimensionStatus,
    pub consistent: bool,
    pub radii: Vec<RadiusSummary>,
}

impl From<&DimensionEstimate> for DimensionReport {
    fn from(e: &DimensionEstimate) -> Self {
        Self { dimension: e.dimension, status: e.status, consistent: e.consistent, radii: e.radii.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub order: usize,
    pub k: Option<usize>,
    pub variables: usize,
    pub equations: usize,
    pub local_dimension: DimensionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionReport {
    pub order: usize,
    pub spec: SectionSpec,
    pub points: usize,
    pub branches: usize,
    pub tangents: Vec<RayTangent>,
    pub closest_angle_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Payload {
    Rank(RankReport),
    Cone(ConeResult),
    System(SystemReport),
    Section(SectionReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: Command,
    pub linkage: String,
    pub result: Payload,
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serialises") + "\n"
}

fn cone_text(c: &ConeResult) -> String {
    let mut s = format!("mode: {:?}\nkernel dimension: {}\norder: {}\nstabilized: {}\n", c.mode, c.kernel_dimension, c.order, c.stabilized);
    if let Some(k) = c.stratum {
        s += &format!("stratum k: {k}\n");
    }
    if let Some(m) = c.min_residual {
        s += &format!("minimum sampled residual: {m:e}\n");
    }
    if c.is_zero() {
        s += "cone: {0}\n";
    }
    for (i, b) in c.branches.iter().enumerate() {
        s += &format!("branch {} (dim {}):", i + 1, b.dimension);
        for v in &b.basis {
            s += &format!(" [{}]", v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", "));
        }
        s += "\n";
    }
    s
}

fn system_text(sys: &PolySystem, dim: &DimensionEstimate) -> String {
    format!(
        "kind: {:?}\norder: {}\nvariables: {}\nequations: {}\nlocal dimension: {} ({:?}, consistent across radii: {})\n",
        sys.kind,
        sys.order,
        sys.nvars,
        sys.len(),
        dim.dimension.map(|d| d.to_string()).unwrap_or_else(|| "undetermined".into()),
        dim.status,
        dim.consistent
    )
}

/// Runs one request, writing artifacts into `req.out`; returns the exit status.
pub fn run(req: &RunRequest) -> Result<i32, CliError> {
    let lk: Linkage = load_linkage_with(&req.linkage, &req.params)?;
    let q0 = req.base.clone().unwrap_or_else(|| lk.zero_configuration());
    if q0.len() != lk.n() {
        return Err(CliError::Usage(format!("--at has {} values, linkage has {} joints", q0.len(), lk.n())));
    }
    fs::create_dir_all(&req.out).map_err(|source| CliError::Io { path: req.out.display().to_string(), source })?;
    let sampling = SamplingConfig { seed: req.seed, newton: crate::solver::NewtonConfig { rank_tol: req.tol_rank, ..SamplingConfig::default().newton }, ..SamplingConfig::default() };
    let cone_cfg = ConeConfig { tol_rank: req.tol_rank, tol_cone: req.tol_cone, seed: req.seed, max_order: req.order.unwrap_or(ConeConfig::default().max_order), ..ConeConfig::default() };
    let envelope = |result: Payload| Report { schema_version: SCHEMA_VERSION, command: req.command, linkage: lk.name.clone(), result };
    let mut status = EXIT_OK;
    let (text, report) = match req.command {
        Command::Rank => {
            let info = numeric_rank(&lk.stacked_jacobian(&q0), req.tol_rank);
            let r = RankReport {
                rank: info.rank,
                differential_dof: lk.n() - info.rank,
                singular_values: info.singular_values.clone(),
                kernel: (0..info.kernel.ncols()).map(|j| info.kernel.column(j).iter().copied().collect()).collect(),
                closure_bound: closure_bound(&lk, &q0),
            };
            let text = format!("rank: {}\ndifferential DOF: {}\nkernel dimension: {}\ninvolutive-closure bound: {}\n", r.rank, r.differential_dof, r.kernel.len(), r.closure_bound);
            (text, json(&envelope(Payload::Rank(r))))
        }
        Command::Cone | Command::ConeStratum => {
            let c = match req.command {
                Command::Cone => tangent_cone(&lk, &q0, &cone_cfg, req.mode)?,
                _ => tangent_cone_stratum(&lk, &q0, req.k.expect("checked"), &cone_cfg, req.mode)?,
            };
            if !c.stabilized {
                status = EXIT_INCONCLUSIVE;
            }
            (cone_text(&c), json(&envelope(Payload::Cone(c))))
        }
        Command::Cspace | Command::Stratum => {
            let order = req.order.unwrap_or(2);
            let sys = match req.command {
                Command::Cspace => build_cspace_system(&lk, &q0, order)?,
                _ => build_stratum_system(&lk, &q0, req.k.expect("checked"), order)?,
            };
            write(&req.out, "system.poly", &sys.dump())?;
            let dim = local_dimension(&sys, 0.05, 200, &sampling);
            if dim.status == DimensionStatus::Inconclusive {
                status = EXIT_INCONCLUSIVE;
            }
            let r = SystemReport { order, k: req.k.filter(|_| req.command == Command::Stratum), variables: sys.nvars, equations: sys.len(), local_dimension: (&dim).into() };
            (system_text(&sys, &dim), json(&envelope(Payload::System(r))))
        }
        Command::Section => {
            let order = req.order.unwrap_or(2);
            let spec = req.section.clone().expect("parsed for section");
            let sys = build_cspace_system(&lk, &q0, order)?;
            let cloud = sweep_section(&sys, &spec, req.seed, &sampling)?;
            write(&req.out, "section.csv", &cloud.to_csv())?;
            let tangents = match limiting_tangents(&cloud) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{e}");
                    status = EXIT_INCONCLUSIVE;
                    Vec::new()
                }
            };
            let closest = closest_branch_pair(&tangents).map(|c| c.0);
            let mut ids: Vec<usize> = tangents.iter().map(|t| t.branch).collect();
            ids.dedup();
            let r = SectionReport { order, spec, points: cloud.points.len(), branches: ids.len(), tangents, closest_angle_deg: closest };
            let mut text = format!("points: {}\nbranches through the origin: {}\n", r.points, r.branches);
            if let Some(a) = closest {
                text += &format!("closest limiting tangents: {a:.3} deg\n");
            }
            (text, json(&envelope(Payload::Section(r))))
        }
        Command::Classify => {
            let cfg = ClassifyConfig { order: req.order.unwrap_or(2), cone: ConeConfig { max_order: ConeConfig::default().max_order, ..cone_cfg }, sampling, ..ClassifyConfig::default() };
            let r = classify(&lk, &q0, &cfg)?;
            if !r.is_decided() {
                status = EXIT_INCONCLUSIVE;
            }
            (r.to_text(), json(&r))
        }
    };
    write(&req.out, "report.txt", &text)?;
    write(&req.out, "report.json", &report)?;
    print!("{text}");
    Ok(status)
}

/// Parses arguments, runs, and maps failures to exit codes with diagnostics on standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = RunRequest::from_cli(&cli).and_then(|req| run(&req));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Io { .. } => 1,
                CliError::Cone(ConeError::Unsupported { .. } | ConeError::TooManyParameters { .. }) => EXIT_INCONCLUSIVE,
                _ => EXIT_INVALID,
            }
        }
    }
}
