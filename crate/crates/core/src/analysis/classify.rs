//! Singularity classification of a configuration from rank, cone, local dimension and stratum data.

use super::cone::{tangent_cone, ConeConfig, ConeError, ConeMode, ConeResult};
use super::system::{build_cspace_system, build_stratum_system, SystemError};
use crate::differentials::ADMISSIBLE_TOL;
use crate::linkage::{numeric_rank, Linkage};
use crate::screw::{involutive_closure, CLOSURE_TOL};
use crate::solver::{
    closest_branch_pair, limiting_tangents, local_dimension, sweep_section, DimensionStatus, RayTangent, SamplingConfig,
    SectionSpec, TANGENT_RADIUS,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
/// Two rays on different branches closer than this are read as a cusp.
pub const CUSP_ANGLE_DEG: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("base point is not admissible: closure residual {0:e}")]
    NotAdmissible(f64),
    #[error("order must be at least 1")]
    Order,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Cone(#[from] ConeError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub order: usize,
    pub cone: ConeConfig,
    pub sampling: SamplingConfig,
    pub radius: f64,
    pub samples: usize,
    pub section: Option<SectionSpec>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { order: 2, cone: ConeConfig::default(), sampling: SamplingConfig::default(), radius: 0.05, samples: 200, section: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderDimension {
    pub order: usize,
    pub dimension: Option<usize>,
    pub status: DimensionStatus,
    pub consistent: bool,
    pub convergence_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub k: usize,
    pub order: usize,
    pub dimension: Option<usize>,
    pub status: Option<DimensionStatus>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub abscissa: usize,
    pub ordinate: usize,
    /// Branches with at least three points inside the tangent-fit radius.
    pub count: usize,
    pub tangents: Vec<RayTangent>,
    pub closest_angle_deg: Option<f64>,
    pub one_sided: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Flags {
    pub constraint: bool,
    pub kinematic: bool,
    pub cspace: bool,
    pub cusp: bool,
    pub bifurcation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagnosis {
    Regular,
    Bifurcation,
    Cusp,
    Singular,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "state")]
pub enum Status {
    Decided,
    Undecided { order: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub schema_version: u32,
    pub linkage: String,
    pub base_point: Vec<f64>,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub differential_dof: usize,
    pub local_dof: Option<usize>,
    pub local_dof_order: usize,
    pub dimensions: Vec<OrderDimension>,
    pub dimension_stabilized: bool,
    pub closure_bound: usize,
    pub max_rank_estimate: usize,
    pub cone: ConeResult,
    pub stratum: StratumReport,
    pub branches: Option<BranchReport>,
    pub flags: Flags,
    pub implied: Vec<String>,
    pub diagnosis: Diagnosis,
    pub status: Status,
    pub notes: Vec<String>,
    pub tol_rank: f64,
    pub tol_cone: f64,
}

impl ClassificationReport {
    pub fn is_decided(&self) -> bool {
        self.status == Status::Decided
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let yn = |b: bool| if b { "yes" } else { "no" };
        let _ = writeln!(s, "linkage: {}", self.linkage);
        let _ = writeln!(s, "rank J(q0): {}", self.rank);
        let _ = writeln!(s, "differential DOF: {}", self.differential_dof);
        match self.local_dof {
            Some(d) => {
                let _ = writeln!(s, "local DOF: {d} (dim V^{}{})", self.local_dof_order, if self.dimension_stabilized { "" } else { ", single order" });
            }
            None => {
                let _ = writeln!(s, "local DOF: undetermined");
            }
        }
        let _ = writeln!(s, "involutive-closure bound: {}", self.closure_bound);
        let _ = writeln!(s, "maximal rank estimate: {}", self.max_rank_estimate);
        if self.cone.is_zero() {
            let _ = writeln!(s, "tangent cone: {{0}} at order {}", self.cone.order);
        } else {
            let _ = writeln!(s, "tangent cone: {} branch(es) of dimension {:?} at order {}", self.cone.branches.len(), self.cone.branch_dimensions(), self.cone.order);
        }
        match &self.stratum.skipped {
            Some(why) => {
                let _ = writeln!(s, "stratum L_{}: skipped ({why})", self.stratum.k);
            }
            None => {
                let dim = self.stratum.dimension.map(|d| d.to_string()).unwrap_or_else(|| "undetermined".into());
                let _ = writeln!(s, "stratum L_{}^{}: local dimension {dim}", self.stratum.k, self.stratum.order);
            }
        }
        if let Some(b) = &self.branches {
            let _ = write!(s, "branches through q0: {}", b.count);
            if let Some(a) = b.closest_angle_deg {
                let _ = write!(s, ", closest limiting tangents {a:.3} deg");
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s, "constraint singularity: {}", yn(self.flags.constraint));
        let _ = writeln!(s, "kinematic singularity: {}", yn(self.flags.kinematic));
        let _ = writeln!(s, "c-space singularity: {}", yn(self.flags.cspace));
        let _ = writeln!(s, "cusp: {}", yn(self.flags.cusp));
        let _ = writeln!(s, "bifurcation: {}", yn(self.flags.bifurcation));
        for i in &self.implied {
            let _ = writeln!(s, "implied: {i}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "diagnosis: {:?}", self.diagnosis);
        match &self.status {
            Status::Decided => {
                let _ = writeln!(s, "status: decided");
            }
            Status::Undecided { order, reason } => {
                let _ = writeln!(s, "status: undecided at order {order} ({reason})");
            }
        }
        s
    }
}

/// `min(n, Σ_l dim closure(cycle screws))`.
pub fn closure_bound(lk: &Linkage, q0: &[f64]) -> usize {
    let total: usize = (0..lk.gamma())
        .map(|l| {
            let screws: Vec<_> = lk.cycle_screws(l, q0).into_iter().map(|(_, s)| s).collect();
            involutive_closure(&screws, CLOSURE_TOL).dimension
        })
        .sum();
    total.min(lk.n())
}

/// Joint with the largest kernel component (lowest index among near-ties), and the runner-up.
fn section_axes(kernel: &nalgebra::DMatrix<f64>) -> (usize, usize) {
    let weight: Vec<f64> = (0..kernel.nrows()).map(|i| kernel.row(i).norm()).collect();
    let top = weight.iter().copied().fold(0.0, f64::max);
    let pick = |skip: Option<usize>| {
        let best = weight.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(_, &w)| w).fold(0.0, f64::max);
        (0..weight.len()).find(|&i| Some(i) != skip && weight[i] >= best - 1e-9 * top).unwrap_or(0)
    };
    let first = pick(None);
    (first, pick(Some(first)))
}

pub fn classify(lk: &Linkage, q0: &[f64], cfg: &ClassifyConfig) -> Result<ClassificationReport, ClassifyError> {
    if cfg.order < 1 {
        return Err(ClassifyError::Order);
    }
    let residual = lk.closure_residual(q0);
    if residual > ADMISSIBLE_TOL {
        return Err(ClassifyError::NotAdmissible(residual));
    }
    let n = lk.n();
    let jac = lk.stacked_jacobian(q0);
    let info = numeric_rank(&jac, cfg.cone.tol_rank);
    let rank = info.rank;
    let mut notes = Vec::new();
    let mut undecided: Option<String> = None;

    let cone = match tangent_cone(lk, q0, &cfg.cone, ConeMode::Exact) {
        Ok(c) => c,
        Err(e @ (ConeError::Unsupported { .. } | ConeError::TooManyParameters { .. })) => {
            notes.push(format!("exact cone failed ({e}); sampled mode used"));
            tangent_cone(lk, q0, &cfg.cone, ConeMode::Sampled)?
        }
        Err(e) => return Err(e.into()),
    };
    if !cone.stabilized {
        undecided.get_or_insert(format!("tangent cone not stable by order {}", cfg.cone.max_order));
    }

    let nu = cfg.order;
    let lo = if nu >= 3 { nu - 1 } else { nu };
    let mut dimensions = Vec::new();
    let mut top_samples = Vec::new();
    let mut top_system = None;
    for order in lo..=nu {
        let sys = build_cspace_system(lk, q0, order)?;
        let est = local_dimension(&sys, cfg.radius, cfg.samples, &cfg.sampling);
        dimensions.push(OrderDimension {
            order,
            dimension: est.dimension,
            status: est.status,
            consistent: est.consistent,
            convergence_rate: est.radii[0].convergence_rate(),
        });
        if order == nu {
            top_samples = est.samples;
            top_system = Some(sys);
        }
    }
    let top = dimensions.last().expect("at least one order").clone();
    let dimension_stabilized = dimensions.len() >= 2 && dimensions.iter().all(|d| d.dimension == top.dimension);
    let local_dof = top.dimension;
    if top.status == DimensionStatus::Inconclusive {
        undecided.get_or_insert("local dimension inconclusive".into());
    } else if !top.consistent {
        notes.push(format!("dimension of V^{nu} differs across sampling radii"));
    }

    let mut max_rank = rank;
    for x in top_samples.iter().take(20) {
        let q: Vec<f64> = q0.iter().zip(x).map(|(a, b)| a + b).collect();
        if let Some(p) = lk.project_to_closure(&q, 50, 1e-12) {
            max_rank = max_rank.max(numeric_rank(&lk.stacked_jacobian(&p), cfg.cone.tol_rank).rank);
        }
    }
    let bound = closure_bound(lk, q0);

    let k = rank + 1;
    let kmax = (6 * lk.gamma()).min(n);
    let stratum = if k > kmax {
        StratumReport { k, order: nu, dimension: None, status: None, skipped: Some(format!("rank already equals min(6γ, n) = {kmax}")) }
    } else {
        let sys = build_stratum_system(lk, q0, k, nu)?;
        let est = local_dimension(&sys, cfg.radius, cfg.samples, &cfg.sampling);
        StratumReport { k, order: nu, dimension: est.dimension, status: Some(est.status), skipped: None }
    };

    let mut branches = None;
    if local_dof == Some(1) {
        if let Some(sys) = &top_system {
            let spec = cfg.section.clone().unwrap_or_else(|| {
                let (a, o) = section_axes(&info.kernel);
                SectionSpec::new(a, o, -0.3, 0.3, 200)
            });
            if let Ok(cloud) = sweep_section(sys, &spec, cfg.cone.seed, &cfg.sampling) {
                let tangents = limiting_tangents(&cloud).unwrap_or_default();
                let mut ids: Vec<usize> = tangents.iter().map(|t| t.branch).collect();
                ids.dedup();
                let near: Vec<f64> = cloud
                    .points
                    .iter()
                    .filter(|p| p.x.iter().map(|v| v * v).sum::<f64>().sqrt() < TANGENT_RADIUS)
                    .map(|p| p.x[spec.abscissa])
                    .collect();
                let one_sided = (!near.is_empty()).then(|| near.iter().all(|&a| a > 0.0) || near.iter().all(|&a| a < 0.0));
                branches = Some(BranchReport {
                    abscissa: spec.abscissa,
                    ordinate: spec.ordinate,
                    count: ids.len(),
                    closest_angle_deg: closest_branch_pair(&tangents).map(|c| c.0),
                    tangents,
                    one_sided,
                });
            }
        }
    }

    let dim_v = local_dof.unwrap_or(0);
    let branch_count = match &branches {
        Some(b) => b.count,
        None => cone.branches.len(),
    };
    let mut flags = Flags {
        constraint: rank < max_rank,
        kinematic: stratum.dimension.zip(local_dof).is_some_and(|(l, v)| l < v),
        cusp: cone.is_zero() && dim_v >= 1,
        ..Flags::default()
    };
    flags.cspace = local_dof.is_some() && (branch_count >= 2 || flags.cusp || cone.dimension() != dim_v);
    flags.bifurcation = flags.cspace && !flags.cusp && cone.branches.len() >= 2;
    if flags.cusp {
        if let Some(b) = &branches {
            if b.closest_angle_deg.is_some_and(|a| a < CUSP_ANGLE_DEG) {
                notes.push("two branches share a limiting tangent".into());
            }
        }
    }
    let mut implied = Vec::new();
    if flags.cspace && !flags.kinematic {
        flags.kinematic = true;
        implied.push("kinematic singularity implied by c-space singularity".into());
    }
    if flags.kinematic && !flags.constraint {
        flags.constraint = true;
        implied.push("constraint singularity implied by kinematic singularity".into());
    }
    if stratum.skipped.is_none() && stratum.dimension.is_none() && !flags.cspace {
        undecided.get_or_insert("rank-stratum dimension inconclusive".into());
    }

    let status = match undecided {
        Some(reason) => Status::Undecided { order: nu, reason },
        None => Status::Decided,
    };
    let diagnosis = if status != Status::Decided {
        Diagnosis::Undecided
    } else if flags.cusp {
        Diagnosis::Cusp
    } else if flags.bifurcation {
        Diagnosis::Bifurcation
    } else if flags.cspace || flags.kinematic || flags.constraint {
        Diagnosis::Singular
    } else {
        Diagnosis::Regular
    };
    Ok(ClassificationReport {
        schema_version: SCHEMA_VERSION,
        linkage: lk.name.clone(),
        base_point: q0.to_vec(),
        rank,
        singular_values: info.singular_values.clone(),
        differential_dof: n - rank,
        local_dof,
        local_dof_order: nu,
        dimensions,
        dimension_stabilized,
        closure_bound: bound,
        max_rank_estimate: max_rank.max(rank),
        cone: ConeResult { samples: Vec::new(), ..cone },
        stratum,
        branches,
        flags,
        implied,
        diagnosis,
        status,
        notes,
        tol_rank: cfg.cone.tol_rank,
        tol_cone: cfg.cone.tol_cone,
    })
}
