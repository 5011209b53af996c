//! Linkage description, loop constraint maps and first-order kinematics.

use crate::screw::{exp_twist, screws_to_matrix, Screw, Transform};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Helical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub id: usize,
    pub kind: JointKind,
    pub screw: Screw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleStep {
    pub joint: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalCycle {
    pub id: usize,
    pub steps: Vec<CycleStep>,
}

/// Joints plus signed fundamental cycles. Joint and cycle ids are 1-based; API indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Linkage {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub joints: Vec<Joint>,
    pub cycles: Vec<FundamentalCycle>,
}

pub type Configuration = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum LinkageError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed linkage file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid linkage:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Diagnostic>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinkage {
    name: String,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
    joints: Vec<RawJoint>,
    cycles: Vec<RawCycle>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    id: usize,
    kind: JointKind,
    screw: Vec<RawScalar>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawScalar {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCycle {
    id: usize,
    steps: Vec<RawStep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    joint: usize,
    sign: i64,
}

pub fn load_linkage(path: impl AsRef<Path>) -> Result<Linkage, LinkageError> {
    load_linkage_with(path, &BTreeMap::new())
}

/// Loads a linkage file, overriding declared parameters.
pub fn load_linkage_with(
    path: impl AsRef<Path>,
    overrides: &BTreeMap<String, f64>,
) -> Result<Linkage, LinkageError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| LinkageError::Io { path: path.display().to_string(), source })?;
    Linkage::from_json_str(&text, overrides)
}

impl Linkage {
    pub fn from_json_str(text: &str, overrides: &BTreeMap<String, f64>) -> Result<Self, LinkageError> {
        let raw: RawLinkage = serde_json::from_str(text)?;
        let mut diags = Vec::new();
        let mut params = raw.parameters.clone();
        for (k, v) in overrides {
            if !params.contains_key(k) {
                diags.push(Diagnostic { field: format!("parameters.{k}"), message: "override of undeclared parameter".into() });
            }
            params.insert(k.clone(), *v);
        }
        for (k, v) in &params {
            if !v.is_finite() {
                diags.push(Diagnostic { field: format!("parameters.{k}"), message: "not finite".into() });
            }
        }

        let mut joints = Vec::new();
        for (i, j) in raw.joints.iter().enumerate() {
            let field = format!("joints[{i}]");
            if j.screw.len() != 6 {
                diags.push(Diagnostic { field: format!("{field}.screw"), message: format!("expected 6 entries, found {}", j.screw.len()) });
                continue;
            }
            let mut vals = [0.0; 6];
            let mut ok = true;
            for (c, entry) in j.screw.iter().enumerate() {
                let r = match entry {
                    RawScalar::Number(x) => Ok(*x),
                    RawScalar::Expr(e) => eval_expr(e, &params),
                };
                match r {
                    Ok(x) if x.is_finite() => vals[c] = x,
                    Ok(_) => {
                        diags.push(Diagnostic { field: format!("{field}.screw[{c}]"), message: "not finite".into() });
                        ok = false;
                    }
                    Err(m) => {
                        diags.push(Diagnostic { field: format!("{field}.screw[{c}]"), message: m });
                        ok = false;
                    }
                }
            }
            if !ok {
                continue;
            }
            let screw = Screw::from_array(vals);
            let wn = screw.w.norm();
            match j.kind {
                JointKind::Revolute | JointKind::Helical if (wn - 1.0).abs() > UNIT_TOL => {
                    diags.push(Diagnostic { field: format!("{field}.screw"), message: format!("{:?} axis must be unit, |w| = {wn}", j.kind).to_lowercase() });
                }
                JointKind::Revolute if screw.w.dot(&screw.v).abs() > UNIT_TOL => {
                    diags.push(Diagnostic { field: format!("{field}.screw"), message: "revolute screw must have zero pitch (w·v = 0)".into() });
                }
                JointKind::Prismatic if wn != 0.0 || (screw.v.norm() - 1.0).abs() > UNIT_TOL => {
                    diags.push(Diagnostic { field: format!("{field}.screw"), message: format!("prismatic screw needs w = 0 and |v| = 1, got |w| = {wn}, |v| = {}", screw.v.norm()) });
                }
                _ => {}
            }
            joints.push(Joint { id: j.id, kind: j.kind, screw });
        }
        let n = raw.joints.len();
        let ids: Vec<usize> = raw.joints.iter().map(|j| j.id).collect();
        let mut seen = BTreeSet::new();
        for (i, &id) in ids.iter().enumerate() {
            if id < 1 || id > n {
                diags.push(Diagnostic { field: format!("joints[{i}].id"), message: format!("id {id} outside 1..={n}") });
            } else if !seen.insert(id) {
                diags.push(Diagnostic { field: format!("joints[{i}].id"), message: format!("duplicate id {id}") });
            }
        }
        if n == 0 {
            diags.push(Diagnostic { field: "joints".into(), message: "no joints".into() });
        }

        let mut cycles = Vec::new();
        let mut referenced = BTreeSet::new();
        let g = raw.cycles.len();
        if g == 0 {
            diags.push(Diagnostic { field: "cycles".into(), message: "no cycles".into() });
        }
        let mut cycle_ids = BTreeSet::new();
        for (ci, c) in raw.cycles.iter().enumerate() {
            let field = format!("cycles[{ci}]");
            if c.id < 1 || c.id > g {
                diags.push(Diagnostic { field: format!("{field}.id"), message: format!("id {} outside 1..={g}", c.id) });
            } else if !cycle_ids.insert(c.id) {
                diags.push(Diagnostic { field: format!("{field}.id"), message: format!("duplicate id {}", c.id) });
            }
            if c.steps.is_empty() {
                diags.push(Diagnostic { field: format!("{field}.steps"), message: "empty cycle".into() });
            }
            let mut in_cycle = BTreeSet::new();
            let mut steps = Vec::new();
            for (si, s) in c.steps.iter().enumerate() {
                let sf = format!("{field}.steps[{si}]");
                if !ids.contains(&s.joint) {
                    diags.push(Diagnostic { field: format!("{sf}.joint"), message: format!("unknown joint {}", s.joint) });
                }
                if !in_cycle.insert(s.joint) {
                    diags.push(Diagnostic { field: format!("{sf}.joint"), message: format!("joint {} repeats within the cycle", s.joint) });
                }
                if s.sign != 1 && s.sign != -1 {
                    diags.push(Diagnostic { field: format!("{sf}.sign"), message: format!("sign must be +1 or -1, got {}", s.sign) });
                }
                referenced.insert(s.joint);
                steps.push(CycleStep { joint: s.joint, sign: s.sign.signum() as i8 });
            }
            cycles.push(FundamentalCycle { id: c.id, steps });
        }
        for &id in &ids {
            if !referenced.contains(&id) {
                diags.push(Diagnostic { field: "joints".into(), message: format!("joint {id} is not referenced by any cycle") });
            }
        }
        if !diags.is_empty() {
            return Err(LinkageError::Validation(diags));
        }
        joints.sort_by_key(|j| j.id);
        cycles.sort_by_key(|c| c.id);
        Ok(Linkage { name: raw.name, parameters: params, joints, cycles })
    }

    pub fn n(&self) -> usize {
        self.joints.len()
    }

    pub fn gamma(&self) -> usize {
        self.cycles.len()
    }

    /// `(variable index, sign)` per step of cycle `l`.
    pub fn cycle_steps(&self, l: usize) -> Vec<(usize, f64)> {
        self.cycles[l].steps.iter().map(|s| (s.joint - 1, s.sign as f64)).collect()
    }

    pub fn cycle_map(&self, l: usize, q: &[f64]) -> Transform {
        self.cycle_steps(l).into_iter().fold(Transform::identity(), |g, (j, s)| {
            g * exp_twist(&self.joints[j].screw.scale(s), q[j])
        })
    }

    /// Largest distance of any cycle map from the identity.
    pub fn closure_residual(&self, q: &[f64]) -> f64 {
        (0..self.gamma()).map(|l| self.cycle_map(l, q).distance_to_identity()).fold(0.0, f64::max)
    }

    /// Signed instantaneous screws of cycle `l` in cycle order.
    pub fn cycle_screws(&self, l: usize, q: &[f64]) -> Vec<(usize, Screw)> {
        let mut g = Transform::identity();
        let mut out = Vec::new();
        for (j, s) in self.cycle_steps(l) {
            let y = self.joints[j].screw.scale(s);
            out.push((j, g.act(&y)));
            g = g * exp_twist(&y, q[j]);
        }
        out
    }

    /// One column per joint; joints outside cycle `l` give zero columns.
    pub fn instantaneous_screws(&self, l: usize, q: &[f64]) -> Vec<Screw> {
        let mut cols = vec![Screw::zero(); self.n()];
        for (j, s) in self.cycle_screws(l, q) {
            cols[j] = s;
        }
        cols
    }

    pub fn cycle_jacobian(&self, l: usize, q: &[f64]) -> DMatrix<f64> {
        screws_to_matrix(&self.instantaneous_screws(l, q))
    }

    pub fn stacked_jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut j = DMatrix::zeros(6 * self.gamma(), n);
        for l in 0..self.gamma() {
            j.view_mut((6 * l, 0), (6, n)).copy_from(&self.cycle_jacobian(l, q));
        }
        j
    }

    /// The same mechanism described in a world frame displaced by `g`.
    pub fn transformed(&self, g: &Transform) -> Linkage {
        let mut out = self.clone();
        for j in &mut out.joints {
            j.screw = g.act(&j.screw);
        }
        out
    }

    pub fn zero_configuration(&self) -> Configuration {
        vec![0.0; self.n()]
    }

    /// Stacked `(ω; p)` per cycle with `ω` the axial vector of the skew part of the cycle rotation.
    pub fn closure_error(&self, q: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(6 * self.gamma());
        for l in 0..self.gamma() {
            let g = self.cycle_map(l, q);
            let r = g.rotation;
            let w = [0.5 * (r[(2, 1)] - r[(1, 2)]), 0.5 * (r[(0, 2)] - r[(2, 0)]), 0.5 * (r[(1, 0)] - r[(0, 1)])];
            for k in 0..3 {
                out[6 * l + k] = w[k];
                out[6 * l + 3 + k] = g.translation[k];
            }
        }
        out
    }

    /// Gauss–Newton projection onto the closure variety with minimum-norm steps.
    pub fn project_to_closure(&self, q: &[f64], max_iter: usize, tol: f64) -> Option<Configuration> {
        let mut q = q.to_vec();
        for _ in 0..max_iter {
            let f = self.closure_error(&q);
            if f.norm() < tol && self.closure_residual(&q) < 10.0 * tol {
                return Some(q);
            }
            let svd = self.stacked_jacobian(&q).svd(true, true);
            let cut = DEFAULT_RANK_TOL * svd.singular_values.max();
            let step = svd.solve(&f, cut).ok()?;
            if !step.iter().all(|v| v.is_finite()) {
                return None;
            }
            for (qi, s) in q.iter_mut().zip(step.iter()) {
                *qi -= s;
            }
        }
        (self.closure_residual(&q) < 10.0 * tol).then_some(q)
    }
}

/// Rank with orthonormal kernel and cokernel bases.
#[derive(Debug, Clone)]
pub struct RankInfo {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub kernel: DMatrix<f64>,
    pub cokernel: DMatrix<f64>,
}

pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> RankInfo {
    let (rows, cols) = m.shape();
    let mut sv: Vec<f64> = if rows == 0 || cols == 0 {
        Vec::new()
    } else {
        m.singular_values().iter().copied().collect()
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let threshold = tol * smax;
    let rank = sv.iter().filter(|&&s| s > threshold && s > 0.0).count();
    let kernel = null_space(m, cols - rank);
    let cokernel = null_space(&m.transpose(), rows - rank);
    RankInfo { rank, singular_values: sv, kernel, cokernel }
}

fn null_space(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if dim == 0 {
        return DMatrix::zeros(cols, 0);
    }
    if rows == 0 || m.iter().all(|&x| x == 0.0) {
        return DMatrix::identity(cols, cols).columns(0, dim).into_owned();
    }
    let mut padded = DMatrix::zeros(rows.max(cols), cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let chosen: Vec<usize> = idx.into_iter().take(dim).collect();
    DMatrix::from_fn(cols, dim, |r, c| vt[(chosen[c], r)])
}

/// Evaluates arithmetic over numbers and named parameters: `+ - * /`, parentheses, unary minus.
pub fn eval_expr(src: &str, params: &BTreeMap<String, f64>) -> Result<f64, String> {
    let mut p = ExprParser { s: src.as_bytes(), i: 0, params };
    let v = p.sum()?;
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(format!("unexpected `{}` in expression `{src}`", &src[p.i..]));
    }
    Ok(v)
}

struct ExprParser<'a> {
    s: &'a [u8],
    i: usize,
    params: &'a BTreeMap<String, f64>,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn sum(&mut self) -> Result<f64, String> {
        let mut v = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let r = self.product()?;
            v = if c == b'+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let r = self.unary()?;
            v = if c == b'*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let v = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err("missing `)`".into());
                }
                self.i += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || matches!(self.s[self.i], b'.' | b'e' | b'E')) {
                    if matches!(self.s[self.i], b'e' | b'E') && matches!(self.s.get(self.i + 1), Some(b'-' | b'+')) {
                        self.i += 1;
                    }
                    self.i += 1;
                }
                let t = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                t.parse().map_err(|_| format!("bad number `{t}`"))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
                    self.i += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                self.params.get(name).copied().ok_or_else(|| format!("unknown parameter `{name}`"))
            }
            Some(c) => Err(format!("unexpected `{}`", c as char)),
            None => Err("unexpected end of expression".into()),
        }
    }
}
