//! Gauss–Newton projection, seeded sampling and one-parameter section sweeps.

use crate::analysis::system::{CompiledSystem, PolySystem};
use crate::linkage::{numeric_rank, DEFAULT_RANK_TOL};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

pub const DEFAULT_RADIUS_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iter: usize,
    pub step_tol: f64,
    pub residual_tol: f64,
    pub damping: f64,
    pub rank_tol: f64,
    /// Stop as soon as an iterate falls inside this ball around the base point.
    pub radius_floor: Option<f64>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { max_iter: 50, step_tol: 1e-12, residual_tol: 1e-10, damping: 1.0, rank_tol: DEFAULT_RANK_TOL, radius_floor: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NewtonStatus {
    Converged,
    /// Iterate entered the radius floor around the base point.
    BelowFloor,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub residual: f64,
    pub step: f64,
    pub iterations: usize,
    pub status: NewtonStatus,
}

impl NewtonReport {
    pub fn converged(&self) -> bool {
        self.status == NewtonStatus::Converged
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid section: {0}")]
    Section(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

/// Minimum-norm least-squares step `J⁺ F`.
pub fn min_norm_step(j: &DMatrix<f64>, f: &DVector<f64>, rank_tol: f64) -> DVector<f64> {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DVector::zeros(j.ncols());
    }
    svd.solve(f, rank_tol * smax).expect("both factors computed")
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn newton_project(sys: &PolySystem, x0: &[f64], cfg: &NewtonConfig) -> NewtonReport {
    newton_compiled(&sys.compile(), x0, cfg)
}

pub fn newton_compiled(sys: &CompiledSystem, x0: &[f64], cfg: &NewtonConfig) -> NewtonReport {
    let mut x = DVector::from_column_slice(x0);
    let mut f = sys.residual(x.as_slice());
    let mut step = f64::INFINITY;
    for it in 0..=cfg.max_iter {
        if let Some(floor) = cfg.radius_floor {
            if x.norm() < floor {
                return NewtonReport { x: x.as_slice().to_vec(), residual: f.norm(), step, iterations: it, status: NewtonStatus::BelowFloor };
            }
        }
        let j = sys.jacobian(x.as_slice());
        let dx = min_norm_step(&j, &f, cfg.rank_tol);
        step = dx.norm();
        if f.norm() < cfg.residual_tol && step < cfg.step_tol {
            return NewtonReport { x: x.as_slice().to_vec(), residual: f.norm(), step, iterations: it, status: NewtonStatus::Converged };
        }
        if it == cfg.max_iter || !step.is_finite() {
            break;
        }
        x -= dx * cfg.damping;
        f = sys.residual(x.as_slice());
    }
    NewtonReport { x: x.as_slice().to_vec(), residual: f.norm(), step, iterations: cfg.max_iter, status: NewtonStatus::Failed }
}

/// Orthonormal basis of the kernel of the system's linearization at the origin.
pub fn linear_kernel(sys: &CompiledSystem, rank_tol: f64) -> DMatrix<f64> {
    let j = sys.jacobian(&vec![0.0; sys.nvars]);
    if j.nrows() == 0 {
        return DMatrix::identity(sys.nvars, sys.nvars);
    }
    numeric_rank(&j, rank_tol).kernel
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random start of norm `radius` inside the kernel, plus isotropic noise of relative size `noise`.
pub fn kernel_start(kernel: &DMatrix<f64>, radius: f64, noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = kernel.nrows();
    let d = kernel.ncols();
    let mut v = if d == 0 {
        DVector::from_fn(n, |_, _| gaussian(rng))
    } else {
        let c = DVector::from_fn(d, |_, _| gaussian(rng));
        kernel * c
    };
    let nv = v.norm().max(f64::MIN_POSITIVE);
    v *= radius / nv;
    for i in 0..n {
        v[i] += noise * radius * gaussian(rng) / (n as f64).sqrt();
    }
    v.as_slice().to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSummary {
    pub radius: f64,
    pub attempts: usize,
    pub converged: usize,
    pub below_floor: usize,
    pub failed: usize,
    pub escaped: usize,
    /// `histogram[d]` counts regular samples of local dimension `d`.
    pub histogram: Vec<usize>,
    pub dimension: Option<usize>,
}

impl RadiusSummary {
    /// Fraction of starts for which Newton reached a point of the variety (regular or the base point).
    pub fn convergence_rate(&self) -> f64 {
        (self.converged + self.escaped + self.below_floor) as f64 / self.attempts.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionStatus {
    Determined,
    /// Every converged run ended at the base point.
    IsolatedPoint,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionEstimate {
    pub dimension: Option<usize>,
    pub status: DimensionStatus,
    pub consistent: bool,
    pub radii: Vec<RadiusSummary>,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub newton: NewtonConfig,
    pub seed: u64,
    pub noise: f64,
    /// Converged points farther than this multiple of the start radius are not local.
    pub escape_factor: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig { max_iter: 200, radius_floor: Some(DEFAULT_RADIUS_FLOOR), ..NewtonConfig::default() },
            seed: 0,
            noise: 0.1,
            escape_factor: 10.0,
        }
    }
}

/// Local dimension of the solution set near the origin from Newton-projected samples at `r, r/2, r/4`.
pub fn local_dimension(sys: &PolySystem, radius: f64, samples: usize, cfg: &SamplingConfig) -> DimensionEstimate {
    let compiled = sys.compile();
    let kernel = linear_kernel(&compiled, cfg.newton.rank_tol);
    let n = sys.nvars;
    let mut radii = Vec::new();
    let mut all_samples = Vec::new();
    for (ri, r) in [radius, radius / 2.0, radius / 4.0].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(ri as u64));
        let mut s = RadiusSummary { radius: r, attempts: samples, converged: 0, below_floor: 0, failed: 0, escaped: 0, histogram: vec![0; n + 1], dimension: None };
        for _ in 0..samples {
            let x0 = kernel_start(&kernel, r, cfg.noise, &mut rng);
            let rep = newton_compiled(&compiled, &x0, &cfg.newton);
            match rep.status {
                NewtonStatus::Converged if norm(&rep.x) > cfg.escape_factor * r => s.escaped += 1,
                NewtonStatus::Converged => {
                    s.converged += 1;
                    let j = compiled.jacobian(&rep.x);
                    let rank = if j.nrows() == 0 { 0 } else { numeric_rank(&j, cfg.newton.rank_tol).rank };
                    s.histogram[n - rank] += 1;
                    if ri == 0 {
                        all_samples.push(rep.x);
                    }
                }
                NewtonStatus::BelowFloor => s.below_floor += 1,
                NewtonStatus::Failed => s.failed += 1,
            }
        }
        let min_count = samples.div_ceil(10);
        if s.converged > 0 && s.converged + s.below_floor >= min_count {
            s.dimension = s.histogram.iter().enumerate().max_by_key(|&(d, &c)| (c, std::cmp::Reverse(d))).map(|(d, _)| d);
        } else if s.converged == 0 && s.below_floor >= min_count {
            s.dimension = Some(0);
        }
        radii.push(s);
    }
    let first = &radii[0];
    let status = match (first.dimension, first.converged) {
        (None, _) => DimensionStatus::Inconclusive,
        (Some(0), 0) => DimensionStatus::IsolatedPoint,
        _ => DimensionStatus::Determined,
    };
    let consistent = radii.iter().all(|s| s.dimension.is_some() && s.dimension == first.dimension);
    DimensionEstimate { dimension: first.dimension, status, consistent, radii, samples: all_samples }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub abscissa: usize,
    pub ordinate: usize,
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    pub multistart: usize,
}

impl SectionSpec {
    pub fn new(abscissa: usize, ordinate: usize, start: f64, end: f64, steps: usize) -> Self {
        Self { abscissa, ordinate, start, end, steps, multistart: 8 }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.start],
            s => (0..s).map(|i| self.start + (self.end - self.start) * i as f64 / (s - 1) as f64).collect(),
        }
    }

    pub fn validate(&self, nvars: usize) -> Result<(), SolverError> {
        if self.abscissa == self.ordinate {
            return Err(SolverError::Section("abscissa and ordinate must differ".into()));
        }
        if self.abscissa >= nvars || self.ordinate >= nvars {
            return Err(SolverError::Section(format!("variable index outside 1..={nvars}")));
        }
        if !(self.start.is_finite() && self.end.is_finite()) || (self.start == self.end && self.steps > 1) {
            return Err(SolverError::Section("range must be finite with nonzero width".into()));
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        if self.steps > 1 {
            ((self.end - self.start) / (self.steps - 1) as f64).abs()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub x: Vec<f64>,
    pub residual: f64,
    pub branch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub nvars: usize,
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn branch_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.points.iter().filter_map(|p| p.branch).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn branch(&self, id: usize) -> Vec<&CloudPoint> {
        self.points.iter().filter(|p| p.branch == Some(id)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["branch".to_string(), "residual".to_string()];
        header.extend((1..=self.nvars).map(|i| format!("x{i}")));
        writeln!(w, "{}", header.join(","))?;
        for p in &self.points {
            let mut row = vec![p.branch.map(|b| b.to_string()).unwrap_or_default(), format!("{:.16e}", p.residual)];
            row.extend(p.x.iter().map(|v| format!("{v:.16e}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }
}

fn max_norm_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

struct Track {
    id: usize,
    points: Vec<Vec<f64>>,
    last_step: usize,
}

impl Track {
    fn predict(&self, a: f64, abscissa: usize) -> Vec<f64> {
        let last = self.points.last().expect("nonempty track");
        let al = last[abscissa];
        let mut p = if self.points.len() >= 2 {
            let prev = &self.points[self.points.len() - 2];
            let ap = prev[abscissa];
            let s = if (al - ap).abs() > 0.0 { (a - al) / (al - ap) } else { 0.0 };
            last.iter().zip(prev).map(|(l, p)| l + s * (l - p)).collect()
        } else if al.abs() > 1e-12 {
            last.iter().map(|l| l * a / al).collect()
        } else {
            last.clone()
        };
        p[abscissa] = a;
        p
    }
}

/// Tracks of a branch are dropped after this many consecutive steps without a point.
const MAX_GAP: usize = 2;

/// Solves `sys ∪ {x_abscissa = a}` along the sweep and links solutions into branches.
///
/// Consecutive points of a branch differ by less than three abscissa steps in the max norm.
pub fn sweep_section(sys: &PolySystem, spec: &SectionSpec, seed: u64, cfg: &SamplingConfig) -> Result<PointCloud, SolverError> {
    spec.validate(sys.nvars)?;
    let compiled = sys.compile();
    let kernel = linear_kernel(&compiled, cfg.newton.rank_tol);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floor = cfg.newton.radius_floor.unwrap_or(DEFAULT_RADIUS_FLOOR);
    let newton = NewtonConfig { radius_floor: None, ..cfg.newton };
    let h = spec.step();
    let mut cloud = PointCloud { nvars: sys.nvars, points: Vec::new() };
    let mut tracks: Vec<Track> = Vec::new();
    let mut next_id = 0;
    let mut prev_solutions: Vec<Vec<f64>> = Vec::new();

    for (step, a) in spec.values().into_iter().enumerate() {
        let fixed = compiled.with_fixed(spec.abscissa, a);
        let mut starts: Vec<Vec<f64>> = tracks
            .iter()
            .filter(|t| step - t.last_step <= MAX_GAP)
            .map(|t| t.predict(a, spec.abscissa))
            .collect();
        starts.extend(prev_solutions.iter().map(|p| {
            let mut s = p.clone();
            s[spec.abscissa] = a;
            s
        }));
        let scale = a.abs().max(floor);
        for _ in 0..spec.multistart {
            let mut s = kernel_start(&kernel, scale * (1.0 + rng.gen::<f64>()), cfg.noise, &mut rng);
            s[spec.abscissa] = a;
            starts.push(s);
        }
        let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
        for s in starts {
            let rep = newton_compiled(&fixed, &s, &newton);
            if !rep.converged() || norm(&rep.x) < floor {
                continue;
            }
            let residual = compiled.residual(&rep.x).norm();
            if residual >= newton.residual_tol {
                continue;
            }
            if found.iter().all(|(y, _)| max_norm_dist(y, &rep.x) > 1e-6 * (1.0 + norm(y))) {
                found.push((rep.x, residual));
            }
        }
        found.sort_by(|p, q| p.0.iter().zip(&q.0).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));

        let live: Vec<usize> = (0..tracks.len()).filter(|&t| step - tracks[t].last_step <= MAX_GAP).collect();
        let assignment = assign(&tracks, &live, &found, a, spec.abscissa, h);
        for (k, (x, residual)) in found.iter().enumerate() {
            let id = match assignment[k] {
                Some(t) => {
                    tracks[t].points.push(x.clone());
                    tracks[t].last_step = step;
                    tracks[t].id
                }
                None => {
                    tracks.push(Track { id: next_id, points: vec![x.clone()], last_step: step });
                    next_id += 1;
                    next_id - 1
                }
            };
            cloud.points.push(CloudPoint { x: x.clone(), residual: *residual, branch: Some(id) });
        }
        prev_solutions = found.into_iter().map(|f| f.0).collect();
    }
    Ok(cloud)
}

/// Minimum-total-distance matching of new points to live tracks under the link bound.
fn assign(tracks: &[Track], live: &[usize], found: &[(Vec<f64>, f64)], a: f64, abscissa: usize, h: f64) -> Vec<Option<usize>> {
    let mut cost = vec![vec![f64::INFINITY; live.len()]; found.len()];
    for (k, (x, _)) in found.iter().enumerate() {
        for (ti, &t) in live.iter().enumerate() {
            let last = tracks[t].points.last().expect("nonempty");
            let bound = 3.0 * (a - last[abscissa]).abs().max(h);
            if max_norm_dist(x, last) < bound {
                cost[k][ti] = max_norm_dist(x, &tracks[t].predict(a, abscissa));
            }
        }
    }
    let mut best: (usize, f64, Vec<Option<usize>>) = (0, 0.0, vec![None; found.len()]);
    if found.len() <= 8 && live.len() <= 8 {
        let mut cur = vec![None; found.len()];
        let mut used = vec![false; live.len()];
        search(&cost, 0, &mut cur, &mut used, 0, 0.0, &mut best);
        best.2.iter().map(|o| o.map(|ti| live[ti])).collect()
    } else {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (k, row) in cost.iter().enumerate() {
            for (ti, &c) in row.iter().enumerate() {
                if c.is_finite() {
                    pairs.push((c, k, ti));
                }
            }
        }
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut out = vec![None; found.len()];
        let mut used = vec![false; live.len()];
        for (_, k, ti) in pairs {
            if out[k].is_none() && !used[ti] {
                out[k] = Some(live[ti]);
                used[ti] = true;
            }
        }
        out
    }
}

/// Exhaustive matching maximising the number of links, then minimising total cost.
fn search(
    cost: &[Vec<f64>],
    k: usize,
    cur: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    links: usize,
    total: f64,
    best: &mut (usize, f64, Vec<Option<usize>>),
) {
    if k == cost.len() {
        if links > best.0 || (links == best.0 && total < best.1) || (links == 0 && best.0 == 0) {
            *best = (links, total, cur.clone());
        }
        return;
    }
    search(cost, k + 1, cur, used, links, total, best);
    for ti in 0..used.len() {
        if !used[ti] && cost[k][ti].is_finite() {
            used[ti] = true;
            cur[k] = Some(ti);
            search(cost, k + 1, cur, used, links + 1, total + cost[k][ti], best);
            cur[k] = None;
            used[ti] = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayTangent {
    pub branch: usize,
    /// 0 or 1 when a branch passes the origin and splits into two rays.
    pub ray: usize,
    pub direction: Vec<f64>,
    /// RMS residual of the direction fit.
    pub fit_residual: f64,
    pub points: usize,
    pub min_radius: f64,
}

pub const TANGENT_RADIUS: f64 = 0.1;

/// Per-ray limiting direction of `x/‖x‖` as `‖x‖ → 0`, from a fit in `1, √ρ, ρ`.
pub fn limiting_tangents(cloud: &PointCloud) -> Result<Vec<RayTangent>, SolverError> {
    let mut out = Vec::new();
    for id in cloud.branch_ids() {
        let pts: Vec<&Vec<f64>> = cloud.branch(id).into_iter().map(|p| &p.x).collect();
        let near: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, x)| (i, norm(x))).filter(|(_, r)| *r < TANGENT_RADIUS && *r > 0.0).collect();
        if near.len() < 3 {
            continue;
        }
        let imin = near.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty").0;
        let mut rays: Vec<Vec<usize>> = vec![near.iter().map(|p| p.0).filter(|&i| i <= imin).collect(), near.iter().map(|p| p.0).filter(|&i| i > imin).collect()];
        let first_dir = |idx: &Vec<usize>| -> Option<Vec<f64>> { idx.first().map(|&i| unit(pts[i])) };
        let split = match (first_dir(&rays[0]), rays[1].first().map(|&i| unit(pts[i]))) {
            (Some(u), Some(v)) => dot(&u, &v) < 0.0,
            _ => false,
        };
        if !split {
            let mut all = rays.concat();
            all.sort_unstable();
            rays = vec![all];
        }
        for (ri, idx) in rays.iter().enumerate() {
            let samples: Vec<(f64, Vec<f64>)> = idx.iter().map(|&i| (norm(pts[i]), unit(pts[i]))).collect();
            let mut radii: Vec<f64> = samples.iter().map(|s| s.0).collect();
            radii.sort_by(f64::total_cmp);
            radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            if radii.len() < 3 {
                continue;
            }
            let (direction, fit_residual) = fit_direction(&samples);
            out.push(RayTangent { branch: id, ray: ri, direction, fit_residual, points: samples.len(), min_radius: radii[0] });
        }
    }
    if out.is_empty() {
        return Err(SolverError::Inconclusive("no branch has points at three distinct radii below 0.1".into()));
    }
    Ok(out)
}

fn unit(x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    x.iter().map(|v| v / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fit_direction(samples: &[(f64, Vec<f64>)]) -> (Vec<f64>, f64) {
    let m = samples.len();
    let n = samples[0].1.len();
    let cols = if m >= 3 { 3 } else { 1 };
    let a = DMatrix::from_fn(m, cols, |i, j| samples[i].0.powf(0.5 * j as f64));
    let b = DMatrix::from_fn(m, n, |i, j| samples[i].1[j]);
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-12).expect("factors computed");
    let resid = (&a * &coef - &b).norm() / (m as f64).sqrt();
    let c0: Vec<f64> = (0..n).map(|j| coef[(0, j)]).collect();
    (unit(&c0), resid)
}

/// Angle between two unit directions in degrees.
pub fn angle_deg(u: &[f64], v: &[f64]) -> f64 {
    dot(u, v).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Smallest angle between limiting directions of rays on different branches.
pub fn closest_branch_pair(tangents: &[RayTangent]) -> Option<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, a) in tangents.iter().enumerate() {
        for b in &tangents[i + 1..] {
            if a.branch == b.branch {
                continue;
            }
            let ang = angle_deg(&a.direction, &b.direction);
            if best.is_none_or(|(x, _, _)| ang < x) {
                best = Some((ang, a.branch, b.branch));
            }
        }
    }
    best
}
