//! Order-by-order tangent cones `K^i` and their rank-stratum restrictions `K^{k,i}`.

use super::system::{minor_pairs, CompiledSystem, PolySystem, SystemError, SystemKind};
use crate::differentials::{factorial, minor_series_matrix, stacked_constraint_derivative, stacked_screw_derivatives, ADMISSIBLE_TOL};
use crate::linkage::{numeric_rank, Linkage, DEFAULT_RANK_TOL};
use crate::poly::{det_cofactor, Poly, TruncRing};
use crate::solver::min_norm_step;
use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_TOL_CONE: f64 = 1e-8;
pub const DEFAULT_MAX_ORDER: usize = 4;
pub const DEFAULT_MAX_PARAMETERS: usize = 6;
pub const DEFAULT_CONE_SAMPLES: usize = 720;
pub const DEFAULT_JET_BOUND: f64 = 10.0;

/// Coefficients below this are treated as round-off when deciding whether a condition vanishes.
const ZERO_COEFF: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeMode {
    Exact,
    Sampled,
}

impl FromStr for ConeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Self::Exact),
            "sampled" => Ok(Self::Sampled),
            other => Err(format!("unknown cone mode `{other}` (expected exact or sampled)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConeError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("max_order must be at least 2, got {0}")]
    Order(usize),
    #[error("base point is not admissible: closure residual {0:e}")]
    NotAdmissible(f64),
    #[error("{count} kernel parameters needed at order {order} exceed the bound {bound}")]
    TooManyParameters { count: usize, order: usize, bound: usize },
    #[error("exact mode cannot resolve order {order}: {reason}")]
    Unsupported { order: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeConfig {
    pub max_order: usize,
    pub tol_rank: f64,
    pub tol_cone: f64,
    pub max_parameters: usize,
    pub samples: usize,
    pub seed: u64,
    pub jet_bound: f64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self {
            max_order: DEFAULT_MAX_ORDER,
            tol_rank: DEFAULT_RANK_TOL,
            tol_cone: DEFAULT_TOL_CONE,
            max_parameters: DEFAULT_MAX_PARAMETERS,
            samples: DEFAULT_CONE_SAMPLES,
            seed: 0,
            jet_bound: DEFAULT_JET_BOUND,
        }
    }
}

/// Linear subspace of joint space contained in the cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeBranch {
    pub dimension: usize,
    /// Orthonormal spanning vectors in joint coordinates.
    pub basis: Vec<Vec<f64>>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeOrder {
    pub order: usize,
    pub branches: Vec<ConeBranch>,
    /// Smallest membership residual over the sampled unit sphere of `K¹`.
    pub min_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSample {
    pub direction: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeResult {
    pub mode: ConeMode,
    pub stratum: Option<usize>,
    pub kernel_dimension: usize,
    /// Order `κ` at which the sequence stopped changing.
    pub order: usize,
    pub stabilized: bool,
    pub tol_cone: f64,
    pub branches: Vec<ConeBranch>,
    pub history: Vec<ConeOrder>,
    pub min_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<DirectionSample>,
}

impl ConeResult {
    pub fn is_zero(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn branch_dimensions(&self) -> Vec<usize> {
        self.branches.iter().map(|b| b.dimension).collect()
    }

    pub fn dimension(&self) -> usize {
        self.branches.iter().map(|b| b.dimension).max().unwrap_or(0)
    }
}

/// Jet parametrisation and admissibility conditions up to a fixed order.
///
/// Variables are laid out in blocks of `d = dim ker J`: block 0 holds the kernel coordinates `c`
/// of `q̇ = N c`, block `i−1` the kernel parameters `λᵢ` of `q⁽ⁱ⁾ = −J⁺Bᵢ + N λᵢ`.
#[derive(Debug, Clone)]
pub struct ConeProblem {
    pub n: usize,
    pub d: usize,
    pub rank: usize,
    pub kernel: DMatrix<f64>,
    pub stratum: Option<usize>,
    pub max_order: usize,
    /// Bound on every kernel parameter of the higher jets.
    pub jet_bound: f64,
    nv: usize,
    conditions: Vec<PolySystem>,
    cumulative: Vec<CompiledSystem>,
}

fn stack_col(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

fn clean(p: Poly) -> Poly {
    let p = p.cleaned(1e-12);
    if p.max_abs_coeff() < ZERO_COEFF {
        Poly::zero(p.nvars())
    } else {
        p
    }
}

impl ConeProblem {
    pub fn new(lk: &Linkage, q0: &[f64], max_order: usize, stratum: Option<usize>, tol_rank: f64) -> Result<Self, ConeError> {
        let residual = lk.closure_residual(q0);
        if residual > ADMISSIBLE_TOL {
            return Err(ConeError::NotAdmissible(residual));
        }
        let jac = lk.stacked_jacobian(q0);
        let info = numeric_rank(&jac, tol_rank);
        if let Some(k) = stratum {
            let max = (6 * lk.gamma()).min(lk.n());
            if k < 1 || k > max {
                return Err(SystemError::MinorOrder { k, max }.into());
            }
            if info.rank >= k {
                return Err(SystemError::NotInStratum { k, rank: info.rank }.into());
            }
        }
        let n = lk.n();
        let d = n - info.rank;
        let nv = d * max_order.max(1);
        let kernel = info.kernel.clone();
        let cokernel = info.cokernel.transpose();
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let pinv = svd.pseudo_inverse(tol_rank * smax.max(f64::MIN_POSITIVE)).expect("factors computed");
        let one = Poly::constant(nv, 1.0);
        let kernel_vec = |block: usize| -> Vec<Poly> {
            (0..n)
                .map(|j| clean(Poly::linear(&(0..nv).map(|v| if v / d.max(1) == block && d > 0 { kernel[(j, v % d)] } else { 0.0 }).collect::<Vec<_>>())))
                .collect()
        };
        let mut jets: Vec<Vec<Poly>> = vec![kernel_vec(0)];
        let mut conditions = vec![PolySystem::new(nv, q0.to_vec(), 0, SystemKind::ConeCondition); max_order + 1];
        for (i, sys) in conditions.iter_mut().enumerate() {
            sys.order = i;
        }
        for i in 1..=max_order {
            if i >= 2 {
                jets.push(vec![Poly::zero(nv); n]);
                let hb = stacked_constraint_derivative(lk, q0, &jets, i, usize::MAX, &one);
                let b: Vec<Poly> = hb.iter().flat_map(|(_, b)| b.iter().cloned()).collect();
                for row in 0..cokernel.nrows() {
                    let eq = clean(b.iter().enumerate().fold(Poly::zero(nv), |acc, (r, p)| acc.add(&p.scale(cokernel[(row, r)]))));
                    if !eq.is_zero() {
                        conditions[i].push(eq, format!("order {i} cokernel row {}", row + 1));
                    }
                }
                let lam = kernel_vec(i - 1);
                let qi: Vec<Poly> = (0..n)
                    .map(|j| clean(b.iter().enumerate().fold(lam[j].clone(), |acc, (r, p)| acc.sub(&p.scale(pinv[(j, r)])))))
                    .collect();
                jets[i - 1] = qi;
            }
            if let Some(k) = stratum {
                let derivs = stacked_screw_derivatives(lk, q0, &jets, i, usize::MAX, &one);
                let rows: Vec<usize> = (0..6 * lk.gamma())
                    .filter(|&r| (0..n).any(|j| derivs[r / 6][j].iter().any(|s| !s[r % 6].is_zero_elem())))
                    .collect();
                let cols: Vec<usize> = (0..n)
                    .filter(|&j| (0..6 * lk.gamma()).any(|r| derivs[r / 6][j].iter().any(|s| !s[r % 6].is_zero_elem())))
                    .collect();
                for (r, c) in minor_pairs(&rows, &cols, k)? {
                    let m = minor_series_matrix(&derivs, &r, &c, i, &one);
                    let det = det_cofactor(&m, i);
                    let eq = clean(det.coeff(i).scale(factorial(i)));
                    if !eq.is_zero() {
                        let fmt = |v: &[usize]| v.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(",");
                        conditions[i].push(eq, format!("order {i} minor rows [{}] cols [{}]", fmt(&r), fmt(&c)));
                    }
                }
            }
        }
        let mut cumulative = Vec::with_capacity(max_order + 1);
        let mut acc = PolySystem::new(nv, q0.to_vec(), 0, SystemKind::ConeCondition);
        for (i, sys) in conditions.iter().enumerate() {
            for (eq, label) in sys.equations.iter().zip(&sys.provenance) {
                acc.push(eq.clone(), label.clone());
            }
            acc.order = i;
            cumulative.push(acc.compile());
        }
        Ok(Self { n, d, rank: info.rank, kernel, stratum, max_order, jet_bound: DEFAULT_JET_BOUND, nv, conditions, cumulative })
    }

    pub fn nvars(&self) -> usize {
        self.nv
    }

    /// Conditions contributed at exactly `order`.
    pub fn conditions(&self, order: usize) -> &PolySystem {
        &self.conditions[order]
    }

    /// Residual of the order-`order` admissibility conditions at direction `x`, minimised over kernel parameters.
    pub fn membership(&self, x: &[f64], order: usize) -> f64 {
        let xv = DVector::from_column_slice(x);
        let nx = xv.norm();
        if nx == 0.0 {
            return 0.0;
        }
        let u = xv / nx;
        let c = self.kernel.transpose() * &u;
        let off = (&u - &self.kernel * &c).norm();
        let order = order.min(self.max_order);
        let (r, _) = self.min_over_lambda(order, c.as_slice(), &[]);
        (off * off + r * r).sqrt()
    }

    fn point(&self, c: &[f64], lambda: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.nv];
        z[..self.d].copy_from_slice(c);
        z[self.d..].copy_from_slice(lambda);
        z
    }

    /// `min_λ ‖conditions of orders ≤ order‖` at fixed kernel coordinates `c`.
    fn min_over_lambda(&self, order: usize, c: &[f64], warm: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let sys = &self.cumulative[order];
        let nl = self.nv - self.d;
        if sys.is_empty() {
            return (0.0, vec![0.0; nl]);
        }
        let mut starts: Vec<Vec<f64>> = vec![vec![0.0; nl]];
        starts.extend(warm.iter().cloned());
        if nl > 0 && order >= 3 {
            let mut rng = ChaCha8Rng::seed_from_u64(order as u64);
            for _ in 0..3 {
                starts.push((0..nl).map(|_| StandardNormal.sample(&mut rng)).collect());
            }
        }
        let bound = self.jet_bound;
        let clamp = |v: f64| v.clamp(-bound, bound);
        let mut best = (f64::INFINITY, vec![0.0; nl]);
        for s in starts {
            let mut lambda: Vec<f64> = s.into_iter().map(clamp).collect();
            let mut f = sys.residual(&self.point(c, &lambda));
            for _ in 0..100 {
                if nl == 0 || f.norm() < 1e-15 {
                    break;
                }
                let jac = sys.jacobian(&self.point(c, &lambda));
                let jl = jac.columns(self.d, nl).into_owned();
                let step = min_norm_step(&jl, &f, 1e-12);
                let mut t = 1.0;
                let mut moved = false;
                while t > 1e-6 {
                    let trial: Vec<f64> = lambda.iter().zip(step.iter()).map(|(l, s)| clamp(l - t * s)).collect();
                    let ft = sys.residual(&self.point(c, &trial));
                    if ft.norm() < f.norm() {
                        moved = (0..nl).any(|k| (trial[k] - lambda[k]).abs() > 1e-14 * (1.0 + lambda[k].abs()));
                        lambda = trial;
                        f = ft;
                        break;
                    }
                    t *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            if f.norm() < best.0 {
                best = (f.norm(), lambda);
            }
            if best.0 < 1e-14 {
                break;
            }
        }
        best
    }

    fn to_joint(&self, basis: &DMatrix<f64>) -> Vec<Vec<f64>> {
        let x = &self.kernel * basis;
        (0..x.ncols()).map(|j| stack_col(&x, j)).collect()
    }
}

fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-9 * smax.max(1e-300)).collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

fn same_subspace(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    if a.ncols() != b.ncols() {
        return false;
    }
    let proj = a * a.transpose();
    (b - &proj * b).norm() < 1e-6
}

fn same_pieces(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> bool {
    a.len() == b.len() && a.iter().all(|p| b.iter().any(|q| same_subspace(p, q)))
}

fn depends_on_lambda(p: &Poly, d: usize) -> bool {
    p.terms().any(|(m, _)| m.exponents().iter().skip(d).any(|&e| e > 0))
}

/// Substitutes `c = B s` into the kernel block, leaving `s` in the first `p` slots.
fn restrict(p: &Poly, basis: &DMatrix<f64>, d: usize) -> Poly {
    let nv = p.nvars();
    let images: Vec<Poly> = (0..nv)
        .map(|v| {
            if v < d {
                let mut coeffs = vec![0.0; nv];
                for s in 0..basis.ncols() {
                    coeffs[s] = basis[(v, s)];
                }
                Poly::linear(&coeffs)
            } else {
                Poly::var(nv, v)
            }
        })
        .collect();
    clean(p.compose(&images))
}

/// Real projective roots `(s1, s2)` of a binary form in the first two variables.
fn binary_form_roots(f: &Poly) -> Vec<[f64; 2]> {
    let m = match f.degree() {
        Some(m) if m > 0 => m,
        _ => return Vec::new(),
    };
    let coeff = |k: usize| {
        let mut e = vec![0u8; f.nvars()];
        e[0] = k as u8;
        e[1] = (m - k) as u8;
        f.coeff_of(&e)
    };
    let a: Vec<f64> = (0..=m).map(coeff).collect();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut roots = Vec::new();
    let mut deg = m;
    while deg > 0 && a[deg].abs() <= 1e-10 * scale {
        deg -= 1;
    }
    if deg < m {
        roots.push([1.0, 0.0]);
    }
    if deg == 0 {
        return roots;
    }
    let companion = DMatrix::from_fn(deg, deg, |r, c| {
        if r == 0 {
            -a[deg - 1 - c] / a[deg]
        } else if r == c + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig: Vec<Complex<f64>> = companion.complex_eigenvalues().iter().copied().collect();
    for z in eig {
        if z.im.abs() <= 1e-4 * (1.0 + z.re.abs()) {
            roots.push([z.re, 1.0]);
        }
    }
    roots
}

/// Gauss–Newton on the angle of a unit vector in the plane of the first two variables.
fn polish_angle(forms: &[Poly], start: [f64; 2]) -> (f64, [f64; 2]) {
    let nv = forms[0].nvars();
    let grads: Vec<[Poly; 2]> = forms.iter().map(|f| [f.derivative(0), f.derivative(1)]).collect();
    let at = |th: f64| {
        let mut z = vec![0.0; nv];
        z[0] = th.cos();
        z[1] = th.sin();
        z
    };
    let mut th = start[1].atan2(start[0]);
    let resid = |th: f64| -> f64 { forms.iter().map(|f| f.eval(&at(th)).powi(2)).sum::<f64>().sqrt() };
    let mut best = (resid(th), th);
    for _ in 0..60 {
        let z = at(th);
        let (mut num, mut den) = (0.0, 0.0);
        for (f, g) in forms.iter().zip(&grads) {
            let r = f.eval(&z);
            let dr = -g[0].eval(&z) * z[1] + g[1].eval(&z) * z[0];
            num += r * dr;
            den += dr * dr;
        }
        if den == 0.0 {
            break;
        }
        th -= num / den;
        let r = resid(th);
        if r < best.0 {
            best = (r, th);
        }
        if (num / den).abs() < 1e-15 {
            break;
        }
    }
    (best.0, [best.1.cos(), best.1.sin()])
}

/// Polishes a root that also annihilates the angular derivatives of every form.
fn polish_multiple_root(forms: &[Poly], start: [f64; 2]) -> (f64, [f64; 2]) {
    let mut joint: Vec<Poly> = forms.to_vec();
    for f in forms {
        let g = Poly::var(f.nvars(), 0).mul(&f.derivative(1)).sub(&Poly::var(f.nvars(), 1).mul(&f.derivative(0)));
        let g = clean(g);
        if !g.is_zero() {
            joint.push(g);
        }
    }
    let (_, s) = polish_angle(&joint, start);
    let nv = forms[0].nvars();
    let mut z = vec![0.0; nv];
    z[0] = s[0];
    z[1] = s[1];
    let r = forms.iter().map(|f| f.eval(&z).powi(2)).sum::<f64>().sqrt();
    (r, s)
}

impl ConeProblem {
    fn refine_piece(&self, basis: &DMatrix<f64>, order: usize, tol: f64) -> Result<Vec<(DMatrix<f64>, f64)>, ConeError> {
        let d = self.d;
        let p = basis.ncols();
        let mut forms: Vec<Poly> = Vec::new();
        for i in 1..=order {
            for eq in &self.conditions[i].equations {
                let r = restrict(eq, basis, d);
                if !r.is_zero() {
                    forms.push(r);
                }
            }
        }
        if forms.is_empty() {
            return Ok(vec![(basis.clone(), 0.0)]);
        }
        if p == 1 {
            let (r, _) = self.min_over_lambda(order, &stack_col(basis, 0), &[]);
            return Ok(if r < tol { vec![(basis.clone(), r)] } else { Vec::new() });
        }
        if forms.iter().any(|f| depends_on_lambda(f, d)) {
            return Err(ConeError::Unsupported { order, reason: format!("conditions on a {p}-dimensional piece depend on kernel parameters") });
        }
        let mut homog: Vec<Poly> = Vec::new();
        for f in &forms {
            for k in f.min_degree().unwrap_or(0)..=f.degree().unwrap_or(0) {
                let h = clean(f.homogeneous_component(k));
                if !h.is_zero() {
                    homog.push(h);
                }
            }
        }
        let linear: Vec<&Poly> = homog.iter().filter(|h| h.degree() == Some(1)).collect();
        if !linear.is_empty() {
            let a = DMatrix::from_fn(linear.len(), p, |r, c| linear[r].coeff_of(&unit_exponent(self.nv, c)));
            let info = numeric_rank(&a, 1e-9);
            if info.kernel.ncols() == 0 {
                return Ok(Vec::new());
            }
            let sub = orthonormal_columns(&(basis * &info.kernel));
            return self.refine_piece(&sub, order, tol);
        }
        if p != 2 {
            return Err(ConeError::Unsupported { order, reason: format!("nonlinear conditions on a {p}-dimensional piece") });
        }
        let seed = homog.iter().min_by_key(|h| h.degree()).expect("nonempty");
        let mut lines: Vec<(DMatrix<f64>, f64)> = Vec::new();
        for root in binary_form_roots(seed) {
            let (mut r, mut s) = polish_angle(&homog, root);
            let (rm, sm) = polish_multiple_root(&homog, s);
            if rm < r.max(1e-15) * 1e3 && rm < tol {
                (r, s) = (rm, sm);
            }
            if r >= tol {
                continue;
            }
            let dir = orthonormal_columns(&(basis * DMatrix::from_column_slice(2, 1, &s)));
            if lines.iter().all(|(l, _)| !same_subspace(l, &dir)) {
                lines.push((dir, r));
            }
        }
        Ok(lines)
    }

    fn refine(&self, pieces: &[DMatrix<f64>], order: usize, tol: f64) -> Result<Vec<(DMatrix<f64>, f64)>, ConeError> {
        let mut out: Vec<(DMatrix<f64>, f64)> = Vec::new();
        for piece in pieces {
            for (b, r) in self.refine_piece(piece, order, tol)? {
                if out.iter().all(|(o, _)| !same_subspace(o, &b)) {
                    out.push((b, r));
                }
            }
        }
        Ok(out)
    }

    fn branches(&self, pieces: &[(DMatrix<f64>, f64)]) -> Vec<ConeBranch> {
        pieces.iter().map(|(b, r)| ConeBranch { dimension: b.ncols(), basis: self.to_joint(b), residual: *r }).collect()
    }
}

fn unit_exponent(nv: usize, i: usize) -> Vec<u8> {
    let mut e = vec![0u8; nv];
    e[i] = 1;
    e
}

fn exact(problem: &ConeProblem, cfg: &ConeConfig) -> Result<ConeResult, ConeError> {
    let d = problem.d;
    let mut pieces: Vec<(DMatrix<f64>, f64)> = if d == 0 { Vec::new() } else { vec![(DMatrix::identity(d, d), 0.0)] };
    if d > 0 && !problem.conditions[1].is_empty() {
        pieces = problem.refine(&[DMatrix::identity(d, d)], 1, cfg.tol_cone)?;
    }
    let mut history = vec![ConeOrder { order: 1, branches: problem.branches(&pieces), min_residual: None }];
    let mut kappa = 1;
    let mut stabilized = pieces.is_empty();
    if !stabilized {
        for i in 2..=cfg.max_order {
            let count = d * (i - 1);
            if count > cfg.max_parameters {
                return Err(ConeError::TooManyParameters { count, order: i, bound: cfg.max_parameters });
            }
            let bases: Vec<DMatrix<f64>> = pieces.iter().map(|p| p.0.clone()).collect();
            let next = problem.refine(&bases, i, cfg.tol_cone)?;
            history.push(ConeOrder { order: i, branches: problem.branches(&next), min_residual: None });
            let next_bases: Vec<DMatrix<f64>> = next.iter().map(|p| p.0.clone()).collect();
            if next.is_empty() {
                kappa = i;
                stabilized = true;
                pieces = next;
                break;
            }
            if same_pieces(&bases, &next_bases) {
                kappa = i - 1;
                stabilized = true;
                pieces = next;
                break;
            }
            kappa = i;
            pieces = next;
        }
    }
    let branches = problem.branches(&pieces);
    Ok(ConeResult {
        mode: ConeMode::Exact,
        stratum: problem.stratum,
        kernel_dimension: d,
        order: kappa,
        stabilized,
        tol_cone: cfg.tol_cone,
        branches,
        history,
        min_residual: None,
        samples: Vec::new(),
    })
}

/// Unit directions in `ℝᵈ`, one per antipodal pair where possible.
fn sphere_directions(d: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    match d {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0)],
        2 => (0..count)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / count as f64;
                DVector::from_column_slice(&[th.cos(), th.sin()])
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    let v: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                    let n = v.norm();
                    v / n
                })
                .collect()
        }
    }
}

/// Gauss–Newton on `(c, λ)` with the normalisation `‖c‖² = 1` appended.
fn refine_direction(problem: &ConeProblem, order: usize, c0: &[f64], l0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let sys = &problem.cumulative[order];
    let d = problem.d;
    let mut z = problem.point(c0, l0);
    for _ in 0..60 {
        let mut f = sys.residual(&z).as_slice().to_vec();
        let cn: f64 = z[..d].iter().map(|v| v * v).sum();
        f.push(cn - 1.0);
        let j0 = sys.jacobian(&z);
        let mut jac = DMatrix::zeros(j0.nrows() + 1, problem.nv);
        jac.view_mut((0, 0), (j0.nrows(), problem.nv)).copy_from(&j0);
        for k in 0..d {
            jac[(j0.nrows(), k)] = 2.0 * z[k];
        }
        let step = min_norm_step(&jac, &DVector::from_vec(f), 1e-12);
        for (zi, s) in z.iter_mut().zip(step.iter()) {
            *zi -= s;
        }
        for zi in z.iter_mut().skip(d) {
            *zi = zi.clamp(-problem.jet_bound, problem.jet_bound);
        }
        if step.norm() < 1e-15 {
            break;
        }
    }
    let cn = z[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
    let c: Vec<f64> = z[..d].iter().map(|v| v / cn).collect();
    (c, z[d..].to_vec())
}

fn sampled(problem: &ConeProblem, cfg: &ConeConfig) -> Result<ConeResult, ConeError> {
    let d = problem.d;
    let dirs = sphere_directions(d, if d == 2 { cfg.samples } else { cfg.samples.max(64) }, cfg.seed);
    let mut history = Vec::new();
    let mut samples = Vec::new();
    let mut prev: Option<Vec<ConeBranch>> = None;
    let mut kappa = 1;
    let mut stabilized = d == 0;
    let mut final_branches = Vec::new();
    let mut final_min = None;
    if d == 0 {
        history.push(ConeOrder { order: 1, branches: Vec::new(), min_residual: None });
    }
    for i in 1..=cfg.max_order {
        if d == 0 {
            break;
        }
        let nl = problem.nv - d;
        let mut res = Vec::with_capacity(dirs.len());
        let mut lams: Vec<Vec<f64>> = Vec::with_capacity(dirs.len());
        for (k, c) in dirs.iter().enumerate() {
            let warm: Vec<Vec<f64>> = if k > 0 && d == 2 { vec![lams[k - 1].clone()] } else { Vec::new() };
            let (r, l) = problem.min_over_lambda(i, c.as_slice(), &warm);
            res.push(r);
            lams.push(l);
        }
        let m = dirs.len();
        let mut cands: Vec<usize> = if d == 2 {
            (0..m).filter(|&k| res[k] <= res[(k + m - 1) % m] && res[k] <= res[(k + 1) % m]).collect()
        } else {
            (0..m).collect()
        };
        cands.sort_by(|&a, &b| res[a].total_cmp(&res[b]));
        cands.truncate(32);
        let mut accepted: Vec<(DVector<f64>, f64)> = dirs.iter().zip(&res).filter(|(_, &r)| r < cfg.tol_cone).map(|(c, &r)| (c.clone(), r)).collect();
        let full = accepted.len() == m;
        let mut min_res = res.iter().copied().fold(f64::INFINITY, f64::min);
        if !full && !problem.cumulative[i].is_empty() {
            for &k in &cands {
                let (c, l) = refine_direction(problem, i, dirs[k].as_slice(), if nl > 0 { &lams[k] } else { &[] });
                let (r, _) = problem.min_over_lambda(i, &c, &[l]);
                min_res = min_res.min(r);
                if r < cfg.tol_cone {
                    accepted.push((DVector::from_vec(c), r));
                }
            }
        }
        let branches = if full {
            vec![ConeBranch { dimension: d, basis: problem.to_joint(&DMatrix::identity(d, d)), residual: 0.0 }]
        } else {
            cluster(problem, &mut accepted)
        };
        samples = dirs
            .iter()
            .zip(&res)
            .map(|(c, &r)| DirectionSample { direction: (&problem.kernel * c).as_slice().to_vec(), residual: r })
            .collect();
        history.push(ConeOrder { order: i, branches: branches.clone(), min_residual: Some(min_res) });
        final_min = Some(min_res);
        let empty = branches.is_empty();
        let same = prev.as_ref().is_some_and(|p| same_branches(p, &branches));
        final_branches = branches.clone();
        if empty {
            kappa = i;
            stabilized = true;
            break;
        }
        if same {
            kappa = i - 1;
            stabilized = true;
            break;
        }
        kappa = i;
        prev = Some(branches);
    }
    Ok(ConeResult {
        mode: ConeMode::Sampled,
        stratum: problem.stratum,
        kernel_dimension: d,
        order: kappa,
        stabilized,
        tol_cone: cfg.tol_cone,
        branches: final_branches,
        history,
        min_residual: final_min,
        samples,
    })
}

/// Groups accepted directions within 1° of each other, up to sign, into line branches.
fn cluster(problem: &ConeProblem, accepted: &mut [(DVector<f64>, f64)]) -> Vec<ConeBranch> {
    accepted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let cos_tol = 1f64.to_radians().cos();
    let mut reps: Vec<(DVector<f64>, f64)> = Vec::new();
    for (c, r) in accepted.iter() {
        if reps.iter().all(|(q, _)| q.dot(c).abs() < cos_tol) {
            reps.push((c.clone(), *r));
        }
    }
    reps.iter()
        .map(|(c, r)| ConeBranch { dimension: 1, basis: problem.to_joint(&DMatrix::from_column_slice(c.len(), 1, c.as_slice())), residual: *r })
        .collect()
}

fn same_branches(a: &[ConeBranch], b: &[ConeBranch]) -> bool {
    let to_mat = |br: &ConeBranch| DMatrix::from_fn(br.basis[0].len(), br.basis.len(), |r, c| br.basis[c][r]);
    a.len() == b.len()
        && a.iter().all(|x| {
            b.iter().any(|y| {
                let (mx, my) = (to_mat(x), to_mat(y));
                mx.ncols() == my.ncols() && (&my - &mx * (mx.transpose() * &my)).norm() < 2f64.to_radians().sin()
            })
        })
}

fn run(problem: &ConeProblem, cfg: &ConeConfig, mode: ConeMode) -> Result<ConeResult, ConeError> {
    match mode {
        ConeMode::Exact => exact(problem, cfg),
        ConeMode::Sampled => sampled(problem, cfg),
    }
}

pub fn tangent_cone(lk: &Linkage, q0: &[f64], cfg: &ConeConfig, mode: ConeMode) -> Result<ConeResult, ConeError> {
    if cfg.max_order < 2 {
        return Err(ConeError::Order(cfg.max_order));
    }
    let mut problem = ConeProblem::new(lk, q0, cfg.max_order, None, cfg.tol_rank)?;
    problem.jet_bound = cfg.jet_bound;
    run(&problem, cfg, mode)
}

pub fn tangent_cone_stratum(lk: &Linkage, q0: &[f64], k: usize, cfg: &ConeConfig, mode: ConeMode) -> Result<ConeResult, ConeError> {
    if cfg.max_order < 2 {
        return Err(ConeError::Order(cfg.max_order));
    }
    let mut problem = ConeProblem::new(lk, q0, cfg.max_order, Some(k), cfg.tol_rank)?;
    problem.jet_bound = cfg.jet_bound;
    run(&problem, cfg, mode)
}
