//! Higher-order differentials of joint screws, loop constraint maps and Jacobian minors.
//!
//! Time derivatives are taken along formal trajectories `q(t) = q0 + Σ q⁽ᵐ⁾ tᵐ/m!`. Straight
//! lines `q0 + t·x` give the differentials `dᵏ` as polynomials in `x`.

use crate::linkage::Linkage;
use crate::poly::{det_cofactor, Monomial, Poly, PolyMatrix, PolyVector6, Series, TruncRing};
use crate::screw::{lie_bracket, Screw, ScrewMatrix};
use nalgebra::Matrix4;
use std::collections::HashMap;
use thiserror::Error;

pub const MAX_ORDER: usize = 12;
pub const ADMISSIBLE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DiffError {
    #[error("base point is not admissible for cycle {cycle}: closure residual {residual:e}")]
    NotAdmissible { cycle: usize, residual: f64 },
    #[error("order {0} outside 1..={MAX_ORDER}")]
    Order(usize),
    #[error("jet of order {have} too short for order {need}")]
    JetTooShort { have: usize, need: usize },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("table order {have} below requested order {need}")]
    InsufficientOrder { have: usize, need: usize },
}

pub fn factorial(k: usize) -> f64 {
    (1..=k as u64).product::<u64>() as f64
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r: u64 = 1;
    for i in 0..k as u64 {
        r = r * (n as u64 - i) / (i + 1);
    }
    r as f64
}

/// Screw coordinates over a coefficient ring.
pub type RingScrew<R> = [R; 6];

pub fn ring_screw<R: TruncRing>(one: &R, s: &Screw) -> RingScrew<R> {
    let a = s.to_array();
    std::array::from_fn(|i| one.scaled(a[i]))
}

fn ring_zero<R: TruncRing>(one: &R) -> RingScrew<R> {
    std::array::from_fn(|_| one.zero_like())
}

pub fn ring_bracket<R: TruncRing>(a: &RingScrew<R>, b: &RingScrew<R>, trunc: usize) -> RingScrew<R> {
    let cross = |p: [&R; 3], q: [&R; 3]| -> [R; 3] {
        [
            p[1].times(q[2], trunc).minus(&p[2].times(q[1], trunc)),
            p[2].times(q[0], trunc).minus(&p[0].times(q[2], trunc)),
            p[0].times(q[1], trunc).minus(&p[1].times(q[0], trunc)),
        ]
    };
    let wa = [&a[0], &a[1], &a[2]];
    let va = [&a[3], &a[4], &a[5]];
    let wb = [&b[0], &b[1], &b[2]];
    let vb = [&b[3], &b[4], &b[5]];
    let w = cross(wa, wb);
    let v1 = cross(wa, vb);
    let v2 = cross(wb, va);
    let [w0, w1, w2] = w;
    [w0, w1, w2, v1[0].minus(&v2[0]), v1[1].minus(&v2[1]), v1[2].minus(&v2[2])]
}

fn ring_axpy<R: TruncRing>(acc: &mut RingScrew<R>, s: &RingScrew<R>, c: &R, scale: f64, trunc: usize) {
    if c.is_zero_elem() {
        return;
    }
    for i in 0..6 {
        if !s[i].is_zero_elem() {
            acc[i] = acc[i].plus(&s[i].times(c, trunc).scaled(scale));
        }
    }
}

fn ring_is_zero<R: TruncRing>(s: &RingScrew<R>) -> bool {
    s.iter().all(|c| c.is_zero_elem())
}

/// `S'_k⁽ᵐ⁾` for every cycle position `k` and `m = 0..=order`.
///
/// `screws[k]` is the signed screw at position `k`, `vars[k]` its joint variable and
/// `jet[m-1][j]` the `m`-th derivative of `q_j`.
pub fn cycle_screw_derivatives<R: TruncRing>(
    screws: &[Screw],
    vars: &[usize],
    jet: &[Vec<R>],
    order: usize,
    trunc: usize,
    one: &R,
) -> Vec<Vec<RingScrew<R>>> {
    let p = screws.len();
    let mut d: Vec<Vec<RingScrew<R>>> = screws.iter().map(|s| vec![ring_screw(one, s)]).collect();
    for r in 0..order {
        for k in 0..p {
            let mut acc = ring_zero(one);
            for m in 0..k {
                for c in 0..=r {
                    if c >= jet.len() {
                        break;
                    }
                    let qd = &jet[c][vars[m]];
                    if qd.is_zero_elem() {
                        continue;
                    }
                    for a in 0..=r - c {
                        let b = r - c - a;
                        if ring_is_zero(&d[m][a]) || ring_is_zero(&d[k][b]) {
                            continue;
                        }
                        let coef = factorial(r) / (factorial(a) * factorial(b) * factorial(c));
                        let br = ring_bracket(&d[m][a], &d[k][b], trunc);
                        ring_axpy(&mut acc, &br, qd, coef, trunc);
                    }
                }
            }
            d[k].push(acc);
        }
    }
    d
}

/// `H⁽ⁱ⁾` of one cycle and its part `Bᵢ` free of `q⁽ⁱ⁾`.
pub fn cycle_constraint_derivative<R: TruncRing>(
    derivs: &[Vec<RingScrew<R>>],
    vars: &[usize],
    jet: &[Vec<R>],
    i: usize,
    trunc: usize,
    one: &R,
) -> (RingScrew<R>, RingScrew<R>) {
    let mut h = ring_zero(one);
    let mut b = ring_zero(one);
    for (k, dk) in derivs.iter().enumerate() {
        for m in 0..i {
            let q = &jet[i - m - 1][vars[k]];
            let coef = binomial(i - 1, m);
            ring_axpy(&mut h, &dk[m], q, coef, trunc);
            if m > 0 {
                ring_axpy(&mut b, &dk[m], q, coef, trunc);
            }
        }
    }
    (h, b)
}

/// Base configuration plus derivatives `q̇, q̈, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub base: Vec<f64>,
    pub derivatives: Vec<Vec<f64>>,
}

impl Jet {
    pub fn new(base: Vec<f64>, derivatives: Vec<Vec<f64>>) -> Self {
        Self { base, derivatives }
    }

    /// `q̇ = x` and all higher derivatives zero.
    pub fn straight(base: Vec<f64>, x: Vec<f64>, order: usize) -> Self {
        let n = x.len();
        let mut d = vec![x];
        d.extend((1..order).map(|_| vec![0.0; n]));
        Self::new(base, d)
    }

    pub fn order(&self) -> usize {
        self.derivatives.len()
    }

    /// Point of the formal trajectory at time `t`.
    pub fn point(&self, t: f64) -> Vec<f64> {
        let mut q = self.base.clone();
        for (m, d) in self.derivatives.iter().enumerate() {
            let c = t.powi(m as i32 + 1) / factorial(m + 1);
            for (qi, di) in q.iter_mut().zip(d) {
                *qi += c * di;
            }
        }
        q
    }
}

/// Per-joint time derivatives `S, Ṡ, …, S⁽ᵏ⁾` of one cycle; zero for joints outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScrewJet {
    pub derivatives: Vec<Vec<Screw>>,
}

fn to_screw(s: &RingScrew<f64>) -> Screw {
    Screw::from_array(*s)
}

fn check_jet(jet: &Jet, need: usize) -> Result<(), DiffError> {
    if jet.order() < need {
        Err(DiffError::JetTooShort { have: jet.order(), need })
    } else {
        Ok(())
    }
}

fn numeric_cycle(lk: &Linkage, l: usize, q: &[f64]) -> (Vec<Screw>, Vec<usize>) {
    let cs = lk.cycle_screws(l, q);
    (cs.iter().map(|c| c.1).collect(), cs.iter().map(|c| c.0).collect())
}

pub fn screw_time_derivatives(lk: &Linkage, l: usize, jet: &Jet, k: usize) -> Result<ScrewJet, DiffError> {
    check_jet(jet, k)?;
    if l >= lk.gamma() {
        return Err(DiffError::Index(format!("cycle {l}")));
    }
    let (screws, vars) = numeric_cycle(lk, l, &jet.base);
    let d = cycle_screw_derivatives(&screws, &vars, &jet.derivatives, k, usize::MAX, &1.0);
    let mut out = vec![vec![Screw::zero(); k + 1]; lk.n()];
    for (pos, &j) in vars.iter().enumerate() {
        out[j] = d[pos].iter().map(to_screw).collect();
    }
    Ok(ScrewJet { derivatives: out })
}

/// Returns `(H⁽ⁱ⁾, Bᵢ)` with `H⁽ⁱ⁾ = J_l q⁽ⁱ⁾ + Bᵢ`.
pub fn constraint_derivative(lk: &Linkage, l: usize, jet: &Jet, i: usize) -> Result<(Screw, Screw), DiffError> {
    if i == 0 {
        return Err(DiffError::Order(0));
    }
    check_jet(jet, i)?;
    if l >= lk.gamma() {
        return Err(DiffError::Index(format!("cycle {l}")));
    }
    let (screws, vars) = numeric_cycle(lk, l, &jet.base);
    let d = cycle_screw_derivatives(&screws, &vars, &jet.derivatives, i - 1, usize::MAX, &1.0);
    let (h, b) = cycle_constraint_derivative(&d, &vars, &jet.derivatives, i, usize::MAX, &1.0);
    Ok((to_screw(&h), to_screw(&b)))
}

/// Differentials `dᵏf`, `dᵏf⁻¹` and `dᵏS` of one cycle at an admissible base point.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialTable {
    pub cycle: usize,
    pub base: Vec<f64>,
    pub order: usize,
    /// `df[k-1] = dᵏf`.
    pub df: Vec<PolyMatrix>,
    /// `df_inv[k-1] = dᵏf⁻¹`.
    pub df_inv: Vec<PolyMatrix>,
    /// `ds[j][k] = dᵏS_j` for `k = 0..=order`; zero for joints outside the cycle.
    pub ds: Vec<Vec<PolyVector6>>,
}

impl DifferentialTable {
    pub fn nvars(&self) -> usize {
        self.ds.len()
    }

    /// `Σ_{k≤ν} dᵏf/k!` without the identity term.
    pub fn taylor_sum(&self, nu: usize) -> PolyMatrix {
        let n = self.nvars();
        (1..=nu.min(self.order)).fold(PolyMatrix::zeros(n, 4, 4), |acc, k| {
            acc.add(&self.df[k - 1].scale(1.0 / factorial(k))).expect("4x4")
        })
    }

    /// Canonical text dump, one entry per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, m) in self.df.iter().enumerate() {
            for i in 0..4 {
                for j in 0..4 {
                    let p = m.get(i, j);
                    if !p.is_zero() {
                        out.push_str(&format!("d{}f[{},{}] = {}\n", k + 1, i + 1, j + 1, p));
                    }
                }
            }
        }
        out
    }
}

fn check_table_args(lk: &Linkage, l: usize, q0: &[f64], nu: usize) -> Result<(), DiffError> {
    if nu == 0 || nu > MAX_ORDER {
        return Err(DiffError::Order(nu));
    }
    if l >= lk.gamma() {
        return Err(DiffError::Index(format!("cycle {l}")));
    }
    if q0.len() != lk.n() {
        return Err(DiffError::Index(format!("configuration of length {} for {} joints", q0.len(), lk.n())));
    }
    let residual = lk.cycle_map(l, q0).distance_to_identity();
    if residual > ADMISSIBLE_TOL {
        return Err(DiffError::NotAdmissible { cycle: l, residual });
    }
    Ok(())
}

fn poly_hat(s: &RingScrew<Poly>) -> PolyMatrix {
    PolyVector6(s.clone()).hat()
}

fn identity_inverse_recursion(df: &[PolyMatrix], n: usize, k: usize, df_inv: &[PolyMatrix]) -> PolyMatrix {
    let id = PolyMatrix::identity(n, 4);
    let mut acc = PolyMatrix::zeros(n, 4, 4);
    for i in 1..=k {
        let inv = if k == i { &id } else { &df_inv[k - i - 1] };
        let prod = df[i - 1].mul(inv, k).expect("4x4");
        acc = acc.sub(&prod.scale(binomial(k, i))).expect("4x4");
    }
    acc
}

pub fn differential_table(lk: &Linkage, l: usize, q0: &[f64], nu: usize) -> Result<DifferentialTable, DiffError> {
    check_table_args(lk, l, q0, nu)?;
    let n = lk.n();
    let (screws, vars) = numeric_cycle(lk, l, q0);
    let one = Poly::constant(n, 1.0);
    let xs: Vec<Poly> = (0..n).map(|j| Poly::var(n, j)).collect();
    let jet = vec![xs.clone()];
    let d = cycle_screw_derivatives(&screws, &vars, &jet, nu, nu, &one);

    let mut df: Vec<PolyMatrix> = Vec::new();
    let mut df_inv: Vec<PolyMatrix> = Vec::new();
    for k in 1..=nu {
        let mut h = PolyMatrix::zeros(n, 4, 4);
        for (pos, &j) in vars.iter().enumerate() {
            let term = poly_hat(&d[pos][k - 1]).map(|p| p.mul_trunc(&xs[j], nu));
            h = h.add(&term).expect("4x4");
        }
        let mut fk = h;
        for i in 1..k {
            let prod = df[i - 1].mul(&df_inv[k - i - 1], nu).expect("4x4");
            fk = fk.sub(&prod.scale(binomial(k - 1, i - 1))).expect("4x4");
        }
        df.push(fk);
        let inv = identity_inverse_recursion(&df, n, k, &df_inv);
        df_inv.push(inv);
    }
    let mut ds = vec![vec![PolyVector6::zeros(n); nu + 1]; n];
    for (pos, &j) in vars.iter().enumerate() {
        ds[j] = d[pos].iter().map(|s| PolyVector6(s.clone())).collect();
    }
    Ok(DifferentialTable { cycle: l, base: q0.to_vec(), order: nu, df, df_inv, ds })
}

/// Same contract as [`differential_table`], built from multi-index partial derivatives.
pub fn differential_table_direct(lk: &Linkage, l: usize, q0: &[f64], nu: usize) -> Result<DifferentialTable, DiffError> {
    check_table_args(lk, l, q0, nu)?;
    let n = lk.n();
    let (screws, vars) = numeric_cycle(lk, l, q0);
    let mut pd = PartialTable::new(screws);
    let p = vars.len();

    let mut df = Vec::new();
    let mut df_inv = Vec::new();
    let mut ds = vec![vec![PolyVector6::zeros(n); nu + 1]; n];
    for k in 1..=nu {
        let mut f_terms: [Vec<(Monomial, f64)>; 16] = std::array::from_fn(|_| Vec::new());
        let mut finv_terms: [Vec<(Monomial, f64)>; 16] = std::array::from_fn(|_| Vec::new());
        for a in multi_indices(p, k) {
            let mono = monomial_of(&a, &vars, n);
            let w = factorial(k) / a.iter().map(|&e| factorial(e as usize)).product::<f64>();
            let fa = pd.partial_f(&a);
            let fia = pd.partial_f_inv(&a);
            for idx in 0..16 {
                f_terms[idx].push((mono.clone(), w * fa[(idx / 4, idx % 4)]));
                finv_terms[idx].push((mono.clone(), w * fia[(idx / 4, idx % 4)]));
            }
        }
        df.push(PolyMatrix::from_fn(4, 4, |i, j| Poly::from_terms(n, f_terms[4 * i + j].clone())));
        df_inv.push(PolyMatrix::from_fn(4, 4, |i, j| Poly::from_terms(n, finv_terms[4 * i + j].clone())));
    }
    for (pos, &j) in vars.iter().enumerate() {
        for k in 0..=nu {
            let mut comps: [Vec<(Monomial, f64)>; 6] = std::array::from_fn(|_| Vec::new());
            for a in multi_indices(p, k) {
                let mono = monomial_of(&a, &vars, n);
                let w = factorial(k) / a.iter().map(|&e| factorial(e as usize)).product::<f64>();
                let s = pd.partial_screw(pos, &a).to_array();
                for c in 0..6 {
                    comps[c].push((mono.clone(), w * s[c]));
                }
            }
            ds[j][k] = PolyVector6(std::array::from_fn(|c| Poly::from_terms(n, comps[c].clone())));
        }
    }
    Ok(DifferentialTable { cycle: l, base: q0.to_vec(), order: nu, df, df_inv, ds })
}

fn monomial_of(a: &[u8], vars: &[usize], n: usize) -> Monomial {
    let mut e = vec![0u8; n];
    for (pos, &k) in a.iter().enumerate() {
        e[vars[pos]] += k;
    }
    Monomial::from_exponents(&e)
}

/// All multi-indices of length `p` with total `k`.
pub fn multi_indices(p: usize, k: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; p];
    fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left as u8;
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur[pos] = e as u8;
            rec(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    if p == 0 {
        if k == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, k, &mut cur, &mut out);
    out
}

/// Memoised partial derivatives `∂ᵃf`, `∂ᵃf⁻¹`, `∂ᵃS'_i` with respect to cycle positions.
pub struct PartialTable {
    screws: Vec<Screw>,
    f: HashMap<Vec<u8>, Matrix4<f64>>,
    f_inv: HashMap<Vec<u8>, Matrix4<f64>>,
}

impl PartialTable {
    pub fn new(screws: Vec<Screw>) -> Self {
        Self { screws, f: HashMap::new(), f_inv: HashMap::new() }
    }

    /// `∂ᵃS'_i`: nested brackets, smallest position outermost; zero if `a` touches positions ≥ i.
    pub fn partial_screw(&self, i: usize, a: &[u8]) -> Screw {
        if a.iter().skip(i).any(|&e| e > 0) {
            return Screw::zero();
        }
        let mut s = self.screws[i];
        for m in (0..i).rev() {
            for _ in 0..a[m] {
                s = lie_bracket(&self.screws[m], &s);
            }
        }
        s
    }

    fn split(a: &[u8]) -> Option<(usize, Vec<u8>)> {
        let i = a.iter().rposition(|&e| e > 0)?;
        let mut rest = a.to_vec();
        rest[i] -= 1;
        Some((i, rest))
    }

    /// Sub-multi-indices `b ≤ a` with the product of binomials `C(a, b)`.
    fn below(a: &[u8]) -> Vec<(Vec<u8>, f64)> {
        let mut out = vec![(Vec::new(), 1.0)];
        for &e in a {
            let mut next = Vec::new();
            for (b, w) in &out {
                for k in 0..=e {
                    let mut nb = b.clone();
                    nb.push(k);
                    next.push((nb, w * binomial(e as usize, k as usize)));
                }
            }
            out = next;
        }
        out
    }

    pub fn partial_f(&mut self, a: &[u8]) -> Matrix4<f64> {
        if let Some(m) = self.f.get(a) {
            return *m;
        }
        let r = match Self::split(a) {
            None => Matrix4::identity(),
            Some((i, rest)) => {
                let mut acc = Matrix4::zeros();
                for (b, w) in Self::below(&rest) {
                    let s = self.partial_screw(i, &b);
                    if s.norm() == 0.0 {
                        continue;
                    }
                    let c: Vec<u8> = rest.iter().zip(&b).map(|(x, y)| x - y).collect();
                    acc += ScrewMatrix::from_screw(&s).matrix() * self.partial_f(&c) * w;
                }
                acc
            }
        };
        self.f.insert(a.to_vec(), r);
        r
    }

    pub fn partial_f_inv(&mut self, a: &[u8]) -> Matrix4<f64> {
        if let Some(m) = self.f_inv.get(a) {
            return *m;
        }
        let r = match Self::split(a) {
            None => Matrix4::identity(),
            Some((i, rest)) => {
                let mut acc = Matrix4::zeros();
                for (b, w) in Self::below(&rest) {
                    let s = self.partial_screw(i, &b);
                    if s.norm() == 0.0 {
                        continue;
                    }
                    let c: Vec<u8> = rest.iter().zip(&b).map(|(x, y)| x - y).collect();
                    acc -= self.partial_f_inv(&c) * ScrewMatrix::from_screw(&s).matrix() * w;
                }
                acc
            }
        };
        self.f_inv.insert(a.to_vec(), r);
        r
    }
}

fn check_minor(rows: &[usize], cols: &[usize], nrows: usize, ncols: usize) -> Result<(), DiffError> {
    if rows.len() != cols.len() || rows.is_empty() {
        return Err(DiffError::Index(format!("minor needs |rows| = |cols| > 0, got {} and {}", rows.len(), cols.len())));
    }
    if let Some(r) = rows.iter().find(|&&r| r >= nrows) {
        return Err(DiffError::Index(format!("row {r} of {nrows}")));
    }
    if let Some(c) = cols.iter().find(|&&c| c >= ncols) {
        return Err(DiffError::Index(format!("column {c} of {ncols}")));
    }
    Ok(())
}

/// Time derivatives of all stacked Jacobian columns: `out[l][j][m]` for cycle `l`, joint `j`.
pub fn stacked_screw_derivatives<R: TruncRing>(
    lk: &Linkage,
    q0: &[f64],
    jet: &[Vec<R>],
    order: usize,
    trunc: usize,
    one: &R,
) -> Vec<Vec<Vec<RingScrew<R>>>> {
    (0..lk.gamma())
        .map(|l| {
            let (screws, vars) = numeric_cycle(lk, l, q0);
            let d = cycle_screw_derivatives(&screws, &vars, jet, order, trunc, one);
            let mut per_joint = vec![vec![ring_zero(one); order + 1]; lk.n()];
            for (pos, &j) in vars.iter().enumerate() {
                per_joint[j] = d[pos].clone();
            }
            per_joint
        })
        .collect()
}

/// Column-wise time-Taylor series `Σ_m S⁽ᵐ⁾ tᵐ/m!` of a minor's entries.
pub fn minor_series_matrix<R: TruncRing>(
    derivs: &[Vec<Vec<RingScrew<R>>>],
    rows: &[usize],
    cols: &[usize],
    order: usize,
    one: &R,
) -> Vec<Vec<Series<R>>> {
    rows.iter()
        .map(|&r| {
            let (l, c) = (r / 6, r % 6);
            cols.iter()
                .map(|&j| {
                    let coeffs = (0..=order).map(|m| derivs[l][j][m][c].scaled(1.0 / factorial(m))).collect();
                    Series::new(one.zero_like(), coeffs)
                })
                .collect()
        })
        .collect()
}

/// `M⁽¹⁾..M⁽ᵛ⁾` of the minor `(rows, cols)` of the stacked Jacobian along a jet.
pub fn minor_time_derivatives(
    lk: &Linkage,
    jet: &Jet,
    rows: &[usize],
    cols: &[usize],
    nu: usize,
) -> Result<Vec<f64>, DiffError> {
    check_minor(rows, cols, 6 * lk.gamma(), lk.n())?;
    check_jet(jet, nu)?;
    let derivs = stacked_screw_derivatives(lk, &jet.base, &jet.derivatives, nu, usize::MAX, &1.0);
    let m = minor_series_matrix(&derivs, rows, cols, nu, &1.0);
    let det = det_cofactor(&m, nu);
    Ok((1..=nu).map(|k| det.coeff(k) * factorial(k)).collect())
}

/// `d¹m..dᵛm` of the minor `(rows, cols)`; `tables` holds one table per cycle.
pub fn minor_differentials(
    tables: &[DifferentialTable],
    rows: &[usize],
    cols: &[usize],
    nu: usize,
) -> Result<Vec<Poly>, DiffError> {
    let n = tables.first().map(|t| t.nvars()).ok_or_else(|| DiffError::Index("no tables".into()))?;
    check_minor(rows, cols, 6 * tables.len(), n)?;
    if let Some(t) = tables.iter().find(|t| t.order < nu) {
        return Err(DiffError::InsufficientOrder { have: t.order, need: nu });
    }
    let m = column_taylor_matrix(tables, rows, cols, nu);
    let det = m.det(nu).map_err(|e| DiffError::Index(e.to_string()))?;
    Ok((1..=nu).map(|k| det.homogeneous_component(k).scale(factorial(k))).collect())
}

/// Entries `Σ_{k≤ν} dᵏS/k!` of the selected rows and columns.
pub fn column_taylor_matrix(tables: &[DifferentialTable], rows: &[usize], cols: &[usize], nu: usize) -> PolyMatrix {
    let n = tables[0].nvars();
    PolyMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let (l, c) = (rows[i] / 6, rows[i] % 6);
        (0..=nu).fold(Poly::zero(n), |acc, k| acc.add(&tables[l].ds[cols[j]][k].0[c].scale(1.0 / factorial(k))))
    })
}

/// One table per cycle.
pub fn all_tables(lk: &Linkage, q0: &[f64], nu: usize) -> Result<Vec<DifferentialTable>, DiffError> {
    (0..lk.gamma()).map(|l| differential_table(lk, l, q0, nu)).collect()
}

/// `(H⁽ⁱ⁾, Bᵢ)` of every cycle along a ring-valued jet with `jet.len() ≥ i`.
pub fn stacked_constraint_derivative<R: TruncRing>(
    lk: &Linkage,
    q0: &[f64],
    jet: &[Vec<R>],
    i: usize,
    trunc: usize,
    one: &R,
) -> Vec<(RingScrew<R>, RingScrew<R>)> {
    (0..lk.gamma())
        .map(|l| {
            let (screws, vars) = numeric_cycle(lk, l, q0);
            let d = cycle_screw_derivatives(&screws, &vars, jet, i - 1, trunc, one);
            cycle_constraint_derivative(&d, &vars, jet, i, trunc, one)
        })
        .collect()
}
