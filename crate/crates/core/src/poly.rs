//! Sparse multivariate polynomials over `f64`, polynomial matrices and truncated determinants.

use nalgebra::DMatrix;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Coefficients below this magnitude are dropped after every operation.
pub const PRUNE: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("variable count mismatch: {0} vs {1}")]
    VariableCount(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cannot parse polynomial term `{0}`")]
    Parse(String),
}

/// Exponent vector, ordered graded-lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u8>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn from_exponents(e: &[u8]) -> Self {
        Monomial(e.to_vec())
    }

    pub fn exponents(&self) -> &[u8] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, o: &Self) -> Ordering {
        self.degree().cmp(&o.degree()).then_with(|| self.0.cmp(&o.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, i), 1.0);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            assert_eq!(m.nvars(), nvars, "monomial arity");
            *p.terms.entry(m).or_insert(0.0) += c;
        }
        p.prune();
        p
    }

    /// Linear form `Σ cᵢ xᵢ`.
    pub fn linear(coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        Self::from_terms(n, coeffs.iter().enumerate().map(|(i, &c)| (Monomial::var(n, i), c)))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn coeff_of(&self, exps: &[u8]) -> f64 {
        self.coeff(&Monomial::from_exponents(exps))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().next_back().map(|m| m.degree())
    }

    pub fn min_degree(&self) -> Option<usize> {
        self.terms.keys().next().map(|m| m.degree())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&Monomial::one(self.nvars))
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        let e = self.terms.entry(m).or_insert(0.0);
        *e += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PRUNE);
    }

    fn check(&self, o: &Poly) -> Result<(), PolyError> {
        if self.nvars == o.nvars {
            Ok(())
        } else {
            Err(PolyError::VariableCount(self.nvars, o.nvars))
        }
    }

    pub fn try_add(&self, o: &Poly) -> Result<Poly, PolyError> {
        self.check(o)?;
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), *c);
        }
        r.prune();
        Ok(r)
    }

    pub fn try_mul(&self, o: &Poly, truncate_at: usize) -> Result<Poly, PolyError> {
        self.check(o)?;
        let mut r = Poly::zero(self.nvars);
        for (ma, ca) in &self.terms {
            let da = ma.degree();
            if da > truncate_at {
                break;
            }
            for (mb, cb) in &o.terms {
                if da + mb.degree() > truncate_at {
                    break;
                }
                r.add_term(ma.mul(mb), ca * cb);
            }
        }
        r.prune();
        Ok(r)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        self.try_add(o).expect("poly add")
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        self.try_mul(o, usize::MAX).expect("poly mul")
    }

    pub fn mul_trunc(&self, o: &Poly, truncate_at: usize) -> Poly {
        self.try_mul(o, truncate_at).expect("poly mul")
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut r = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            r.terms.insert(m.clone(), c * s);
        }
        r.prune();
        r
    }

    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(self.nvars, 1.0), |acc, _| acc.mul(self))
    }

    pub fn homogeneous_component(&self, k: usize) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == k)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    pub fn truncate(&self, max_degree: usize) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() <= max_degree)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    pub fn is_homogeneous(&self, k: usize) -> bool {
        self.terms.keys().all(|m| m.degree() == k)
    }

    /// Drops coefficients with magnitude below `tol` relative to the largest one.
    pub fn cleaned(&self, tol: f64) -> Poly {
        let cut = tol * self.max_abs_coeff();
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > cut)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars, "evaluation point arity");
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    /// Largest magnitude among the individual terms `c·x^a`.
    pub fn max_term_at(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(0.0, |a, (m, c)| a.max((c * m.eval(x)).abs()))
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut r = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e > 0 {
                let mut d = m.clone();
                d.0[i] -= 1;
                r.add_term(d, c * e as f64);
            }
        }
        r.prune();
        r
    }

    /// Substitutes `x_i = images[i]`.
    pub fn compose(&self, images: &[Poly]) -> Poly {
        assert_eq!(images.len(), self.nvars);
        let m = images.first().map(|p| p.nvars).unwrap_or(0);
        let mut r = Poly::zero(m);
        let mut powers: Vec<Vec<Poly>> = images.iter().map(|p| vec![Poly::constant(m, 1.0), p.clone()]).collect();
        for (mono, c) in &self.terms {
            let mut t = Poly::constant(m, *c);
            for (i, &e) in mono.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap().mul(&images[i]);
                    powers[i].push(next);
                }
                t = t.mul(&powers[i][e as usize]);
            }
            r = r.add(&t);
        }
        r
    }

    /// Re-embeds into a larger variable set, mapping variable `i` to `map[i]`.
    pub fn embed(&self, nvars: usize, map: &[usize]) -> Poly {
        let terms = self.terms.iter().map(|(m, c)| {
            let mut e = vec![0u8; nvars];
            for (i, &k) in m.0.iter().enumerate() {
                e[map[i]] += k;
            }
            (Monomial(e), *c)
        });
        Poly::from_terms(nvars, terms)
    }

    /// Parses sums of products of numbers and powers `xi^k`, including the canonical text form.
    pub fn parse(s: &str, nvars: usize) -> Result<Poly, PolyError> {
        let err = || PolyError::Parse(s.trim().into());
        let compact: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err());
        }
        let mut terms: Vec<(f64, String)> = Vec::new();
        let mut sign = 1.0;
        let mut cur = String::new();
        for (i, &ch) in compact.iter().enumerate() {
            let prev = if i > 0 { Some(compact[i - 1]) } else { None };
            let in_exponent = matches!(prev, Some('e' | 'E')) && i >= 2 && compact[i - 2].is_ascii_digit();
            if (ch == '+' || ch == '-') && !in_exponent && prev != Some('^') {
                if !cur.is_empty() {
                    terms.push((sign, std::mem::take(&mut cur)));
                    sign = 1.0;
                }
                if ch == '-' {
                    sign = -sign;
                }
            } else {
                cur.push(ch);
            }
        }
        if cur.is_empty() {
            return Err(err());
        }
        terms.push((sign, cur));
        let mut p = Poly::zero(nvars);
        for (sign, term) in terms {
            let mut c = sign;
            let mut e = vec![0u8; nvars];
            for f in term.split('*') {
                if let Some(rest) = f.strip_prefix('x') {
                    let (name, pow) = match rest.split_once('^') {
                        Some((v, k)) => (v, k.parse::<u8>().map_err(|_| err())?),
                        None => (rest, 1),
                    };
                    let idx: usize = name.parse().ok().filter(|&i: &usize| i >= 1 && i <= nvars).ok_or_else(err)?;
                    e[idx - 1] += pow;
                } else {
                    c *= f.parse::<f64>().map_err(|_| err())?;
                }
            }
            p.add_term(Monomial(e), c);
        }
        p.prune();
        Ok(p)
    }
}

fn fmt_coeff(c: f64) -> String {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{c:?}")
    }
}

impl fmt::Display for Poly {
    /// Highest degree first, terms joined by ` + `.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", fmt_coeff(*c))?;
            let factors: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, e) })
                .collect();
            if !factors.is_empty() {
                write!(f, " * {}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Commutative coefficient ring with an optional degree truncation on products.
pub trait TruncRing: Clone + fmt::Debug {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn is_zero_elem(&self) -> bool;
    fn plus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self, truncate_at: usize) -> Self;
    fn scaled(&self, c: f64) -> Self;

    fn minus(&self, o: &Self) -> Self {
        self.plus(&o.scaled(-1.0))
    }
}

impl TruncRing for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn is_zero_elem(&self) -> bool {
        *self == 0.0
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn times(&self, o: &Self, _: usize) -> Self {
        self * o
    }
    fn scaled(&self, c: f64) -> Self {
        self * c
    }
}

impl TruncRing for Poly {
    fn zero_like(&self) -> Self {
        Poly::zero(self.nvars)
    }
    fn one_like(&self) -> Self {
        Poly::constant(self.nvars, 1.0)
    }
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn times(&self, o: &Self, truncate_at: usize) -> Self {
        self.mul_trunc(o, truncate_at)
    }
    fn scaled(&self, c: f64) -> Self {
        self.scale(c)
    }
}

/// Truncated power series in one auxiliary variable `t` with ring coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<R> {
    zero: R,
    coeffs: Vec<R>,
}

impl<R: TruncRing> Series<R> {
    pub fn new(zero: R, coeffs: Vec<R>) -> Self {
        let mut s = Self { zero, coeffs };
        s.trim();
        s
    }

    pub fn constant(c: R) -> Self {
        Self::new(c.zero_like(), vec![c])
    }

    pub fn coeff(&self, k: usize) -> R {
        self.coeffs.get(k).cloned().unwrap_or_else(|| self.zero.clone())
    }

    pub fn coeffs(&self) -> &[R] {
        &self.coeffs
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero_elem()) {
            self.coeffs.pop();
        }
    }
}

impl<R: TruncRing> TruncRing for Series<R> {
    fn zero_like(&self) -> Self {
        Self { zero: self.zero.clone(), coeffs: Vec::new() }
    }
    fn one_like(&self) -> Self {
        Self::constant(self.zero.one_like())
    }
    fn is_zero_elem(&self) -> bool {
        self.coeffs.is_empty()
    }
    fn plus(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new(self.zero.clone(), (0..n).map(|k| self.coeff(k).plus(&o.coeff(k))).collect())
    }
    fn times(&self, o: &Self, truncate_at: usize) -> Self {
        if self.coeffs.is_empty() || o.coeffs.is_empty() {
            return self.zero_like();
        }
        let n = (self.coeffs.len() + o.coeffs.len() - 1).min(truncate_at.saturating_add(1));
        let mut out = vec![self.zero.clone(); n];
        for (i, a) in self.coeffs.iter().enumerate().take(n) {
            if a.is_zero_elem() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate().take(n - i) {
                out[i + j] = out[i + j].plus(&a.times(b, usize::MAX));
            }
        }
        Self::new(self.zero.clone(), out)
    }
    fn scaled(&self, c: f64) -> Self {
        Self::new(self.zero.clone(), self.coeffs.iter().map(|a| a.scaled(c)).collect())
    }
}

/// Determinant by Laplace expansion with memoisation over column subsets.
pub fn det_cofactor<R: TruncRing>(m: &[Vec<R>], truncate_at: usize) -> R {
    let n = m.len();
    assert!(n > 0 && n <= 20, "determinant size {n} unsupported");
    assert!(m.iter().all(|r| r.len() == n), "square matrix required");
    let one = m[0][0].one_like();
    let full = (1usize << n) - 1;
    let mut table: Vec<Option<R>> = vec![None; full + 1];
    table[0] = Some(one);
    for mask in 1..=full {
        let r = mask.count_ones() as usize;
        if r > n {
            continue;
        }
        let row = &m[r - 1];
        let mut acc = row[0].zero_like();
        let mut pos = 0;
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            let entry = &row[j];
            if !entry.is_zero_elem() {
                if let Some(sub) = &table[mask & !(1 << j)] {
                    if !sub.is_zero_elem() {
                        let term = entry.times(sub, truncate_at);
                        let sign = (pos + r - 1) % 2 == 0;
                        acc = if sign { acc.plus(&term) } else { acc.minus(&term) };
                    }
                }
            }
            pos += 1;
        }
        table[mask] = Some(acc);
    }
    table[full].take().expect("full subset computed")
}

/// Determinant by the permutation sum; intended for small matrices.
pub fn det_leibniz<R: TruncRing>(m: &[Vec<R>], truncate_at: usize) -> R {
    let n = m.len();
    assert!(n > 0 && m.iter().all(|r| r.len() == n), "square matrix required");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut acc = m[0][0].zero_like();
    permute(&mut perm, 0, &mut |p| {
        let mut term = m[0][0].one_like();
        for (i, &j) in p.iter().enumerate() {
            term = term.times(&m[i][j], truncate_at);
        }
        acc = if parity(p) { acc.minus(&term) } else { acc.plus(&term) };
    });
    acc
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

fn parity(p: &[usize]) -> bool {
    let mut odd = false;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                odd = !odd;
            }
        }
    }
    odd
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Poly>,
}

impl PolyMatrix {
    pub fn zeros(nvars: usize, rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![Poly::zero(nvars); rows * cols] }
    }

    pub fn identity(nvars: usize, n: usize) -> Self {
        let mut m = Self::zeros(nvars, n, n);
        for i in 0..n {
            m.set(i, i, Poly::constant(nvars, 1.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Poly) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn from_numeric(nvars: usize, m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| Poly::constant(nvars, m[(i, j)]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn entries(&self) -> &[Poly] {
        &self.entries
    }

    fn zip(&self, o: &Self, f: impl Fn(&Poly, &Poly) -> Poly) -> Result<Self, PolyError> {
        if self.rows != o.rows || self.cols != o.cols {
            return Err(PolyError::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&o.entries).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, o: &Self) -> Result<Self, PolyError> {
        self.zip(o, |a, b| a.add(b))
    }

    pub fn sub(&self, o: &Self) -> Result<Self, PolyError> {
        self.zip(o, |a, b| a.sub(b))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|p| p.scale(s))
    }

    pub fn map(&self, f: impl Fn(&Poly) -> Poly) -> Self {
        Self { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(f).collect() }
    }

    pub fn mul(&self, o: &Self, truncate_at: usize) -> Result<Self, PolyError> {
        if self.cols != o.rows {
            return Err(PolyError::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        let nv = self.entries.first().map(|p| p.nvars).unwrap_or(0);
        Ok(Self::from_fn(self.rows, o.cols, |i, j| {
            let mut acc = Poly::zero(nv);
            for k in 0..self.cols {
                let a = self.get(i, k);
                let b = o.get(k, j);
                if !a.is_zero() && !b.is_zero() {
                    acc = acc.add(&a.mul_trunc(b, truncate_at));
                }
            }
            acc
        }))
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }

    pub fn homogeneous_component(&self, k: usize) -> Self {
        self.map(|p| p.homogeneous_component(k))
    }

    pub fn is_homogeneous(&self, k: usize) -> bool {
        self.entries.iter().all(|p| p.is_homogeneous(k))
    }

    pub fn det(&self, truncate_at: usize) -> Result<Poly, PolyError> {
        if self.rows != self.cols || self.rows == 0 {
            return Err(PolyError::Dimension(format!("non-square {}x{}", self.rows, self.cols)));
        }
        Ok(det_cofactor(&self.to_rows(), truncate_at))
    }

    pub fn det_leibniz(&self, truncate_at: usize) -> Result<Poly, PolyError> {
        if self.rows != self.cols || self.rows == 0 {
            return Err(PolyError::Dimension(format!("non-square {}x{}", self.rows, self.cols)));
        }
        Ok(det_leibniz(&self.to_rows(), truncate_at))
    }

    pub fn to_rows(&self) -> Vec<Vec<Poly>> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j).clone()).collect()).collect()
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&o.entries)
            .map(|(a, b)| a.sub(b).max_abs_coeff())
            .fold(0.0, f64::max)
    }
}

/// Six polynomial screw coordinates `(w; v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyVector6(pub [Poly; 6]);

impl PolyVector6 {
    pub fn zeros(nvars: usize) -> Self {
        PolyVector6(std::array::from_fn(|_| Poly::zero(nvars)))
    }

    pub fn constant(nvars: usize, s: &[f64; 6]) -> Self {
        PolyVector6(std::array::from_fn(|i| Poly::constant(nvars, s[i])))
    }

    /// Hat form as a 4×4 polynomial matrix.
    pub fn hat(&self) -> PolyMatrix {
        let nv = self.0[0].nvars();
        let [wx, wy, wz, vx, vy, vz] = &self.0;
        let z = Poly::zero(nv);
        let e = [
            [z.clone(), wz.scale(-1.0), wy.clone(), vx.clone()],
            [wz.clone(), z.clone(), wx.scale(-1.0), vy.clone()],
            [wy.scale(-1.0), wx.clone(), z.clone(), vz.clone()],
            [z.clone(), z.clone(), z.clone(), z.clone()],
        ];
        PolyMatrix::from_fn(4, 4, |i, j| e[i][j].clone())
    }

    pub fn eval(&self, x: &[f64]) -> [f64; 6] {
        std::array::from_fn(|i| self.0[i].eval(x))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|p| p.is_zero())
    }
}
