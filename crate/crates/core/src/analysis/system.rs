use crate::differentials::{all_tables, column_taylor_matrix, DiffError, DifferentialTable};
use crate::linkage::{numeric_rank, Linkage};
use crate::poly::Poly;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on the number of minor pairs assembled into one system.
pub const MAX_MINOR_PAIRS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Cspace,
    Stratum,
    ConeCondition,
}

#[derive(Debug, Error, PartialEq)]
pub enum SystemError {
    #[error(transparent)]
    Differential(#[from] DiffError),
    #[error("minor order k = {k} outside 1..={max}")]
    MinorOrder { k: usize, max: usize },
    #[error("base point has rank {rank} and does not lie in L_{k}")]
    NotInStratum { k: usize, rank: usize },
    #[error("{0} minor pairs exceed the assembly limit")]
    TooManyMinors(usize),
}

/// Polynomial equations in the direction variables `x1..xn`, all vanishing at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySystem {
    pub nvars: usize,
    pub equations: Vec<Poly>,
    pub provenance: Vec<String>,
    pub origin: Vec<f64>,
    pub order: usize,
    pub kind: SystemKind,
}

impl PolySystem {
    pub fn new(nvars: usize, origin: Vec<f64>, order: usize, kind: SystemKind) -> Self {
        Self { nvars, equations: Vec::new(), provenance: Vec::new(), origin, order, kind }
    }

    pub fn push(&mut self, eq: Poly, label: impl Into<String>) {
        assert_eq!(eq.nvars(), self.nvars);
        self.equations.push(eq);
        self.provenance.push(label.into());
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn residual(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.equations.iter().map(|p| p.eval(x)))
    }

    pub fn dump(&self) -> String {
        let mut out = format!(
            "# kind {:?}, order {}, {} variables, {} equations\n",
            self.kind,
            self.order,
            self.nvars,
            self.len()
        );
        for (eq, label) in self.equations.iter().zip(&self.provenance) {
            out.push_str(&format!("# {label}\n{eq}\n"));
        }
        out
    }

    /// Equations with their partial derivatives precomputed.
    pub fn compile(&self) -> CompiledSystem {
        CompiledSystem {
            nvars: self.nvars,
            equations: self.equations.clone(),
            gradients: self
                .equations
                .iter()
                .map(|p| (0..self.nvars).map(|i| p.derivative(i)).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledSystem {
    pub nvars: usize,
    equations: Vec<Poly>,
    gradients: Vec<Vec<Poly>>,
}

impl CompiledSystem {
    pub fn residual(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.equations.len(), self.equations.iter().map(|p| p.eval(x)))
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.equations.len(), self.nvars, |i, j| self.gradients[i][j].eval(x))
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    /// Adds the affine equation `x_i − value = 0`.
    pub fn with_fixed(&self, i: usize, value: f64) -> CompiledSystem {
        let mut out = self.clone();
        let eq = Poly::var(self.nvars, i).sub(&Poly::constant(self.nvars, value));
        out.gradients.push((0..self.nvars).map(|k| eq.derivative(k)).collect());
        out.equations.push(eq);
        out
    }
}

/// Nontrivial rotation and translation entries of the truncated loop expansions.
pub fn cspace_from_tables(tables: &[DifferentialTable], nu: usize) -> PolySystem {
    let n = tables[0].nvars();
    let mut sys = PolySystem::new(n, tables[0].base.clone(), nu, SystemKind::Cspace);
    for t in tables {
        let sum = t.taylor_sum(nu);
        for i in 0..3 {
            for j in 0..4 {
                let p = sum.get(i, j);
                if !p.is_zero() {
                    sys.push(p.clone(), format!("cycle {} entry ({},{})", t.cycle + 1, i + 1, j + 1));
                }
            }
        }
    }
    sys
}

pub fn build_cspace_system(lk: &Linkage, q0: &[f64], nu: usize) -> Result<PolySystem, SystemError> {
    let tables = all_tables(lk, q0, nu)?;
    Ok(cspace_from_tables(&tables, nu))
}

/// Row and column indices of the stacked Jacobian that are not identically zero to order `nu`.
pub fn structural_support(tables: &[DifferentialTable], nu: usize) -> (Vec<usize>, Vec<usize>) {
    let n = tables[0].nvars();
    let all_rows: Vec<usize> = (0..6 * tables.len()).collect();
    let all_cols: Vec<usize> = (0..n).collect();
    let m = column_taylor_matrix(tables, &all_rows, &all_cols, nu);
    let rows = all_rows.iter().copied().filter(|&r| (0..n).any(|c| !m.get(r, c).is_zero())).collect();
    let cols = all_cols.iter().copied().filter(|&c| all_rows.iter().any(|&r| !m.get(r, c).is_zero())).collect();
    (rows, cols)
}

pub fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(items: &[usize], start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, i + 1, k, cur, out);
            cur.pop();
        }
    }
    rec(items, 0, k, &mut cur, &mut out);
    out
}

pub fn binomial_count(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Minor pairs `(rows, cols)` after pruning structurally zero rows and columns.
pub fn minor_pairs(rows: &[usize], cols: &[usize], k: usize) -> Result<Vec<(Vec<usize>, Vec<usize>)>, SystemError> {
    let count = binomial_count(rows.len(), k).saturating_mul(binomial_count(cols.len(), k));
    if count > MAX_MINOR_PAIRS {
        return Err(SystemError::TooManyMinors(count));
    }
    let rs = subsets(rows, k);
    let cs = subsets(cols, k);
    Ok(rs.iter().flat_map(|r| cs.iter().map(move |c| (r.clone(), c.clone()))).collect())
}

pub fn check_stratum(lk: &Linkage, q0: &[f64], k: usize) -> Result<usize, SystemError> {
    let max = (6 * lk.gamma()).min(lk.n());
    if k < 1 || k > max {
        return Err(SystemError::MinorOrder { k, max });
    }
    let rank = numeric_rank(&lk.stacked_jacobian(q0), crate::linkage::DEFAULT_RANK_TOL).rank;
    if rank >= k {
        return Err(SystemError::NotInStratum { k, rank });
    }
    Ok(rank)
}

fn fmt_idx(v: &[usize]) -> String {
    v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
}

pub fn build_stratum_system(lk: &Linkage, q0: &[f64], k: usize, nu: usize) -> Result<PolySystem, SystemError> {
    check_stratum(lk, q0, k)?;
    let tables = all_tables(lk, q0, nu)?;
    let mut sys = cspace_from_tables(&tables, nu);
    sys.kind = SystemKind::Stratum;
    let (rows, cols) = structural_support(&tables, nu);
    for (r, c) in minor_pairs(&rows, &cols, k)? {
        let m = column_taylor_matrix(&tables, &r, &c, nu);
        let det = m.det(nu).expect("square minor");
        let eq = (1..=nu).fold(Poly::zero(lk.n()), |acc, d| acc.add(&det.homogeneous_component(d)));
        if !eq.is_zero() {
            sys.push(eq, format!("minor rows [{}] cols [{}]", fmt_idx(&r), fmt_idx(&c)));
        }
    }
    Ok(sys)
}
