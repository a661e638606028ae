//! Block-form cone programs.
//!
//! A program is `minimize cᵀx` over a flat real vector `x` subject to
//!
//! * LMI blocks `C_b + Σ_terms F_t(x) ⪰ 0` (Hermitian over the scalar field `T`)
//! * linear rows `g_j + a_jᵀx ≥ 0`.
//!
//! Matrix variables are stored through a basis of sparse Hermitian matrices so
//! that both complex Hermitian and real symmetric (or real-embedded) variables
//! share one code path.

use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{embed_general, C64};

/// Scalar field of the LMI blocks: `f64` or `Complex64`.
pub trait Field: ComplexField<RealField = f64> + Copy + Send + Sync + std::fmt::Debug + 'static {
    /// Basis of the real vector space of n×n Hermitian matrices.
    fn hermitian_basis(n: usize) -> Vec<Sparse<Self>>;
}

impl Field for f64 {
    fn hermitian_basis(n: usize) -> Vec<Sparse<f64>> {
        let mut out: Vec<Sparse<f64>> = (0..n).map(|i| vec![(i, i, 1.0)]).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(vec![(i, j, 1.0), (j, i, 1.0)]);
            }
        }
        out
    }
}

impl Field for C64 {
    fn hermitian_basis(n: usize) -> Vec<Sparse<C64>> {
        let one = C64::new(1.0, 0.0);
        let j_ = C64::new(0.0, 1.0);
        let mut out: Vec<Sparse<C64>> = (0..n).map(|i| vec![(i, i, one)]).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(vec![(i, j, one), (j, i, one)]);
                out.push(vec![(i, j, j_), (j, i, -j_)]);
            }
        }
        out
    }
}

/// Coordinate list; both triangles present.
pub type Sparse<T> = Vec<(usize, usize, T)>;

pub fn sparse_to_dense<T: Field>(s: &Sparse<T>, n: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(n, n);
    for &(i, j, v) in s {
        m[(i, j)] += v;
    }
    m
}

/// Re Tr(S · M)
pub fn sparse_inner<T: Field>(s: &Sparse<T>, m: &DMatrix<T>) -> f64 {
    s.iter().map(|&(p, q, v)| (v * m[(q, p)]).real()).sum()
}

/// Re Tr(A B)
pub fn dense_inner<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(&x, &y)| (x * y).real()).sum()
}

#[derive(Clone, Debug)]
pub enum GroupKind<T: Field> {
    Matrix { dim: usize, basis: Arc<Vec<Sparse<T>>> },
    Scalar,
}

#[derive(Clone, Debug)]
pub struct VarGroup<T: Field> {
    pub name: String,
    pub offset: usize,
    pub kind: GroupKind<T>,
}

impl<T: Field> VarGroup<T> {
    pub fn len(&self) -> usize {
        match &self.kind {
            GroupKind::Matrix { basis, .. } => basis.len(),
            GroupKind::Scalar => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub enum Term<T: Field> {
    /// coeff · B X Bᴴ for matrix group X; `map = None` means B = I.
    Congruence { group: usize, coeff: f64, map: Option<Arc<DMatrix<T>>> },
    /// x_var · D
    Single { var: usize, matrix: Sparse<T> },
}

#[derive(Clone, Debug)]
pub struct LmiBlock<T: Field> {
    pub name: String,
    pub dim: usize,
    pub constant: DMatrix<T>,
    pub terms: Vec<Term<T>>,
}

#[derive(Clone, Debug)]
pub struct LinearRow {
    pub name: String,
    pub constant: f64,
    pub coeffs: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct ConeProgram<T: Field> {
    pub groups: Vec<VarGroup<T>>,
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock<T>>,
    pub rows: Vec<LinearRow>,
    bases: Vec<(usize, Arc<Vec<Sparse<T>>>)>,
}

impl<T: Field> Default for ConeProgram<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Field> ConeProgram<T> {
    pub fn new() -> Self {
        Self { groups: Vec::new(), objective: Vec::new(), blocks: Vec::new(), rows: Vec::new(), bases: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn basis_for(&mut self, dim: usize) -> Arc<Vec<Sparse<T>>> {
        if let Some((_, b)) = self.bases.iter().find(|(d, _)| *d == dim) {
            return b.clone();
        }
        let b = Arc::new(T::hermitian_basis(dim));
        self.bases.push((dim, b.clone()));
        b
    }

    fn push_group(&mut self, name: &str, kind: GroupKind<T>) -> usize {
        let offset = self.num_vars();
        let g = VarGroup { name: name.to_string(), offset, kind };
        self.objective.resize(offset + g.len(), 0.0);
        self.groups.push(g);
        self.groups.len() - 1
    }

    /// Hermitian matrix variable; returns its group index.
    pub fn add_matrix(&mut self, name: &str, dim: usize) -> usize {
        let basis = self.basis_for(dim);
        self.push_group(name, GroupKind::Matrix { dim, basis })
    }

    /// Matrix variable with a caller-supplied basis (used by the real embedding).
    pub fn add_matrix_with_basis(&mut self, name: &str, dim: usize, basis: Arc<Vec<Sparse<T>>>) -> usize {
        self.push_group(name, GroupKind::Matrix { dim, basis })
    }

    pub fn add_scalar(&mut self, name: &str) -> usize {
        self.push_group(name, GroupKind::Scalar)
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.name == name)
    }

    pub fn offset(&self, group: usize) -> usize {
        self.groups[group].offset
    }

    pub fn matrix_dim(&self, group: usize) -> Result<usize> {
        match &self.groups[group].kind {
            GroupKind::Matrix { dim, .. } => Ok(*dim),
            GroupKind::Scalar => Err(Error::Dimension(format!("`{}` is a scalar", self.groups[group].name))),
        }
    }

    /// Coefficients of the linear functional X ↦ Re Tr(A X) on a matrix group.
    pub fn trace_coeffs(&self, group: usize, a: &DMatrix<T>) -> Vec<(usize, f64)> {
        let g = &self.groups[group];
        match &g.kind {
            GroupKind::Matrix { basis, .. } => basis
                .iter()
                .enumerate()
                .filter_map(|(i, e)| {
                    let v = sparse_inner(e, a);
                    (v != 0.0).then_some((g.offset + i, v))
                })
                .collect(),
            GroupKind::Scalar => {
                vec![(g.offset, a[(0, 0)].real())]
            }
        }
    }

    /// Adds `weight · Tr(X)` (or `weight · x` for scalars) to the objective.
    pub fn add_objective_trace(&mut self, group: usize, weight: f64) {
        let n = match &self.groups[group].kind {
            GroupKind::Matrix { dim, .. } => *dim,
            GroupKind::Scalar => 1,
        };
        for (i, v) in self.trace_coeffs(group, &DMatrix::identity(n, n)) {
            self.objective[i] += weight * v;
        }
    }

    pub fn add_lmi(&mut self, name: &str, constant: DMatrix<T>, terms: Vec<Term<T>>) -> Result<()> {
        let dim = constant.nrows();
        if constant.ncols() != dim {
            return Err(Error::Dimension(format!("block `{name}`: constant not square")));
        }
        for t in &terms {
            let ok = match t {
                Term::Congruence { group, map, .. } => {
                    let gd = self.matrix_dim(*group)?;
                    match map {
                        Some(b) => b.nrows() == dim && b.ncols() == gd,
                        None => gd == dim,
                    }
                }
                Term::Single { var, matrix } => {
                    *var < self.num_vars() && matrix.iter().all(|&(i, j, _)| i < dim && j < dim)
                }
            };
            if !ok {
                return Err(Error::Dimension(format!("block `{name}`: term shape mismatch")));
            }
        }
        self.blocks.push(LmiBlock { name: name.to_string(), dim, constant, terms });
        Ok(())
    }

    pub fn add_row(&mut self, name: &str, constant: f64, coeffs: Vec<(usize, f64)>) -> Result<()> {
        if coeffs.iter().any(|&(i, _)| i >= self.num_vars()) {
            return Err(Error::Dimension(format!("row `{name}` references unknown variable")));
        }
        self.rows.push(LinearRow { name: name.to_string(), constant, coeffs });
        Ok(())
    }

    /// Value of a matrix group, Σ_a x_a E_a.
    pub fn matrix_value(&self, group: usize, x: &[f64]) -> DMatrix<T> {
        let g = &self.groups[group];
        match &g.kind {
            GroupKind::Matrix { dim, basis } => {
                let mut m = DMatrix::zeros(*dim, *dim);
                for (a, e) in basis.iter().enumerate() {
                    let xa = T::from_real(x[g.offset + a]);
                    for &(p, q, v) in e {
                        m[(p, q)] += v * xa;
                    }
                }
                m
            }
            GroupKind::Scalar => DMatrix::from_element(1, 1, T::from_real(x[g.offset])),
        }
    }

    /// Linear part of block b at x.
    pub fn block_linear(&self, b: usize, x: &[f64]) -> DMatrix<T> {
        let blk = &self.blocks[b];
        let mut out = DMatrix::zeros(blk.dim, blk.dim);
        for t in &blk.terms {
            match t {
                Term::Congruence { group, coeff, map } => {
                    let xm = self.matrix_value(*group, x);
                    let c = T::from_real(*coeff);
                    match map {
                        Some(bm) => out += (&**bm * xm * bm.adjoint()) * c,
                        None => out += xm * c,
                    }
                }
                Term::Single { var, matrix } => {
                    let xv = T::from_real(x[*var]);
                    for &(p, q, v) in matrix {
                        out[(p, q)] += v * xv;
                    }
                }
            }
        }
        out
    }

    /// C_b + F_b(x)
    pub fn eval_block(&self, b: usize, x: &[f64]) -> DMatrix<T> {
        &self.blocks[b].constant + self.block_linear(b, x)
    }

    pub fn row_linear(&self, j: usize, x: &[f64]) -> f64 {
        self.rows[j].coeffs.iter().map(|&(i, v)| v * x[i]).sum()
    }

    pub fn eval_row(&self, j: usize, x: &[f64]) -> f64 {
        self.rows[j].constant + self.row_linear(j, x)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Adjoint of the block map: out_i += ⟨F_{b,i}, Z⟩.
    pub fn block_adjoint(&self, b: usize, z: &DMatrix<T>, out: &mut [f64]) {
        for t in &self.blocks[b].terms {
            match t {
                Term::Congruence { group, coeff, map } => {
                    let g = &self.groups[*group];
                    let y = match map {
                        Some(bm) => bm.adjoint() * z * &**bm,
                        None => z.clone(),
                    };
                    if let GroupKind::Matrix { basis, .. } = &g.kind {
                        for (a, e) in basis.iter().enumerate() {
                            out[g.offset + a] += coeff * sparse_inner(e, &y);
                        }
                    }
                }
                Term::Single { var, matrix } => out[*var] += sparse_inner(matrix, z),
            }
        }
    }

    /// Smallest eigenvalue over all blocks and rows at x (negative means violated).
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for b in 0..self.blocks.len() {
            let v = self.eval_block(b, x);
            let h = (&v + v.adjoint()) * T::from_real(0.5);
            let ev = h.symmetric_eigenvalues();
            m = m.min(ev.iter().copied().fold(f64::INFINITY, f64::min));
        }
        for j in 0..self.rows.len() {
            m = m.min(self.eval_row(j, x));
        }
        m
    }
}

fn embed_sparse(s: &Sparse<C64>, n: usize) -> Sparse<f64> {
    let mut out = Vec::with_capacity(4 * s.len());
    for &(p, q, v) in s {
        if v.re != 0.0 {
            out.push((p, q, v.re));
            out.push((p + n, q + n, v.re));
        }
        if v.im != 0.0 {
            out.push((p, q + n, -v.im));
            out.push((p + n, q, v.im));
        }
    }
    out
}

impl ConeProgram<C64> {
    /// Real symmetric embedding with the same variable vector: every complex
    /// n×n block becomes a 2n×2n real block via [[Re, −Im],[Im, Re]].
    pub fn to_real(&self) -> ConeProgram<f64> {
        let mut out = ConeProgram::<f64>::new();
        let mut cache: Vec<(*const Vec<Sparse<C64>>, Arc<Vec<Sparse<f64>>>)> = Vec::new();
        for g in &self.groups {
            match &g.kind {
                GroupKind::Matrix { dim, basis } => {
                    let key = Arc::as_ptr(basis);
                    let eb = match cache.iter().find(|(k, _)| *k == key) {
                        Some((_, e)) => e.clone(),
                        None => {
                            let e = Arc::new(basis.iter().map(|s| embed_sparse(s, *dim)).collect::<Vec<_>>());
                            cache.push((key, e.clone()));
                            e
                        }
                    };
                    out.add_matrix_with_basis(&g.name, 2 * dim, eb);
                }
                GroupKind::Scalar => {
                    out.add_scalar(&g.name);
                }
            }
        }
        out.objective = self.objective.clone();
        let mut maps: Vec<(*const DMatrix<C64>, Arc<DMatrix<f64>>)> = Vec::new();
        for blk in &self.blocks {
            let terms = blk
                .terms
                .iter()
                .map(|t| match t {
                    Term::Congruence { group, coeff, map } => Term::Congruence {
                        group: *group,
                        coeff: *coeff,
                        map: map.as_ref().map(|m| {
                            let key = Arc::as_ptr(m);
                            match maps.iter().find(|(k, _)| *k == key) {
                                Some((_, e)) => e.clone(),
                                None => {
                                    let e = Arc::new(embed_general(m));
                                    maps.push((key, e.clone()));
                                    e
                                }
                            }
                        }),
                    },
                    Term::Single { var, matrix } => Term::Single { var: *var, matrix: embed_sparse(matrix, blk.dim) },
                })
                .collect();
            out.blocks.push(LmiBlock {
                name: blk.name.clone(),
                dim: 2 * blk.dim,
                constant: embed_general(&blk.constant),
                terms,
            });
        }
        out.rows = self.rows.clone();
        out
    }
}
