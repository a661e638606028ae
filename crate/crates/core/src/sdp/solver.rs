//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! with Nesterov–Todd scaling and Mehrotra predictor-corrector steps.
//!
//! In conic form the program is `min cᵀx  s.t.  s = h − Gx ∈ K` with
//! `h` the block constants and `−G` the linear part, so `s` is the LMI value
//! itself. Scaling matrices are kept in factored form `W = rᴴ` and updated
//! multiplicatively, which keeps the iterates well conditioned close to the
//! boundary of the cone.

use std::collections::HashMap;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use nalgebra::{Cholesky, DMatrix, SVD};

use super::program::{dense_inner, sparse_inner, sparse_to_dense, ConeProgram, GroupKind, Sparse, Term};
use super::Field;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Relative to 1 + |primal objective|.
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iters: usize,
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { gap_tol: 1e-7, feas_tol: 1e-8, max_iters: 200, step_fraction: 0.98 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// The LMI system has no solution; `block_duals`/`row_duals` hold a certificate
    /// `Z ⪰ 0` with `⟨C, Z⟩ = −1` and vanishing adjoint.
    Infeasible,
    /// `x` holds a recession direction with `cᵀx = −1`.
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Copy, Debug)]
pub struct IterateRecord {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// ⟨s, z⟩ + τκ of the embedding, never negative.
    pub complementarity: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution<T: Field> {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub block_duals: Vec<DMatrix<T>>,
    pub row_duals: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub history: Vec<IterateRecord>,
}

impl<T: Field> SdpSolution<T> {
    pub fn relative_gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs() / (1.0 + self.objective.abs())
    }
}

/// Search direction or right-hand side in the (block, row) space.
#[derive(Clone, Debug)]
struct Dir<T: Field> {
    blocks: Vec<DMatrix<T>>,
    rows: Vec<f64>,
}

impl<T: Field> Dir<T> {
    fn inner(&self, o: &Self) -> f64 {
        self.blocks.iter().zip(&o.blocks).map(|(a, b)| dense_inner(a, b)).sum::<f64>()
            + self.rows.iter().zip(&o.rows).map(|(a, b)| a * b).sum::<f64>()
    }

    fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    fn axpy(&self, a: f64, o: &Self) -> Self {
        Self {
            blocks: self.blocks.iter().zip(&o.blocks).map(|(x, y)| x + y * T::from_real(a)).collect(),
            rows: self.rows.iter().zip(&o.rows).map(|(x, y)| x + a * y).collect(),
        }
    }
}

struct BlockScaling<T: Field> {
    r: DMatrix<T>,
    rinv: DMatrix<T>,
    lambda: Vec<f64>,
}

fn hermitize<T: Field>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.adjoint()) * T::from_real(0.5)
}

fn diag_scale<T: Field>(m: &DMatrix<T>, left: &[f64], right: &[f64]) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * T::from_real(left[i] * right[j]))
}

fn from_diag<T: Field>(d: &[f64]) -> DMatrix<T> {
    let n = d.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { T::from_real(d[i]) } else { T::zero() })
}

/// NT scaling point of (s, z): returns r with rᴴ z r = r⁻¹ s r⁻ᴴ = diag(λ).
fn nt_scaling<T: Field>(s: &DMatrix<T>, z: &DMatrix<T>) -> Option<BlockScaling<T>> {
    let ls = Cholesky::new(hermitize(s))?.l();
    let lz = Cholesky::new(hermitize(z))?.l();
    let svd = SVD::try_new(lz.adjoint() * &ls, true, true, f64::EPSILON, 1000)?;
    let lambda: Vec<f64> = svd.singular_values.iter().copied().collect();
    if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return None;
    }
    let isq: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
    let ones = vec![1.0; lambda.len()];
    let r = diag_scale(&(ls * svd.v_t?.adjoint()), &ones, &isq);
    let rinv = diag_scale(&(svd.u?.adjoint() * lz.adjoint()), &isq, &ones);
    Some(BlockScaling { r, rinv, lambda })
}

/// Largest α with diag(λ) + αD ⪰ 0 (infinite when unconstrained).
fn max_step_block<T: Field>(lambda: &[f64], d: &DMatrix<T>) -> f64 {
    let isq: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
    let m = hermitize(&diag_scale(d, &isq, &isq));
    let emin = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if emin < 0.0 {
        -1.0 / emin
    } else {
        f64::INFINITY
    }
}

fn max_step_vec(lambda: &[f64], d: &[f64]) -> f64 {
    lambda.iter().zip(d).filter(|(_, &di)| di < 0.0).map(|(l, di)| -l / di).fold(f64::INFINITY, f64::min)
}

/// (λ ⋄ D)_ij = 2 D_ij / (λ_i + λ_j), the inverse of X ↦ (λX + Xλ)/2.
fn lambda_div<T: Field>(lambda: &[f64], d: &DMatrix<T>) -> DMatrix<T> {
    DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] * T::from_real(2.0 / (lambda[i] + lambda[j])))
}

fn sym_product<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    (a * b + b * a) * T::from_real(0.5)
}

/// Per-block data scaling so identity is a reasonable starting slack.
fn equilibrate<T: Field>(prog: &ConeProgram<T>) -> (ConeProgram<T>, Vec<f64>, Vec<f64>) {
    let mut p = prog.clone();
    let mut bscale = Vec::with_capacity(p.blocks.len());
    for blk in &mut p.blocks {
        let mut mag = blk.constant.iter().map(|v| v.modulus()).fold(0.0, f64::max);
        for t in &blk.terms {
            let tm = match t {
                Term::Congruence { coeff, map, .. } => {
                    coeff.abs() * map.as_ref().map_or(1.0, |b| b.iter().map(|v| v.modulus_squared()).fold(0.0, f64::max))
                }
                Term::Single { matrix, .. } => matrix.iter().map(|e| e.2.modulus()).fold(0.0, f64::max),
            };
            mag = mag.max(tm);
        }
        let s = if mag > 0.0 { 1.0 / mag } else { 1.0 };
        blk.constant *= T::from_real(s);
        for t in &mut blk.terms {
            match t {
                Term::Congruence { coeff, .. } => *coeff *= s,
                Term::Single { matrix, .. } => matrix.iter_mut().for_each(|e| e.2 *= T::from_real(s)),
            }
        }
        bscale.push(s);
    }
    let mut rscale = Vec::with_capacity(p.rows.len());
    for row in &mut p.rows {
        let mag = row.coeffs.iter().map(|c| c.1.abs()).fold(0.0, f64::max);
        let s = if mag > 0.0 { 1.0 / mag } else { 1.0 };
        row.constant *= s;
        row.coeffs.iter_mut().for_each(|c| c.1 *= s);
        rscale.push(s);
    }
    (p, bscale, rscale)
}

type MapKey = (usize, usize);

fn map_ptr<T: Field>(m: &Option<Arc<DMatrix<T>>>) -> usize {
    m.as_ref().map_or(0, |a| Arc::as_ptr(a) as usize)
}

/// K[a][b] = Re Tr(E_a P F_b Pᴴ)
fn pair_kernel<T: Field>(ea: &[Sparse<T>], eb: &[Sparse<T>], p: &DMatrix<T>) -> DMatrix<f64> {
    let pc = p.map(|v| v.conjugate());
    let mut k = DMatrix::zeros(ea.len(), eb.len());
    for (ib, fb) in eb.iter().enumerate() {
        for (ia, fa) in ea.iter().enumerate() {
            let mut acc = T::zero();
            for &(pp, q, v) in fa {
                for &(r, s, w) in fb {
                    acc += v * w * p[(q, r)] * pc[(pp, s)];
                }
            }
            k[(ia, ib)] = acc.real();
        }
    }
    k
}

struct Engine<'a, T: Field> {
    p: &'a ConeProgram<T>,
    m: usize,
    h: Vec<f64>,
    c_norm: f64,
    h_norm: f64,
}

impl<'a, T: Field> Engine<'a, T> {
    fn constants(&self) -> Dir<T> {
        Dir {
            blocks: self.p.blocks.iter().map(|b| b.constant.clone()).collect(),
            rows: self.h.clone(),
        }
    }

    /// F(x): linear part of every block and row.
    fn apply(&self, x: &[f64]) -> Dir<T> {
        Dir {
            blocks: (0..self.p.blocks.len()).map(|b| self.p.block_linear(b, x)).collect(),
            rows: (0..self.p.rows.len()).map(|j| self.p.row_linear(j, x)).collect(),
        }
    }

    /// Fᵀ(z)
    fn adjoint(&self, z: &Dir<T>) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (b, zb) in z.blocks.iter().enumerate() {
            self.p.block_adjoint(b, zb, &mut out);
        }
        for (row, &zj) in self.p.rows.iter().zip(&z.rows) {
            for &(i, a) in &row.coeffs {
                out[i] += a * zj;
            }
        }
        out
    }

    fn schur(&self, psi: &[DMatrix<T>], wrow: &[f64]) -> Mat<f64> {
        let mut hm = Mat::<f64>::zeros(self.m, self.m);
        for (b, blk) in self.p.blocks.iter().enumerate() {
            let ps = &psi[b];
            let mut pcache: HashMap<MapKey, DMatrix<T>> = HashMap::new();
            let mut kcache: HashMap<(MapKey, usize, usize), DMatrix<f64>> = HashMap::new();
            let singles: Vec<(usize, &Sparse<T>, DMatrix<T>)> = blk
                .terms
                .iter()
                .filter_map(|t| match t {
                    Term::Single { var, matrix } => {
                        let d = sparse_to_dense(matrix, blk.dim);
                        Some((*var, matrix, ps * d * ps))
                    }
                    _ => None,
                })
                .collect();
            let congr: Vec<(usize, f64, &Option<Arc<DMatrix<T>>>)> = blk
                .terms
                .iter()
                .filter_map(|t| match t {
                    Term::Congruence { group, coeff, map } => Some((*group, *coeff, map)),
                    _ => None,
                })
                .collect();
            for (i1, &(g1, c1, m1)) in congr.iter().enumerate() {
                let (off1, basis1) = match &self.p.groups[g1].kind {
                    GroupKind::Matrix { basis, .. } => (self.p.groups[g1].offset, basis.clone()),
                    GroupKind::Scalar => unreachable!("congruence on scalar"),
                };
                for &(g2, c2, m2) in &congr[i1..] {
                    let (off2, basis2) = match &self.p.groups[g2].kind {
                        GroupKind::Matrix { basis, .. } => (self.p.groups[g2].offset, basis.clone()),
                        GroupKind::Scalar => unreachable!("congruence on scalar"),
                    };
                    let key = (map_ptr(m1), map_ptr(m2));
                    let kkey = (key, Arc::as_ptr(&basis1) as usize, Arc::as_ptr(&basis2) as usize);
                    if !kcache.contains_key(&kkey) {
                        let pm = pcache.entry(key).or_insert_with(|| {
                            let left = match m1 {
                                Some(b1) => b1.adjoint() * ps,
                                None => ps.clone(),
                            };
                            match m2 {
                                Some(b2) => left * &**b2,
                                None => left,
                            }
                        });
                        kcache.insert(kkey, pair_kernel(&basis1, &basis2, pm));
                    }
                    let k = &kcache[&kkey];
                    let cc = c1 * c2;
                    let same_term = std::ptr::eq(m1, m2) && g1 == g2;
                    for jb in 0..k.ncols() {
                        for ia in 0..k.nrows() {
                            let v = cc * k[(ia, jb)];
                            hm[(off1 + ia, off2 + jb)] += v;
                            if !same_term {
                                hm[(off2 + jb, off1 + ia)] += v;
                            }
                        }
                    }
                }
                for (var, _, q) in &singles {
                    let y = match m1 {
                        Some(b1) => b1.adjoint() * q * &**b1,
                        None => q.clone(),
                    };
                    for (a, e) in basis1.iter().enumerate() {
                        let v = c1 * sparse_inner(e, &y);
                        hm[(off1 + a, *var)] += v;
                        hm[(*var, off1 + a)] += v;
                    }
                }
            }
            for (i, (vi, di, _)) in singles.iter().enumerate() {
                for (j, (vj, _, qj)) in singles.iter().enumerate().skip(i) {
                    let v = sparse_inner(di, qj);
                    hm[(*vi, *vj)] += v;
                    if j != i {
                        hm[(*vj, *vi)] += v;
                    }
                }
            }
        }
        for (row, &w) in self.p.rows.iter().zip(wrow) {
            for &(i, a) in &row.coeffs {
                for &(k, bcoef) in &row.coeffs {
                    hm[(i, k)] += w * a * bcoef;
                }
            }
        }
        hm
    }
}

struct Factored {
    llt: faer::linalg::solvers::Llt<f64>,
}

impl Factored {
    fn new(mut h: Mat<f64>) -> Result<Self> {
        let n = h.nrows();
        let dmax = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = 0.0;
        for _ in 0..8 {
            if let Ok(llt) = h.llt(Side::Lower) {
                return Ok(Self { llt });
            }
            let add = if reg == 0.0 { 1e-14 * dmax } else { reg * 9.0 };
            for i in 0..n {
                h[(i, i)] += add;
            }
            reg = add;
        }
        Err(Error::NumericalFailure("schur complement is not positive definite".into()))
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

const STALL_ITERS: usize = 6;
const REFINE_STEPS: usize = 1;
/// A stalled run is still reported optimal when its best iterate was this close.
const FALLBACK_MERIT: f64 = 10.0;

fn fallback<T: Field>(
    best: (f64, usize, Option<SdpSolution<T>>),
    history: Vec<IterateRecord>,
    reason: String,
) -> Result<SdpSolution<T>> {
    match best {
        (merit, _, Some(mut sol)) if merit <= FALLBACK_MERIT => {
            log::debug!("{reason}; returning iterate {} ({merit:.2} x tolerance)", sol.iterations);
            sol.history = history;
            Ok(sol)
        }
        _ => Err(Error::NumericalFailure(reason)),
    }
}

pub fn solve<T: Field>(program: &ConeProgram<T>, settings: &SolverSettings) -> Result<SdpSolution<T>> {
    if !(settings.step_fraction > 0.0 && settings.step_fraction < 1.0) {
        return Err(Error::Domain("step_fraction must lie in (0,1)".into()));
    }
    let (prog, bscale, rscale) = equilibrate(program);
    let m = prog.num_vars();
    let nb = prog.blocks.len();
    let nr = prog.rows.len();
    let h: Vec<f64> = prog.rows.iter().map(|r| r.constant).collect();
    let c = prog.objective.clone();
    let mut eng = Engine { p: &prog, m, h, c_norm: 0.0, h_norm: 0.0 };
    eng.c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    eng.h_norm = eng.constants().norm().max(1.0);
    let hconst = eng.constants();
    let degree = prog.blocks.iter().map(|b| b.dim).sum::<usize>() + nr;

    let mut x = vec![0.0; m];
    let mut scal: Vec<BlockScaling<T>> = prog
        .blocks
        .iter()
        .map(|b| BlockScaling {
            r: DMatrix::identity(b.dim, b.dim),
            rinv: DMatrix::identity(b.dim, b.dim),
            lambda: vec![1.0; b.dim],
        })
        .collect();
    // s and z are kept explicitly so that roundoff in the scalings does not
    // leak into the residuals; the scaling is recomputed from them each step
    let mut s_blk: Vec<DMatrix<T>> = prog.blocks.iter().map(|b| DMatrix::identity(b.dim, b.dim)).collect();
    let mut z_blk = s_blk.clone();
    let mut s_lp = vec![1.0; nr];
    let mut z_lp = vec![1.0; nr];
    let mut tau = 1.0;
    let mut kappa = 1.0;
    let mut history = Vec::new();
    let mut best: (f64, usize, Option<SdpSolution<T>>) = (f64::INFINITY, 0, None);

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let vnorm = |a: &[f64]| a.iter().map(|v| v * v).sum::<f64>().sqrt();

    for iter in 0..=settings.max_iters {
        let s = Dir { blocks: s_blk.clone(), rows: s_lp.clone() };
        let z = Dir { blocks: z_blk.clone(), rows: z_lp.clone() };
        let fx = eng.apply(&x);
        let ftz = eng.adjoint(&z);
        // r_x = Gᵀz + cτ, r_z = s + Gx − hτ, r_τ = κ + cᵀx + hᵀz
        let rx: Vec<f64> = (0..m).map(|i| c[i] * tau - ftz[i]).collect();
        let rz = s.axpy(-1.0, &fx).axpy(-tau, &hconst);
        let cx = dot(&c, &x);
        let hz = hconst.inner(&z);
        let rt = kappa + cx + hz;
        let sz = s.inner(&z);
        let mu = (sz + tau * kappa) / (degree as f64 + 1.0);
        let pcost = cx / tau;
        let dcost = -hz / tau;
        let pres = rz.norm() / tau / eng.h_norm;
        let dres = vnorm(&rx) / tau / eng.c_norm;
        let gap = (sz / (tau * tau)).max((pcost - dcost).abs());
        log::trace!("ipm {iter}: p {pcost:.8e} d {dcost:.8e} pres {pres:.2e} dres {dres:.2e} gap {gap:.2e}");
        history.push(IterateRecord { primal_objective: pcost, dual_objective: dcost, complementarity: sz + tau * kappa, step: 0.0 });

        let finish = |status: SolveStatus, xs: Vec<f64>, zs: &Dir<T>, scale: f64, it: usize, hist: Vec<IterateRecord>| {
            let block_duals = zs.blocks.iter().zip(&bscale).map(|(zb, &sb)| zb * T::from_real(sb * scale)).collect();
            let row_duals = zs.rows.iter().zip(&rscale).map(|(zj, sr)| zj * sr * scale).collect();
            SdpSolution {
                status,
                x: xs,
                block_duals,
                row_duals,
                objective: pcost,
                dual_objective: dcost,
                primal_residual: pres,
                dual_residual: dres,
                gap,
                iterations: it,
                history: hist,
            }
        };

        let merit = (pres.max(dres) / settings.feas_tol).max(gap / (settings.gap_tol * (1.0 + pcost.abs())));
        if merit <= 1.0 {
            let xs = x.iter().map(|v| v / tau).collect();
            return Ok(finish(SolveStatus::Optimal, xs, &z, 1.0 / tau, iter, history));
        }
        // Close to the optimum roundoff in the scalings can make the residuals
        // grow again; remember the best iterate to fall back on.
        if merit < best.0 {
            let xs = x.iter().map(|v| v / tau).collect();
            best = (merit, iter, Some(finish(SolveStatus::Optimal, xs, &z, 1.0 / tau, iter, Vec::new())));
        } else if best.0 <= FALLBACK_MERIT && iter >= best.1 + STALL_ITERS {
            return fallback(best, history, format!("stalled at iteration {iter}"));
        }
        if hz < 0.0 {
            let pinf = vnorm(&ftz) / (-hz) / eng.c_norm;
            if pinf <= settings.feas_tol {
                return Ok(finish(SolveStatus::Infeasible, vec![0.0; m], &z, 1.0 / (-hz), iter, history));
            }
        }
        if cx < 0.0 {
            let dinf = s.axpy(-1.0, &fx).norm() / (-cx) / eng.h_norm;
            if dinf <= settings.feas_tol {
                let xs = x.iter().map(|v| v / (-cx)).collect();
                let zero = Dir { blocks: z.blocks.iter().map(|b| b * T::zero()).collect(), rows: vec![0.0; nr] };
                return Ok(finish(SolveStatus::Unbounded, xs, &zero, 1.0, iter, history));
            }
        }
        if iter == settings.max_iters {
            let xs = x.iter().map(|v| v / tau).collect();
            return Ok(finish(SolveStatus::IterationLimit, xs, &z, 1.0 / tau, iter, history));
        }
        if !mu.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite iterate at iteration {iter}")));
        }

        let psi: Vec<DMatrix<T>> = scal.iter().map(|sc| sc.rinv.adjoint() * &sc.rinv).collect();
        let wrow: Vec<f64> = z_lp.iter().zip(&s_lp).map(|(z, s)| z / s).collect();
        let fac = match Factored::new(eng.schur(&psi, &wrow)) {
            Ok(f) => f,
            Err(e) => {
                return fallback(best, history, format!("{e} at iteration {iter} (pres {pres:.2e}, dres {dres:.2e}, gap {gap:.2e})"))
            }
        };

        let psi_inv: Vec<DMatrix<T>> = scal.iter().map(|sc| &sc.r * sc.r.adjoint()).collect();
        // Solves Gᵀdz = bx, G dx − WᵀW dz = bz.
        let kkt0 = |bx: &[f64], bz: &Dir<T>| -> (Vec<f64>, Dir<T>) {
            let t = Dir {
                blocks: bz.blocks.iter().zip(&psi).map(|(b, p)| p * b * p).collect(),
                rows: bz.rows.iter().zip(&wrow).map(|(b, w)| b * w).collect(),
            };
            let adj = eng.adjoint(&t);
            let rhs: Vec<f64> = (0..m).map(|i| bx[i] - adj[i]).collect();
            let dx = fac.solve(&rhs);
            let fdx = eng.apply(&dx);
            let dz = Dir {
                blocks: (0..nb).map(|b| &psi[b] * (-(&fdx.blocks[b]) - &bz.blocks[b]) * &psi[b]).collect(),
                rows: (0..nr).map(|j| wrow[j] * (-fdx.rows[j] - bz.rows[j])).collect(),
            };
            (dx, dz)
        };
        // one step of iterative refinement on the full system; the Schur
        // complement loses accuracy as the scalings become ill conditioned
        let kkt = |bx: &[f64], bz: &Dir<T>| -> (Vec<f64>, Dir<T>) {
            let (mut dx, mut dz) = kkt0(bx, bz);
            for _ in 0..REFINE_STEPS {
                let adj = eng.adjoint(&dz);
                let ex: Vec<f64> = (0..m).map(|i| bx[i] + adj[i]).collect();
                let fdx = eng.apply(&dx);
                let ez = Dir {
                    blocks: (0..nb).map(|b| &bz.blocks[b] + &fdx.blocks[b] + &psi_inv[b] * &dz.blocks[b] * &psi_inv[b]).collect(),
                    rows: (0..nr).map(|j| bz.rows[j] + fdx.rows[j] + dz.rows[j] / wrow[j]).collect(),
                };
                let (cx_, cz_) = kkt0(&ex, &ez);
                dx.iter_mut().zip(&cx_).for_each(|(a, b)| *a += b);
                dz = dz.axpy(1.0, &cz_);
            }
            (dx, dz)
        };

        let negc: Vec<f64> = c.iter().map(|v| -v).collect();
        let (x2, z2) = kkt(&negc, &hconst);
        let denom2 = dot(&c, &x2) + hconst.inner(&z2);
        let lp_d: Vec<f64> = s_lp.iter().zip(&z_lp).map(|(s, z)| (s / z).sqrt()).collect();
        let lp_lambda: Vec<f64> = s_lp.iter().zip(&z_lp).map(|(s, z)| (s * z).sqrt()).collect();

        // ds in the scaled frame is given through λ⋄ds; dk is the κτ target.
        struct Step<T: Field> {
            dx: Vec<f64>,
            ds_t: Dir<T>,
            dz_t: Dir<T>,
            dtau: f64,
            dkappa: f64,
        }
        let direction = |lds: &Dir<T>, dk: f64, gamma: f64| -> Step<T> {
            let bx: Vec<f64> = rx.iter().map(|v| -(1.0 - gamma) * v).collect();
            let bz = Dir {
                blocks: (0..nb)
                    .map(|b| {
                        let w = &scal[b].r * &lds.blocks[b] * scal[b].r.adjoint();
                        &rz.blocks[b] * T::from_real(-(1.0 - gamma)) - w
                    })
                    .collect(),
                rows: (0..nr).map(|j| -(1.0 - gamma) * rz.rows[j] - lp_d[j] * lds.rows[j]).collect(),
            };
            let bt = -(1.0 - gamma) * rt - dk / tau;
            let (x1, z1) = kkt(&bx, &bz);
            let dtau = (bt - dot(&c, &x1) - hconst.inner(&z1)) / (denom2 - kappa / tau);
            let dx: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + dtau * b).collect();
            let dz = z1.axpy(dtau, &z2);
            let dz_t = Dir {
                blocks: (0..nb).map(|b| hermitize(&(scal[b].r.adjoint() * &dz.blocks[b] * &scal[b].r))).collect(),
                rows: (0..nr).map(|j| lp_d[j] * dz.rows[j]).collect(),
            };
            let ds_t = lds.axpy(-1.0, &dz_t);
            let dkappa = (dk - kappa * dtau) / tau;
            Step { dx, ds_t, dz_t, dtau, dkappa }
        };
        let max_step = |st: &Step<T>| -> f64 {
            let mut a = f64::INFINITY;
            for b in 0..nb {
                a = a.min(max_step_block(&scal[b].lambda, &st.ds_t.blocks[b]));
                a = a.min(max_step_block(&scal[b].lambda, &st.dz_t.blocks[b]));
            }
            a = a.min(max_step_vec(&lp_lambda, &st.ds_t.rows)).min(max_step_vec(&lp_lambda, &st.dz_t.rows));
            if st.dtau < 0.0 {
                a = a.min(-tau / st.dtau);
            }
            if st.dkappa < 0.0 {
                a = a.min(-kappa / st.dkappa);
            }
            a
        };

        // predictor
        let lds_aff = Dir {
            blocks: scal.iter().map(|sc| from_diag::<T>(&sc.lambda.iter().map(|l| -l).collect::<Vec<_>>())).collect(),
            rows: lp_lambda.iter().map(|l| -l).collect(),
        };
        let aff = direction(&lds_aff, -tau * kappa, 0.0);
        let alpha_aff = max_step(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let lds_cc = Dir {
            blocks: (0..nb)
                .map(|b| {
                    let lam = &scal[b].lambda;
                    let mut d = -sym_product(&aff.ds_t.blocks[b], &aff.dz_t.blocks[b]);
                    for i in 0..lam.len() {
                        d[(i, i)] += T::from_real(sigma * mu - lam[i] * lam[i]);
                    }
                    lambda_div(lam, &d)
                })
                .collect(),
            rows: (0..nr)
                .map(|j| (-lp_lambda[j] * lp_lambda[j] - aff.ds_t.rows[j] * aff.dz_t.rows[j] + sigma * mu) / lp_lambda[j])
                .collect(),
        };
        let dk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        let st = direction(&lds_cc, dk, sigma);
        let mut alpha = (settings.step_fraction * max_step(&st)).min(1.0);

        // update, backing off if roundoff breaks positive definiteness
        let mut updated = None;
        for _ in 0..30 {
            let mut next = Vec::with_capacity(nb);
            for (b, sc) in scal.iter().enumerate() {
                let ds = &sc.r * &st.ds_t.blocks[b] * sc.r.adjoint();
                let dz = sc.rinv.adjoint() * &st.dz_t.blocks[b] * &sc.rinv;
                let sn = hermitize(&(&s_blk[b] + ds * T::from_real(alpha)));
                let zn = hermitize(&(&z_blk[b] + dz * T::from_real(alpha)));
                match nt_scaling(&sn, &zn) {
                    Some(ns) => next.push((ns, sn, zn)),
                    None => break,
                }
            }
            let lp_ok = (0..nr).all(|j| {
                lp_lambda[j] + alpha * st.ds_t.rows[j] > 0.0 && lp_lambda[j] + alpha * st.dz_t.rows[j] > 0.0
            });
            if next.len() == nb && lp_ok && tau + alpha * st.dtau > 0.0 && kappa + alpha * st.dkappa > 0.0 {
                updated = Some(next);
                break;
            }
            alpha *= 0.5;
        }
        let Some(next) = updated else {
            return fallback(
                best,
                history,
                format!("could not keep iterate interior at iteration {iter} (pres {pres:.2e}, dres {dres:.2e}, gap {gap:.2e})"),
            );
        };
        scal = Vec::with_capacity(nb);
        for (b, (ns, sn, zn)) in next.into_iter().enumerate() {
            scal.push(ns);
            s_blk[b] = sn;
            z_blk[b] = zn;
        }
        for j in 0..nr {
            s_lp[j] = lp_d[j] * (lp_lambda[j] + alpha * st.ds_t.rows[j]);
            z_lp[j] = (lp_lambda[j] + alpha * st.dz_t.rows[j]) / lp_d[j];
        }
        for i in 0..m {
            x[i] += alpha * st.dx[i];
        }
        tau += alpha * st.dtau;
        kappa += alpha * st.dkappa;
        if let Some(last) = history.last_mut() {
            last.step = alpha;
        }
    }
    unreachable!("loop returns at max_iters")
}
