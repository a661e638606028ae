//! Dense complex linear algebra shared by every other module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexVector = DVector<C64>;
pub type ComplexMatrix = DMatrix<C64>;

/// Relative tolerances bottom out here so that all-zero matrices still get a sane scale.
pub const ABS_FLOOR: f64 = 1e-12;

const EIG_MAX_ITERS: usize = 10_000;

/// Complex Hermitian matrix. The upper triangle is authoritative; the lower
/// triangle is always rewritten as its conjugate mirror.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    m: ComplexMatrix,
}

impl HermitianMatrix {
    /// Builds from a square matrix, keeping the upper triangle and forcing a real diagonal.
    pub fn from_upper(mut m: ComplexMatrix) -> Self {
        assert!(m.is_square(), "hermitian matrix must be square");
        let n = m.nrows();
        for j in 0..n {
            m[(j, j)] = C64::new(m[(j, j)].re, 0.0);
            for i in (j + 1)..n {
                m[(i, j)] = m[(j, i)].conj();
            }
        }
        Self { m }
    }

    /// Builds from a matrix that is Hermitian up to roundoff by averaging with its adjoint.
    pub fn from_average(m: &ComplexMatrix) -> Self {
        let avg = (m + m.adjoint()) * C64::new(0.5, 0.0);
        Self::from_upper(avg)
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: ComplexMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: ComplexMatrix::identity(n, n) }
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Self { m }
    }

    /// v vᴴ
    pub fn outer(v: &ComplexVector) -> Self {
        Self::from_upper(v * v.adjoint())
    }

    /// B X Bᴴ for an arbitrary (rectangular) B.
    pub fn congruence(&self, b: &ComplexMatrix) -> Self {
        Self::from_average(&(b * &self.m * b.adjoint()))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    /// xᴴ A x (real for Hermitian A).
    pub fn quad_form(&self, x: &ComplexVector) -> f64 {
        x.dotc(&(&self.m * x)).re
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_upper(&self.m + &other.m)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_upper(&self.m - &other.m)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_upper(&self.m * C64::new(a, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn eig(&self) -> Result<Eigen> {
        eig_hermitian(self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eig()?.values.last().expect("non-empty"))
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(self.eig()?.values[0])
    }

    /// Number of eigenvalues above `tol·max(1, ‖A‖)`.
    pub fn rank(&self, tol: f64) -> Result<usize> {
        let thr = tol * self.norm().max(1.0);
        Ok(self.eig()?.values.iter().filter(|&&l| l > thr).count())
    }
}

/// Eigen-decomposition with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column i pairs with `values[i]`.
    pub vectors: ComplexMatrix,
}

pub fn eig_hermitian(a: &HermitianMatrix) -> Result<Eigen> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::NumericalFailure("eigendecomposition of non-finite matrix".into()));
    }
    let se = a
        .m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIG_MAX_ITERS)
        .ok_or_else(|| Error::NumericalFailure("hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps original index order among ties
    order.sort_by(|&i, &j| se.eigenvalues[j].total_cmp(&se.eigenvalues[i]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Thin SVD, A = U diag(s) Vᴴ with min(rows, cols) singular triplets.
pub fn svd_complex(a: &ComplexMatrix) -> Result<Svd> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure("svd of non-finite matrix".into()));
    }
    let svd = nalgebra::SVD::try_new(a.clone(), true, true, f64::EPSILON, EIG_MAX_ITERS)
        .ok_or_else(|| Error::NumericalFailure("svd did not converge".into()))?;
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = ComplexMatrix::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let v = ComplexMatrix::from_fn(v_t.ncols(), k, |r, c| v_t[(order[c], r)].conj());
    Ok(Svd { u, singular_values, v })
}

/// Orthonormal basis (columns) for the null space of `a`, from the right
/// singular vectors of a zero-padded square copy. Also returns the singular values of `a`.
pub fn null_space(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>)> {
    let (rows, cols) = a.shape();
    let padded = if rows < cols {
        let mut p = ComplexMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = svd_complex(&padded)?;
    let rank = rows.min(cols);
    let basis = svd.v.columns(rank, cols - rank).into_owned();
    Ok((basis, svd.singular_values[..rank].to_vec()))
}

/// [[Re A, −Im A],[Im A, Re A]]
pub fn complex_to_real_embed(a: &HermitianMatrix) -> DMatrix<f64> {
    embed_general(a.as_matrix())
}

/// Same block layout for any complex matrix; maps products to products.
pub fn embed_general(a: &ComplexMatrix) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for j in 0..c {
        for i in 0..r {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

/// Inverse of `complex_to_real_embed`, averaging the redundant copies.
pub fn real_to_complex(e: &DMatrix<f64>) -> Result<HermitianMatrix> {
    if e.nrows() != e.ncols() || e.nrows() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "embedded matrix must be square with even size, got {}x{}",
            e.nrows(),
            e.ncols()
        )));
    }
    let n = e.nrows() / 2;
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (e[(i, j)] + e[(i + n, j + n)]);
        let im = 0.5 * (e[(i + n, j)] - e[(i, j + n)]);
        C64::new(re, im)
    });
    Ok(HermitianMatrix::from_average(&m))
}

pub fn is_psd(a: &HermitianMatrix, tol: f64) -> bool {
    match a.min_eigenvalue() {
        Ok(l) => l >= -tol * a.norm().max(1.0),
        Err(_) => false,
    }
}

/// Block-diagonal real symmetric matrix stored as (offset, block) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSymBlockMatrix {
    pub blocks: Vec<(usize, DMatrix<f64>)>,
}

impl RealSymBlockMatrix {
    pub fn new(blocks: Vec<(usize, DMatrix<f64>)>) -> Result<Self> {
        let mut spans: Vec<(usize, usize)> = Vec::new();
        for (off, b) in &blocks {
            if b.nrows() != b.ncols() {
                return Err(Error::Dimension("block must be square".into()));
            }
            let asym = (b - b.transpose()).abs().max();
            if asym > ABS_FLOOR * b.abs().max().max(1.0) {
                return Err(Error::Dimension(format!("block at offset {off} is not symmetric")));
            }
            spans.push((*off, off + b.nrows()));
        }
        spans.sort();
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::Dimension("overlapping blocks".into()));
        }
        Ok(Self { blocks })
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|(o, b)| o + b.nrows()).max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (o, b) in &self.blocks {
            out.view_mut((*o, *o), b.shape()).copy_from(b);
        }
        out
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
