//! Dense semidefinite programming: modeling layer, interior-point solver,
//! sparse text exchange format and rank-one beam extraction.

pub mod beam;
pub mod program;
pub mod sdpa;
pub mod solver;

pub use beam::{solve_p4, to_beamforming_solution, BeamformingSolution};
pub use program::{ConeProgram, Field, LinearRow, LmiBlock, Term};
pub use solver::{solve, IterateRecord, SdpSolution, SolveStatus, SolverSettings};

use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, HermitianMatrix, C64};

pub const DEFAULT_RANK_RATIO: f64 = 1e-6;

/// Solves a complex program through its real symmetric embedding and maps
/// block duals back to the complex domain. Slower than solving natively.
pub fn solve_embedded(program: &ConeProgram<C64>, settings: &SolverSettings) -> Result<SdpSolution<C64>> {
    let real = program.to_real();
    let sol = solve(&real, settings)?;
    let block_duals = sol
        .block_duals
        .iter()
        .map(|z| crate::linalg::real_to_complex(z).map(|h| h.into_matrix() * C64::new(2.0, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SdpSolution {
        status: sol.status,
        x: sol.x,
        block_duals,
        row_duals: sol.row_duals,
        objective: sol.objective,
        dual_objective: sol.dual_objective,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: sol.gap,
        iterations: sol.iterations,
        history: sol.history,
    })
}

/// w = √λ₁ v₁ for a numerically rank-one W.
pub fn extract_rank_one(w: &HermitianMatrix, ratio_tol: f64) -> Result<ComplexVector> {
    let e = w.eig()?;
    let l1 = e.values[0];
    if !(l1 > 0.0) {
        return Err(Error::Domain("cannot extract a beam from a zero matrix".into()));
    }
    let l2 = e.values.get(1).copied().unwrap_or(0.0).max(0.0);
    let ratio = l2 / l1;
    if ratio > ratio_tol {
        return Err(Error::RankViolation { ratio, spectrum: e.values });
    }
    let mut v = e.vectors.column(0).into_owned();
    // fix the global phase so that the largest entry is real positive
    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let ph = v[imax] / v[imax].norm();
    v /= ph;
    Ok(v * C64::new(l1.sqrt(), 0.0))
}
