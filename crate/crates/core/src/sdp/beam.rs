//! Mapping a solved first-stage program back to beams and AN.

use serde::{Deserialize, Serialize};

use super::{extract_rank_one, solve, SdpSolution, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, HermitianMatrix, C64};
use crate::metrics::TransmitDesign;
use crate::robust::{NullSpaceBasis, P4};

#[derive(Clone, Debug)]
pub struct BeamformingSolution {
    pub beams: Vec<ComplexVector>,
    /// Raw SDP values W_k (rank one up to solver accuracy).
    pub w_matrices: Vec<HermitianMatrix>,
    pub t: HermitianMatrix,
    /// Z = V̄TV̄ᴴ
    pub z: HermitianMatrix,
    pub mu: Vec<f64>,
    pub total_power_w: f64,
    pub per_antenna_power_w: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// λ₂/λ₁ of each W_k.
    pub rank_ratios: Vec<f64>,
    /// Dual multipliers of the per-antenna (or sum) power rows.
    pub cap_duals: Vec<f64>,
    pub iterations: usize,
}

impl BeamformingSolution {
    pub fn design(&self) -> TransmitDesign {
        TransmitDesign { beams: self.beams.clone(), an_covariance: self.z.clone() }
    }
}

/// Summary safe to serialize; complex entries are written as interleaved re/im.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolutionRecord {
    pub beams: Vec<Vec<f64>>,
    /// Row-major interleaved re/im, (N−K)×(N−K).
    pub t: Vec<f64>,
    pub t_dim: usize,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub total_power_w: f64,
    pub per_antenna_power_w: Vec<f64>,
}

pub fn interleave(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn deinterleave(v: &[f64]) -> Result<Vec<C64>> {
    if v.len() % 2 != 0 {
        return Err(Error::Parse("interleaved complex array has odd length".into()));
    }
    Ok(v.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
}

pub fn to_beamforming_solution(sdp: &SdpSolution<C64>, p4: &P4, basis: &NullSpaceBasis) -> Result<BeamformingSolution> {
    to_beamforming_solution_with(sdp, p4, basis, super::DEFAULT_RANK_RATIO)
}

pub fn to_beamforming_solution_with(
    sdp: &SdpSolution<C64>,
    p4: &P4,
    basis: &NullSpaceBasis,
    ratio_tol: f64,
) -> Result<BeamformingSolution> {
    if sdp.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!("first stage ended with status {:?}", sdp.status)));
    }
    let prog = &p4.program;
    let lay = &p4.layout;
    let w_matrices: Vec<HermitianMatrix> =
        lay.w_groups.iter().map(|&g| HermitianMatrix::from_upper(prog.matrix_value(g, &sdp.x))).collect();
    let mut beams = Vec::with_capacity(w_matrices.len());
    let mut rank_ratios = Vec::with_capacity(w_matrices.len());
    for w in &w_matrices {
        let ev = w.eig()?.values;
        rank_ratios.push(ev.get(1).copied().unwrap_or(0.0).max(0.0) / ev[0]);
        beams.push(extract_rank_one(w, ratio_tol)?);
    }
    let t = HermitianMatrix::from_upper(prog.matrix_value(lay.t_group, &sdp.x));
    let z = basis.an_covariance(&t);
    let mu: Vec<f64> = lay.mu_groups.iter().map(|&g| sdp.x[prog.offset(g)]).collect();
    let n = z.dim();
    let per_antenna_power_w: Vec<f64> =
        (0..n).map(|i| beams.iter().map(|b| b[i].norm_sqr()).sum::<f64>() + z.get(i, i).re).collect();
    let total_power_w = beams.iter().map(|b| b.norm_squared()).sum::<f64>() + t.trace();
    Ok(BeamformingSolution {
        beams,
        w_matrices,
        t,
        z,
        mu,
        total_power_w,
        per_antenna_power_w,
        objective: sdp.objective,
        dual_objective: sdp.dual_objective,
        rank_ratios,
        cap_duals: lay.cap_rows.iter().map(|&r| sdp.row_duals[r]).collect(),
        iterations: sdp.iterations,
    })
}

/// Solves an assembled P4 natively in the complex Hermitian cone.
pub fn solve_p4(p4: &P4, settings: &SolverSettings) -> Result<SdpSolution<C64>> {
    solve(&p4.program, settings)
}
