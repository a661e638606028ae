//! Saved designs: JSON with beams and T as interleaved re/im arrays.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::results::version_string;
use super::Scenario;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, HermitianMatrix};
use crate::minimax::TwoStageResult;
use crate::robust::ToleranceSet;
use crate::sdp::beam::{deinterleave, interleave, SolutionRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionMetadata {
    pub scenario_hash: String,
    pub seed: u64,
    pub version: String,
    pub outage_prob: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub rank_ratios: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub metadata: SolutionMetadata,
    pub solution: SolutionRecord,
}

/// Design read back from a file.
#[derive(Clone, Debug)]
pub struct LoadedDesign {
    pub beams: Vec<ComplexVector>,
    pub w: Vec<HermitianMatrix>,
    pub t: HermitianMatrix,
    pub mu: Vec<f64>,
    pub tolerances: ToleranceSet,
}

impl SolutionFile {
    pub fn from_result(sc: &Scenario, res: &TwoStageResult) -> Self {
        let sol = &res.solution;
        let t_dim = sol.t.dim();
        let t: Vec<_> = sol.t.as_matrix().transpose().iter().copied().collect();
        Self {
            metadata: SolutionMetadata {
                scenario_hash: sc.hash(),
                seed: sc.seed,
                version: version_string(),
                outage_prob: res.tolerances.outage_prob,
                outer_iterations: res.outer_iterations,
                converged: res.converged,
                rank_ratios: sol.rank_ratios.clone(),
            },
            solution: SolutionRecord {
                beams: sol.beams.iter().map(|b| interleave(b.as_slice())).collect(),
                t: interleave(&t),
                t_dim,
                mu: sol.mu.clone(),
                gamma: res.tolerances.stacked(),
                total_power_w: sol.total_power_w,
                per_antenna_power_w: sol.per_antenna_power_w.clone(),
            },
        }
    }

    pub fn design(&self) -> Result<LoadedDesign> {
        let rec = &self.solution;
        let beams = rec.beams.iter().map(|b| deinterleave(b).map(ComplexVector::from_vec)).collect::<Result<Vec<_>>>()?;
        let t = deinterleave(&rec.t)?;
        if t.len() != rec.t_dim * rec.t_dim {
            return Err(Error::Parse(format!("T has {} entries, expected {}", t.len(), rec.t_dim * rec.t_dim)));
        }
        if rec.gamma.is_empty() {
            return Err(Error::Parse("gamma is empty".into()));
        }
        let t = HermitianMatrix::from_average(&ComplexMatrix::from_row_slice(rec.t_dim, rec.t_dim, &t));
        Ok(LoadedDesign {
            w: beams.iter().map(HermitianMatrix::outer).collect(),
            beams,
            t,
            mu: rec.mu.clone(),
            tolerances: ToleranceSet::from_stacked(&rec.gamma, self.metadata.outage_prob),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn save_solution(file: &SolutionFile, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, file.to_json()? + "\n")?;
    Ok(())
}

pub fn load_solution(path: impl AsRef<Path>) -> Result<SolutionFile> {
    SolutionFile::from_json(&std::fs::read_to_string(path)?)
}
