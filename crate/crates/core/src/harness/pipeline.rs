//! Scenario-level glue: the two-stage design, the LU receive side and the
//! sampling audits used by `verify`.

use rand::Rng;
use serde::Serialize;

use super::Scenario;
use crate::array::{complex_gaussian, sample_uncertainty, steering_vector, SampleMode};
use crate::error::Result;
use crate::linalg::{ComplexVector, HermitianMatrix};
use crate::metrics::{eve_sinr_upper, lu_sinr, LuReceiver, TransmitDesign};
use crate::minimax::{two_stage_solve, TwoStageParams, TwoStageResult};
use crate::mvdr::{jamming_snapshots, mvdr_default, sample_covariance, ReceiveWeights};
use crate::robust::{an_null_basis, certify, CheckLine, ToleranceSet};
use crate::sdp::SolverSettings;

#[derive(Clone, Debug, Default)]
pub struct PipelineSettings {
    /// Starting eavesdropper tolerance (linear); defaults to ζ/100.
    pub initial_gamma: Option<f64>,
    pub two_stage: TwoStageParams,
    pub solver: SolverSettings,
}

pub fn initial_tolerances(sc: &Scenario, gamma: Option<f64>) -> ToleranceSet {
    ToleranceSet::uniform(sc.num_ae(), gamma.unwrap_or(sc.min_sinr / 100.0), sc.outage_prob)
}

pub fn solve_scenario(sc: &Scenario, settings: &PipelineSettings) -> Result<TwoStageResult> {
    let init = initial_tolerances(sc, settings.initial_gamma);
    two_stage_solve(&sc.instance(), &init, &settings.two_stage, &settings.solver)
}

/// One LU after MVDR combining.
#[derive(Clone, Debug)]
pub struct LuLink {
    pub weights: ReceiveWeights,
    pub jamming_power_w: f64,
    /// σ_u²‖v‖²
    pub noise_w: f64,
    pub sinr: f64,
}

/// Trains MVDR weights at every LU on a fresh jamming window and evaluates the LU SINR.
pub fn lu_links<R: Rng + ?Sized>(sc: &Scenario, design: &TransmitDesign, rng: &mut R) -> Result<Vec<LuLink>> {
    let geom = sc.rx_geometry();
    let sources = sc.jamming_sources();
    let channels = sc.lu_channels();
    let mut out = Vec::with_capacity(sc.num_lu());
    for (k, h) in channels.iter().enumerate() {
        let batch = jamming_snapshots(rng, &geom, &sources, k, sc.lu_noise_w, sc.snapshots)?;
        let r = sample_covariance(&batch);
        let weights = mvdr_default(&r, &geom, sc.lu_angles_rad[k])?;
        let a = steering_vector(&geom, sc.lu_angles_rad[k]);
        let jamming_power_w: f64 = sources.iter().map(|s| s.received_power(k, &geom, &weights.weights)).sum();
        let noise_w = sc.lu_noise_w * weights.weights.norm_squared();
        let rx = LuReceiver { steering: &a, weights: &weights.weights, jamming_power_w };
        let sinr = lu_sinr(design, h, k, &rx, noise_w);
        out.push(LuLink { weights, jamming_power_w, noise_w, sinr });
    }
    Ok(out)
}

/// Largest SINR/Γ_r seen over `samples` draws on the surface of each AE region.
pub fn ae_boundary_audit<R: Rng + ?Sized>(
    sc: &Scenario,
    design: &TransmitDesign,
    tol: &ToleranceSet,
    samples: usize,
    rng: &mut R,
) -> Vec<f64> {
    sc.ae_regions()
        .iter()
        .zip(&tol.ae_sinr)
        .map(|(region, &g)| {
            (0..samples)
                .map(|_| eve_sinr_upper(design, &sample_uncertainty(region, rng, SampleMode::Surface), sc.ae_noise_w) / g)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Rayleigh PE channel with large-scale gain g_pe.
pub fn draw_pe_channel<R: Rng + ?Sized>(sc: &Scenario, rng: &mut R) -> ComplexVector {
    complex_gaussian(rng, sc.tx_antennas, sc.pe_gain)
}

/// Fraction of draws in which every PE stays at or below Γ_p.
pub fn pe_outage_audit<R: Rng + ?Sized>(sc: &Scenario, design: &TransmitDesign, gamma_p: f64, draws: usize, rng: &mut R) -> f64 {
    if sc.pe_count == 0 || draws == 0 {
        return 1.0;
    }
    let ok = (0..draws)
        .filter(|_| {
            // draw all Q channels so the stream advances the same way every time
            let worst = (0..sc.pe_count)
                .map(|_| eve_sinr_upper(design, &draw_pe_channel(sc, rng), sc.pe_noise_w))
                .fold(0.0, f64::max);
            worst <= gamma_p
        })
        .count();
    ok as f64 / draws as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditLine {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub constraints: Vec<CheckLine>,
    pub audits: Vec<AuditLine>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.constraints.iter().all(|c| c.pass) && self.audits.iter().all(|a| a.pass)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AuditSettings {
    pub rel_tol: f64,
    pub ae_samples: usize,
    pub pe_draws: usize,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-6, ae_samples: 10_000, pe_draws: 10_000 }
    }
}

/// Re-checks a design against every first-stage constraint and runs the AE
/// boundary and PE outage audits.
pub fn verify_design<R: Rng + ?Sized>(
    sc: &Scenario,
    w: &[HermitianMatrix],
    t: &HermitianMatrix,
    mu: &[f64],
    tol: &ToleranceSet,
    audit: &AuditSettings,
    rng: &mut R,
) -> Result<VerifyReport> {
    let inst = sc.instance();
    let basis = an_null_basis(&inst.lu_channels)?;
    let constraints = certify(&inst, tol, &basis, w, t, mu, audit.rel_tol)?;
    let beams: Vec<ComplexVector> = w.iter().map(|wk| crate::sdp::extract_rank_one(wk, f64::INFINITY)).collect::<Result<_>>()?;
    let design = TransmitDesign { beams, an_covariance: basis.an_covariance(t) };
    let mut audits = Vec::new();
    let limit = 1.0 + audit.rel_tol;
    for (r, ratio) in ae_boundary_audit(sc, &design, tol, audit.ae_samples, rng).into_iter().enumerate() {
        audits.push(AuditLine { name: format!("ae{}_boundary_sinr_over_gamma", r + 1), value: ratio, limit, pass: ratio <= limit });
    }
    if sc.pe_count > 0 {
        let frac = pe_outage_audit(sc, &design, tol.pe_sinr, audit.pe_draws, rng);
        audits.push(AuditLine { name: "pe_outage_satisfaction".into(), value: frac, limit: sc.outage_prob, pass: frac >= sc.outage_prob });
    }
    Ok(VerifyReport { constraints, audits })
}
