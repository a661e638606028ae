//! Second stage: minimize the largest eavesdropper rate over the SINR
//! tolerances with the first-stage design held fixed.
//!
//! Each tolerance Γ_r has a pair (Σ_r, Ξ_r) with Γ_r Σ_r ⪰ Ξ_r as its
//! feasibility condition. The min-max over r is smoothed with an exponential
//! penalty φ_p and minimized by BFGS in log Γ; [`two_stage_solve`] alternates
//! this with the first-stage program.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianMatrix, C64};
use crate::metrics::achievable_rate;
use crate::robust::{ae_blocks, an_null_basis, assemble_p4, chance_bound_xi, NullSpaceBasis, ProblemInstance, ToleranceSet};
use crate::sdp::{beam::to_beamforming_solution, solve_p4, BeamformingSolution, SolveStatus, SolverSettings};

/// Eigenvalues of Σ below this fraction of the largest are treated as zero.
const SIGMA_RANK_TOL: f64 = 1e-12;
const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const CURVATURE_MIN: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ConstraintPair {
    pub sigma: HermitianMatrix,
    pub xi: HermitianMatrix,
}

/// The (Σ_r, Ξ_r) pairs: one per active eavesdropper, then one shared by
/// the passive eavesdroppers when there are any.
#[derive(Clone, Debug)]
pub struct StackedConstraints {
    pub pairs: Vec<ConstraintPair>,
    pub has_pe: bool,
}

/// Penalty data: for each tolerance, (σ, ξ) entries whose residual is ξ − σΓ.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyTerms {
    pub entries: Vec<Vec<(f64, f64)>>,
}

impl PenaltyTerms {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest residual ξ − σΓ over all entries.
    pub fn max_residual(&self, gammas: &[f64]) -> f64 {
        self.entries
            .iter()
            .zip(gammas)
            .flat_map(|(e, &g)| e.iter().map(move |&(s, x)| x - s * g))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Builds the pairs from a first-stage solution; AE blocks are taken in
/// the normalized units of the program, the PE pair in watts.
pub fn stack_constraints(
    solution: &BeamformingSolution,
    inst: &ProblemInstance,
    outage_prob: f64,
) -> Result<StackedConstraints> {
    let n = inst.n();
    let nz = inst.normalized();
    let w_sum = solution.w_matrices.iter().fold(HermitianMatrix::zeros(n), |a, w| a.add(w));
    let mut pairs = Vec::with_capacity(inst.r() + 1);
    for (r, region) in nz.ae_regions.iter().enumerate() {
        let (sigma, xi) = ae_blocks(&w_sum, &solution.z, solution.mu[r], region, nz.ae_noise);
        pairs.push(ConstraintPair { sigma, xi });
    }
    let has_pe = inst.num_pe > 0;
    if has_pe {
        // ξ is linear in Γ_p, so its unit-Γ value is the identity coefficient
        let xi0 = chance_bound_xi(outage_prob, inst.num_pe, n, 1.0, inst.pe_noise_eff_w)?;
        let sigma = solution.z.add(&HermitianMatrix::identity(n).scale(xi0));
        pairs.push(ConstraintPair { sigma, xi: w_sum });
    }
    Ok(StackedConstraints { pairs, has_pe })
}

fn vec_entries(m: &HermitianMatrix) -> impl Iterator<Item = f64> + '_ {
    let n = m.dim();
    (0..n).flat_map(move |j| (0..n).flat_map(move |i| [m.get(i, j).re, m.get(i, j).im]))
}

impl StackedConstraints {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Entrywise form: real and imaginary parts of every matrix entry.
    pub fn raw_terms(&self) -> PenaltyTerms {
        PenaltyTerms {
            entries: self.pairs.iter().map(|p| vec_entries(&p.sigma).zip(vec_entries(&p.xi)).collect()).collect(),
        }
    }

    /// Generalized eigenvalues d_i of each pencil (Ξ, Σ). In the congruent
    /// basis where Σ = I and Ξ = diag(d), Γ Σ ⪰ Ξ holds exactly when every
    /// entry residual is non-positive; off-diagonal entries vanish and only add
    /// a constant to the penalty, so they are dropped.
    pub fn canonical_terms(&self) -> Result<PenaltyTerms> {
        let mut entries = Vec::with_capacity(self.pairs.len());
        for (r, pair) in self.pairs.iter().enumerate() {
            let d = generalized_eigenvalues(&pair.sigma, &pair.xi)
                .map_err(|e| Error::NumericalFailure(format!("tolerance {}: {e}", r + 1)))?;
            entries.push(d.into_iter().map(|v| (1.0, v)).collect());
        }
        Ok(PenaltyTerms { entries })
    }

    /// Smallest Γ_r with Γ_r Σ_r ⪰ Ξ_r, i.e. the exact inner min-max solution.
    pub fn min_tolerances(&self) -> Result<Vec<f64>> {
        Ok(self
            .canonical_terms()?
            .entries
            .iter()
            .map(|e| e.iter().map(|&(_, d)| d).fold(0.0, f64::max))
            .collect())
    }
}

fn generalized_eigenvalues(sigma: &HermitianMatrix, xi: &HermitianMatrix) -> Result<Vec<f64>> {
    let e = sigma.eig()?;
    let lmax = e.values[0];
    if !(lmax > 0.0) {
        return Err(Error::Domain("sigma block has no positive eigenvalue".into()));
    }
    let keep: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > SIGMA_RANK_TOL * lmax).collect();
    let n = sigma.dim();
    let mut basis = ComplexMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = C64::new(1.0 / e.values[i].sqrt(), 0.0);
        basis.set_column(c, &(e.vectors.column(i) * s));
    }
    if keep.len() < n {
        let mut null = ComplexMatrix::zeros(n, n - keep.len());
        for (c, i) in (0..n).filter(|i| !keep.contains(i)).enumerate() {
            null.set_column(c, &e.vectors.column(i));
        }
        let leak = xi.congruence(&null.adjoint()).norm();
        if leak > 1e-6 * xi.norm().max(f64::MIN_POSITIVE) {
            log::warn!("xi has weight {leak:.2e} where sigma vanishes; no finite tolerance satisfies that direction");
        }
    }
    Ok(xi.congruence(&basis.adjoint()).eig()?.values)
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn rate(g: f64) -> f64 {
    (1.0 + g).log2()
}

/// φ_p(Γ) = p⁻¹ ln Σ_r exp(p log2(1+Γ_r)) + p⁻¹ Σ_r Σ_i exp(p(ξ_i − σ_iΓ_r) − 1)
pub fn phi_p(gammas: &[f64], terms: &PenaltyTerms, p: f64) -> f64 {
    let smooth_max = log_sum_exp(gammas.iter().map(|&g| p * rate(g))) / p;
    let penalty: f64 = terms
        .entries
        .iter()
        .zip(gammas)
        .map(|(e, &g)| e.iter().map(|&(s, x)| (p * (x - s * g) - 1.0).exp()).sum::<f64>())
        .sum();
    smooth_max + penalty / p
}

pub fn grad_phi_p(gammas: &[f64], terms: &PenaltyTerms, p: f64) -> Vec<f64> {
    let lse = log_sum_exp(gammas.iter().map(|&g| p * rate(g)));
    gammas
        .iter()
        .enumerate()
        .map(|(r, &g)| {
            let weight = (p * rate(g) - lse).exp();
            let pen: f64 = terms.entries[r].iter().map(|&(s, x)| s * (p * (x - s * g) - 1.0).exp()).sum();
            weight / ((1.0 + g) * std::f64::consts::LN_2) - pen
        })
        .collect()
}

/// ω★ = p⁻¹ ln Σ exp(p log2(1+Γ_r)) − p⁻¹
pub fn omega_star(gammas: &[f64], p: f64) -> f64 {
    (log_sum_exp(gammas.iter().map(|&g| p * rate(g))) - 1.0) / p
}

/// Ψ_p(ω, Γ) before ω is eliminated.
pub fn psi_p(omega: f64, gammas: &[f64], terms: &PenaltyTerms, p: f64) -> f64 {
    let lift: f64 = gammas.iter().map(|&g| (p * (rate(g) - omega) - 1.0).exp()).sum();
    let penalty: f64 = terms
        .entries
        .iter()
        .zip(gammas)
        .map(|(e, &g)| e.iter().map(|&(s, x)| (p * (x - s * g) - 1.0).exp()).sum::<f64>())
        .sum();
    omega + (lift + penalty) / p
}

pub fn dpsi_domega(omega: f64, gammas: &[f64], p: f64) -> f64 {
    1.0 - gammas.iter().map(|&g| (p * (rate(g) - omega) - 1.0).exp()).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub p_schedule: Vec<f64>,
    /// Stop when ‖ϱ‖² falls below this.
    pub epsilon: f64,
    pub max_bfgs_iters: usize,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self { p_schedule: vec![10.0, 100.0, 1000.0], epsilon: 1e-6, max_bfgs_iters: 500 }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if self.p_schedule.is_empty() || self.p_schedule.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Domain("penalty schedule must hold positive values".into()));
        }
        if self.p_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("penalty schedule must be strictly increasing".into()));
        }
        if !(self.epsilon > 0.0) || self.max_bfgs_iters == 0 {
            return Err(Error::Domain("BFGS tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BfgsState {
    /// Inverse-Hessian approximation X.
    pub inv_hessian: DMatrix<f64>,
    pub x: DVector<f64>,
    /// ϱ
    pub last_step: DVector<f64>,
    /// τ
    pub last_grad_diff: DVector<f64>,
    /// 1/ϱᵀτ of the last accepted update.
    pub delta: f64,
}

impl BfgsState {
    pub fn new(start: &[f64]) -> Self {
        let n = start.len();
        Self {
            inv_hessian: DMatrix::identity(n, n),
            x: DVector::from_column_slice(start),
            last_step: DVector::from_element(n, 1.0),
            last_grad_diff: DVector::zeros(n),
            delta: 0.0,
        }
    }

    /// X ← (I − δϱτᵀ) X (I − δτϱᵀ) + δϱϱᵀ; skipped when ϱᵀτ is not positive.
    pub fn update(&mut self, step: DVector<f64>, grad_diff: DVector<f64>) -> bool {
        let curv = step.dot(&grad_diff);
        let accepted = curv > CURVATURE_MIN;
        if accepted {
            let n = step.len();
            let d = 1.0 / curv;
            let left = DMatrix::identity(n, n) - &step * grad_diff.transpose() * d;
            self.inv_hessian = &left * &self.inv_hessian * left.transpose() + &step * step.transpose() * d;
            self.delta = d;
        }
        self.last_step = step;
        self.last_grad_diff = grad_diff;
        accepted
    }
}

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub state: BfgsState,
}

/// Backtracking along `dir`: first trial at the minimizer of the quadratic
/// through f(0), f'(0), f(1), then halving until the Armijo condition holds.
fn line_search<F: Fn(&[f64]) -> f64>(f: &F, x: &DVector<f64>, fx: f64, slope: f64, dir: &DVector<f64>) -> Option<(f64, f64)> {
    let at = |nu: f64| f((x + dir * nu).as_slice());
    let f1 = at(1.0);
    let curv = f1 - fx - slope;
    let mut nu = if f1.is_finite() && curv > 0.0 { (-slope / (2.0 * curv)).clamp(1e-3, 1.0) } else { 1.0 };
    let mut fv = if nu == 1.0 { f1 } else { at(nu) };
    for _ in 0..MAX_HALVINGS {
        if fv.is_finite() && fv <= fx + ARMIJO_C1 * nu * slope {
            return Some((nu, fv));
        }
        nu *= 0.5;
        fv = at(nu);
    }
    None
}

pub fn bfgs_minimize<F, G>(f: F, grad: G, start: &[f64], params: &PenaltyParams) -> Result<BfgsOutcome>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut st = BfgsState::new(start);
    let mut fx = f(start);
    if !fx.is_finite() {
        return Err(Error::Domain("objective is not finite at the start point".into()));
    }
    let mut g = DVector::from_vec(grad(start));
    for it in 1..=params.max_bfgs_iters {
        if g.iter().all(|v| *v == 0.0) {
            return Ok(BfgsOutcome { x: st.x.as_slice().to_vec(), value: fx, iterations: it - 1, converged: true, state: st });
        }
        let mut dir = -(&st.inv_hessian * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            st.inv_hessian = DMatrix::identity(g.len(), g.len());
            dir = -&g;
            slope = g.dot(&dir);
        }
        let found = line_search(&f, &st.x, fx, slope, &dir).or_else(|| {
            // gradient-descent fallback
            let sd = -&g;
            line_search(&f, &st.x, fx, -g.norm_squared(), &sd).map(|(nu, fv)| {
                dir = sd;
                (nu, fv)
            })
        });
        let Some((nu, fnew)) = found else {
            log::debug!("line search failed at BFGS iteration {it}; stopping");
            return Ok(BfgsOutcome { x: st.x.as_slice().to_vec(), value: fx, iterations: it, converged: true, state: st });
        };
        let step = &dir * nu;
        let xn = &st.x + &step;
        let gn = DVector::from_vec(grad(xn.as_slice()));
        // a short step alone can come from a poor curvature estimate on
        // steep penalties, so stationarity is required as well
        let small = step.norm_squared() < params.epsilon && gn.amax() < params.epsilon.sqrt() * 1e-2;
        st.update(step, &gn - &g);
        st.x = xn;
        g = gn;
        fx = fnew;
        if small {
            return Ok(BfgsOutcome { x: st.x.as_slice().to_vec(), value: fx, iterations: it, converged: true, state: st });
        }
    }
    log::warn!("BFGS stopped at the iteration cap of {}", params.max_bfgs_iters);
    Ok(BfgsOutcome { x: st.x.as_slice().to_vec(), value: fx, iterations: params.max_bfgs_iters, converged: false, state: st })
}

/// Runs the penalty schedule in log Γ, each p warm-starting the next.
pub fn minimize_tolerances(
    terms: &PenaltyTerms,
    start: &[f64],
    params: &PenaltyParams,
    mut on_stage: impl FnMut(f64, &[f64], f64),
) -> Result<Vec<f64>> {
    params.validate()?;
    if start.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Domain("tolerances must be positive".into()));
    }
    let mut y: Vec<f64> = start.iter().map(|g| g.ln()).collect();
    for &p in &params.p_schedule {
        let f = |y: &[f64]| {
            let g: Vec<f64> = y.iter().map(|v| v.exp()).collect();
            phi_p(&g, terms, p)
        };
        let df = |y: &[f64]| {
            let g: Vec<f64> = y.iter().map(|v| v.exp()).collect();
            grad_phi_p(&g, terms, p).iter().zip(&g).map(|(d, g)| d * g).collect()
        };
        let out = bfgs_minimize(f, df, &y, params)?;
        y = out.x;
        let g: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        on_stage(p, &g, out.value);
    }
    Ok(y.iter().map(|v| v.exp()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageParams {
    pub penalty: PenaltyParams,
    pub max_outer: usize,
    /// Relative change of max_r log2(1+Γ_r) that ends the outer loop.
    pub outer_tol: f64,
}

impl Default for TwoStageParams {
    fn default() -> Self {
        Self { penalty: PenaltyParams::default(), max_outer: 50, outer_tol: 1e-4 }
    }
}

/// One JSON-lines record per (outer iteration, penalty value).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer: usize,
    pub p: f64,
    pub gamma: Vec<f64>,
    pub phi: f64,
    pub first_stage_objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecrecySummary {
    pub lu_sinr: Vec<f64>,
    pub min_lu_rate: f64,
    pub max_eve_rate: f64,
    pub secrecy_rate: f64,
    pub total_power_w: f64,
}

#[derive(Clone, Debug)]
pub struct TwoStageResult {
    pub solution: BeamformingSolution,
    pub tolerances: ToleranceSet,
    pub basis: NullSpaceBasis,
    pub summary: SecrecySummary,
    pub trace: Vec<TraceRecord>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

fn max_rate(tol: &ToleranceSet, has_pe: bool) -> f64 {
    let pe = if has_pe { rate(tol.pe_sinr) } else { 0.0 };
    tol.ae_sinr.iter().map(|&g| rate(g)).fold(pe, f64::max)
}

fn summarize(inst: &ProblemInstance, sol: &BeamformingSolution, tol: &ToleranceSet) -> SecrecySummary {
    let design = sol.design();
    let lu_sinr: Vec<f64> = inst
        .lu_channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let sig = h.dotc(&design.beams[k]).norm_sqr();
            let other: f64 = (0..design.beams.len()).filter(|&i| i != k).map(|i| h.dotc(&design.beams[i]).norm_sqr()).sum();
            sig / (other + design.an_covariance.quad_form(h) + inst.noise.lu_w)
        })
        .collect();
    let min_lu_rate = lu_sinr.iter().map(|&s| achievable_rate(s)).fold(f64::INFINITY, f64::min);
    let max_eve_rate = max_rate(tol, inst.num_pe > 0);
    SecrecySummary {
        lu_sinr,
        min_lu_rate,
        max_eve_rate,
        secrecy_rate: (min_lu_rate - max_eve_rate).max(0.0),
        total_power_w: sol.total_power_w,
    }
}

fn solve_stage(
    inst: &ProblemInstance,
    tol: &ToleranceSet,
    basis: &NullSpaceBasis,
    settings: &SolverSettings,
) -> Result<std::result::Result<BeamformingSolution, SolveStatus>> {
    let p4 = assemble_p4(inst, tol, basis)?;
    let sdp = solve_p4(&p4, settings)?;
    if sdp.status != SolveStatus::Optimal {
        return Ok(Err(sdp.status));
    }
    to_beamforming_solution(&sdp, &p4, basis).map(Ok)
}

/// Alternates the first-stage program with the tolerance update until the
/// largest eavesdropper rate settles.
pub fn two_stage_solve(
    inst: &ProblemInstance,
    init: &ToleranceSet,
    params: &TwoStageParams,
    settings: &SolverSettings,
) -> Result<TwoStageResult> {
    params.penalty.validate()?;
    let basis = an_null_basis(&inst.lu_channels)?;
    let min_zeta = inst.min_sinr.iter().copied().fold(f64::INFINITY, f64::min);
    init.check_ordering(min_zeta);
    let has_pe = inst.num_pe > 0;
    let mut tol = init.clone();
    let mut sol = match solve_stage(inst, &tol, &basis, settings)? {
        Ok(s) => s,
        Err(status) => {
            return Err(Error::InfeasibleScenario(format!(
                "first stage ended with status {status:?} at the initial tolerances; relax the LU SINR targets or start from larger eavesdropper tolerances"
            )))
        }
    };
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = inst.r() == 0 && !has_pe;
    let mut outer = 0;
    let mut prev = max_rate(&tol, has_pe);
    while !converged && outer < params.max_outer {
        outer += 1;
        let stacked = stack_constraints(&sol, inst, tol.outage_prob)?;
        let terms = stacked.canonical_terms()?;
        let mut start = tol.ae_sinr.clone();
        if has_pe {
            start.push(tol.pe_sinr);
        }
        let objective = sol.objective;
        let gammas = minimize_tolerances(&terms, &start, &params.penalty, |p, g, phi| {
            trace.push(TraceRecord { outer, p, gamma: g.to_vec(), phi, first_stage_objective: objective });
        })?;
        // The minimizer of φ_p sits O(1/p) above an active boundary, so taking
        // it as is would ratchet active tolerances upward on every pass; the
        // incumbent is kept wherever the update would loosen it.
        let clamped: Vec<f64> = gammas.iter().zip(&start).map(|(g, s)| g.min(*s)).collect();
        let next = ToleranceSet {
            ae_sinr: clamped[..inst.r()].to_vec(),
            pe_sinr: if has_pe { clamped[inst.r()] } else { tol.pe_sinr },
            outage_prob: tol.outage_prob,
        };
        let cur = max_rate(&next, has_pe);
        match solve_stage(inst, &next, &basis, settings) {
            Ok(Ok(s)) => {
                sol = s;
                tol = next;
            }
            Ok(Err(status)) => {
                let w = format!("first stage ended with status {status:?} at outer iteration {outer}; keeping the previous design");
                log::warn!("{w}");
                warnings.push(w);
                break;
            }
            Err(e) => {
                let w = format!("first stage failed at outer iteration {outer} ({e}); keeping the previous design");
                log::warn!("{w}");
                warnings.push(w);
                break;
            }
        }
        converged = (prev - cur).abs() <= params.outer_tol * prev.abs().max(f64::MIN_POSITIVE);
        prev = cur;
    }
    if !converged && outer >= params.max_outer {
        let w = format!("outer loop stopped at the cap of {} iterations", params.max_outer);
        log::warn!("{w}");
        warnings.push(w);
    }
    let summary = summarize(inst, &sol, &tol);
    Ok(TwoStageResult { solution: sol, tolerances: tol, basis, summary, trace, outer_iterations: outer, converged, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(entries: Vec<(f64, f64)>) -> PenaltyTerms {
        PenaltyTerms { entries: vec![entries] }
    }

    #[test]
    fn phi_at_boundary() {
        let g = 0.7;
        let t = single(vec![(2.0, 1.4), (1.0, 0.7), (0.5, 0.35)]);
        let expect = rate(g) + 3.0 * (-1.0f64).exp() / 50.0;
        assert!((phi_p(&[g], &t, 50.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn phi_bounds_max_rate() {
        let t = PenaltyTerms { entries: vec![vec![], vec![]] };
        for p in [1.0, 10.0, 1e3, 1e5] {
            let v = phi_p(&[1.0, 3.0], &t, p);
            assert!(v >= 2.0);
            if p >= 1e5 {
                assert!(v - 2.0 < 1e-4);
            }
        }
        // large arguments do not overflow
        assert!(phi_p(&[1e6, 1e6], &t, 1e4).is_finite());
    }

    #[test]
    fn gradient_closed_form() {
        let t = single(vec![(0.0, 0.0)]);
        let g = 0.4;
        let d = grad_phi_p(&[g], &t, 7.0)[0];
        assert!((d - 1.0 / ((1.0 + g) * std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn omega_stationary() {
        let t = PenaltyTerms { entries: vec![vec![(1.0, 0.2)], vec![(0.5, 0.1)]] };
        let g = [0.3, 0.25];
        let p = 40.0;
        let w = omega_star(&g, p);
        assert!(dpsi_domega(w, &g, p).abs() < 1e-12);
        assert!((psi_p(w, &g, &t, p) - phi_p(&g, &t, p)).abs() < 1e-12);
    }

    #[test]
    fn bfgs_update_keeps_secant() {
        let mut st = BfgsState::new(&[0.0, 0.0]);
        let s = DVector::from_vec(vec![1.0, 0.5]);
        let y = DVector::from_vec(vec![2.0, -0.3]);
        assert!(st.update(s.clone(), y.clone()));
        assert!((&st.inv_hessian * &y - &s).norm() < 1e-12);
        let before = st.inv_hessian.clone();
        assert!(!st.update(s.clone(), -y));
        assert_eq!(st.inv_hessian, before);
    }

    #[test]
    fn schedule_validation() {
        assert!(PenaltyParams::default().validate().is_ok());
        let bad = PenaltyParams { p_schedule: vec![10.0, 10.0], ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
