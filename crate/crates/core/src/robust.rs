//! First-stage program: AN null space, S-procedure blocks for the active
//! eavesdroppers, the chi-square bound for passive ones, and assembly of the
//! per-antenna power minimization as a complex cone program.

use std::sync::Arc;

use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};

use crate::array::UncertaintyRegion;
use crate::error::{Error, Result};
use crate::linalg::{null_space, ComplexMatrix, ComplexVector, HermitianMatrix, C64};
use crate::metrics::LinkNoise;
use crate::sdp::{ConeProgram, Term};

/// Relative singular value below which stacked LU channels count as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct NullSpaceBasis {
    /// V̄, N×(N−K) with orthonormal columns.
    pub matrix: ComplexMatrix,
    /// H_u = [h_1 … h_K], N×K.
    pub channels: ComplexMatrix,
}

impl NullSpaceBasis {
    /// Z = V̄ T V̄ᴴ
    pub fn an_covariance(&self, t: &HermitianMatrix) -> HermitianMatrix {
        t.congruence(&self.matrix)
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }
}

pub fn an_null_basis(lu_channels: &[ComplexVector]) -> Result<NullSpaceBasis> {
    let k = lu_channels.len();
    let n = lu_channels.first().map_or(0, |h| h.len());
    if k == 0 || n == 0 {
        return Err(Error::Dimension("need at least one LU channel".into()));
    }
    if lu_channels.iter().any(|h| h.len() != n) {
        return Err(Error::Dimension("LU channels differ in length".into()));
    }
    if k >= n {
        return Err(Error::DimensionalInfeasibility { users: k, antennas: n });
    }
    let channels = ComplexMatrix::from_columns(lu_channels);
    let (matrix, s) = null_space(&channels.adjoint())?;
    if s[k - 1] <= RANK_TOL * s[0] {
        return Err(Error::DegenerateGeometry(format!(
            "LU channels are linearly dependent (singular values {s:?})"
        )));
    }
    Ok(NullSpaceBasis { matrix, channels })
}

/// Lagrange multipliers of the S-procedure, one per active eavesdropper.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustCertificate {
    pub mu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ToleranceSet {
    pub ae_sinr: Vec<f64>,
    pub pe_sinr: f64,
    pub outage_prob: f64,
}

impl ToleranceSet {
    pub fn uniform(num_ae: usize, gamma: f64, outage_prob: f64) -> Self {
        Self { ae_sinr: vec![gamma; num_ae], pe_sinr: gamma, outage_prob }
    }

    /// Γ_{a,1..R} followed by Γ_p.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.ae_sinr.clone();
        v.push(self.pe_sinr);
        v
    }

    pub fn from_stacked(g: &[f64], outage_prob: f64) -> Self {
        let (ae, pe) = g.split_at(g.len() - 1);
        Self { ae_sinr: ae.to_vec(), pe_sinr: pe[0], outage_prob }
    }

    /// Warns when an eavesdropper tolerance is not well below the LU targets.
    pub fn check_ordering(&self, min_lu_sinr: f64) -> bool {
        let max = self.ae_sinr.iter().copied().fold(self.pe_sinr, f64::max);
        if min_lu_sinr < max {
            log::warn!("eavesdropper tolerance {max:.3e} exceeds the weakest LU target {min_lu_sinr:.3e}");
            return false;
        }
        true
    }
}

/// The Σ_r and Ξ_r blocks of one active eavesdropper; S_r = Σ_r − Ξ_r/Γ_r.
pub fn ae_blocks(
    w_sum: &HermitianMatrix,
    z: &HermitianMatrix,
    mu: f64,
    region: &UncertaintyRegion,
    sigma_a_w: f64,
) -> (HermitianMatrix, HermitianMatrix) {
    let n = w_sum.dim();
    let u = u_matrix(&region.center);
    let zc = z.congruence(&u.adjoint());
    let mut sigma = zc.into_matrix();
    for i in 0..n {
        sigma[(i, i)] += C64::new(mu, 0.0);
    }
    sigma[(n, n)] += C64::new(sigma_a_w - mu * region.radius * region.radius, 0.0);
    let xi = w_sum.congruence(&u.adjoint());
    (HermitianMatrix::from_upper(sigma), xi)
}

/// U = [I_N, ĥ]
fn u_matrix(h: &ComplexVector) -> ComplexMatrix {
    let n = h.len();
    let mut u = ComplexMatrix::zeros(n, n + 1);
    u.view_mut((0, 0), (n, n)).fill_with_identity();
    u.set_column(n, h);
    u
}

/// S_r of the S-procedure: PSD exactly when the AE SINR stays below Γ over the whole region.
pub fn build_ae_lmi(
    beams_w: &[HermitianMatrix],
    t: &HermitianMatrix,
    mu: f64,
    region: &UncertaintyRegion,
    gamma_a: f64,
    sigma_a_w: f64,
    basis: &NullSpaceBasis,
) -> HermitianMatrix {
    let n = region.center.len();
    let w_sum = beams_w.iter().fold(HermitianMatrix::zeros(n), |acc, w| acc.add(w));
    let z = basis.an_covariance(t);
    let (sigma, xi) = ae_blocks(&w_sum, &z, mu, region, sigma_a_w);
    sigma.sub(&xi.scale(1.0 / gamma_a))
}

/// Quantile of 1/X for X ~ χ²_{2N}: Pr{1/X ≤ y} = p.
pub fn inverse_chisq_quantile(p: f64, half_dof: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} outside (0,1)")));
    }
    if half_dof == 0 {
        return Err(Error::Domain("chi-square needs at least one complex degree of freedom".into()));
    }
    let dist = ChiSquared::new(2.0 * half_dof as f64).map_err(|e| Error::Domain(e.to_string()))?;
    let target = 1.0 - p;
    let mut x = dist.inverse_cdf(target);
    // polish the library estimate with Newton steps on the c.d.f.
    for _ in 0..4 {
        let f = dist.pdf(x);
        if !(f > 0.0) {
            break;
        }
        let step = (dist.cdf(x) - target) / f;
        if !step.is_finite() {
            break;
        }
        x = (x - step).max(x * 0.5);
    }
    Ok(1.0 / x)
}

/// ξ = Φ⁻¹(1 − κ^{1/Q}) Γ_p σ²
pub fn chance_bound_xi(kappa: f64, num_pe: usize, n: usize, gamma_p: f64, sigma_p_w: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Domain(format!("outage probability {kappa} outside (0,1)")));
    }
    if num_pe == 0 {
        return Err(Error::Domain("chance bound needs at least one passive eavesdropper".into()));
    }
    if gamma_p == 0.0 {
        return Ok(0.0);
    }
    let q = inverse_chisq_quantile(1.0 - kappa.powf(1.0 / num_pe as f64), n)?;
    Ok(q * gamma_p * sigma_p_w)
}

/// Standard normal quantile, for reporting only.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("valid").inverse_cdf(p)
}

/// Link budget in physical units for one P4 solve.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub lu_channels: Vec<ComplexVector>,
    pub ae_regions: Vec<UncertaintyRegion>,
    pub noise: LinkNoise,
    /// ζ_k, linear.
    pub min_sinr: Vec<f64>,
    pub antenna_caps_w: Vec<f64>,
    pub num_pe: usize,
    /// σ_p² divided by the PE large-scale gain, so that ‖h_p‖² is Gamma(N, 1).
    pub pe_noise_eff_w: f64,
    pub sum_power: bool,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.lu_channels[0].len()
    }

    pub fn k(&self) -> usize {
        self.lu_channels.len()
    }

    pub fn r(&self) -> usize {
        self.ae_regions.len()
    }

    /// Mean per-antenna LU channel power; channels are divided by its square
    /// root before assembly so the program data is O(1).
    pub fn channel_scale(&self) -> f64 {
        let s: f64 = self.lu_channels.iter().map(|h| h.norm_squared()).sum();
        s / (self.k() * self.n()) as f64
    }

    pub fn normalized(&self) -> NormalizedInstance {
        let s = self.channel_scale();
        let a = C64::new(1.0 / s.sqrt(), 0.0);
        NormalizedInstance {
            scale: s,
            lu_channels: self.lu_channels.iter().map(|h| h * a).collect(),
            ae_regions: self
                .ae_regions
                .iter()
                .map(|r| UncertaintyRegion { center: &r.center * a, radius: r.radius / s.sqrt() })
                .collect(),
            lu_noise: self.noise.lu_w / s,
            ae_noise: self.noise.ae_w / s,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NormalizedInstance {
    pub scale: f64,
    pub lu_channels: Vec<ComplexVector>,
    pub ae_regions: Vec<UncertaintyRegion>,
    pub lu_noise: f64,
    pub ae_noise: f64,
}

/// Group and row indices of an assembled P4.
#[derive(Clone, Debug)]
pub struct P4Layout {
    pub w_groups: Vec<usize>,
    pub t_group: usize,
    pub mu_groups: Vec<usize>,
    pub lu_rows: Vec<usize>,
    pub cap_rows: Vec<usize>,
    pub mu_rows: Vec<usize>,
    pub ae_blocks: Vec<usize>,
    pub pe_block: Option<usize>,
    pub psd_blocks: Vec<usize>,
    pub xi: f64,
}

#[derive(Clone, Debug)]
pub struct P4 {
    pub program: ConeProgram<C64>,
    pub layout: P4Layout,
}

impl P4 {
    /// (rows, LMI blocks): K + N (or 1) + R linear rows; R + [Q>0] + K + 1 blocks.
    pub fn counts(&self) -> (usize, usize) {
        (self.program.rows.len(), self.program.blocks.len())
    }
}

fn diag_entries(d: &[f64]) -> Vec<(usize, usize, C64)> {
    d.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (i, i, C64::new(v, 0.0))).collect()
}

pub fn assemble_p4(inst: &ProblemInstance, tol: &ToleranceSet, basis: &NullSpaceBasis) -> Result<P4> {
    let n = inst.n();
    let k = inst.k();
    let r = inst.r();
    if inst.lu_channels.iter().any(|h| h.len() != n) || inst.ae_regions.iter().any(|a| a.center.len() != n) {
        return Err(Error::Dimension("channel lengths disagree".into()));
    }
    if basis.matrix.nrows() != n || basis.channels.ncols() != k {
        return Err(Error::Dimension("null-space basis does not match the LU channels".into()));
    }
    if inst.min_sinr.len() != k || tol.ae_sinr.len() != r || inst.antenna_caps_w.len() != n {
        return Err(Error::Dimension("tolerance or cap vector has the wrong length".into()));
    }
    if tol.ae_sinr.iter().any(|&g| !(g > 0.0)) || (inst.num_pe > 0 && !(tol.pe_sinr > 0.0)) {
        return Err(Error::Domain("eavesdropper tolerances must be positive".into()));
    }
    let nz = inst.normalized();
    let m = basis.dim();
    let mut p = ConeProgram::<C64>::new();
    let w_groups: Vec<usize> = (0..k).map(|i| p.add_matrix(&format!("W{}", i + 1), n)).collect();
    let t_group = p.add_matrix("T", m);
    let mu_groups: Vec<usize> = (0..r).map(|i| p.add_scalar(&format!("mu{}", i + 1))).collect();
    for &g in w_groups.iter().chain([&t_group]) {
        p.add_objective_trace(g, 1.0);
    }

    let mut lu_rows = Vec::with_capacity(k);
    for (kk, g) in nz.lu_channels.iter().enumerate() {
        let gk = g * g.adjoint();
        let mut coeffs = Vec::new();
        for (i, &wg) in w_groups.iter().enumerate() {
            let a = if i == kk { &gk * C64::new(1.0 / inst.min_sinr[kk], 0.0) } else { -&gk };
            coeffs.extend(p.trace_coeffs(wg, &a));
        }
        lu_rows.push(p.rows.len());
        p.add_row(&format!("lu_sinr{}", kk + 1), -nz.lu_noise, coeffs)?;
    }

    let vbar = Arc::new(basis.matrix.clone());
    let mut ae_blocks = Vec::with_capacity(r);
    for (ri, region) in nz.ae_regions.iter().enumerate() {
        let uh = Arc::new(u_matrix(&region.center).adjoint());
        let uv = Arc::new(&*uh * &*vbar);
        let mut constant = ComplexMatrix::zeros(n + 1, n + 1);
        constant[(n, n)] = C64::new(nz.ae_noise, 0.0);
        let mut mu_diag = vec![1.0; n];
        mu_diag.push(-region.radius * region.radius);
        let mut terms: Vec<Term<C64>> = w_groups
            .iter()
            .map(|&g| Term::Congruence { group: g, coeff: -1.0 / tol.ae_sinr[ri], map: Some(uh.clone()) })
            .collect();
        terms.push(Term::Congruence { group: t_group, coeff: 1.0, map: Some(uv) });
        terms.push(Term::Single { var: p.offset(mu_groups[ri]), matrix: diag_entries(&mu_diag) });
        ae_blocks.push(p.blocks.len());
        p.add_lmi(&format!("ae{}", ri + 1), constant, terms)?;
    }

    let mut xi = 0.0;
    let pe_block = if inst.num_pe > 0 {
        xi = chance_bound_xi(tol.outage_prob, inst.num_pe, n, tol.pe_sinr, inst.pe_noise_eff_w)?;
        let mut terms: Vec<Term<C64>> =
            w_groups.iter().map(|&g| Term::Congruence { group: g, coeff: -1.0, map: None }).collect();
        terms.push(Term::Congruence { group: t_group, coeff: tol.pe_sinr, map: Some(vbar.clone()) });
        let idx = p.blocks.len();
        p.add_lmi("pe", ComplexMatrix::identity(n, n) * C64::new(xi, 0.0), terms)?;
        Some(idx)
    } else {
        None
    };

    let mut cap_rows = Vec::new();
    if inst.sum_power {
        let mut coeffs = Vec::new();
        for &g in w_groups.iter() {
            coeffs.extend(p.trace_coeffs(g, &(-ComplexMatrix::identity(n, n))));
        }
        coeffs.extend(p.trace_coeffs(t_group, &(-ComplexMatrix::identity(m, m))));
        cap_rows.push(p.rows.len());
        p.add_row("sum_power", inst.antenna_caps_w.iter().sum(), coeffs)?;
    } else {
        for ant in 0..n {
            let mut e = ComplexMatrix::zeros(n, n);
            e[(ant, ant)] = C64::new(-1.0, 0.0);
            let mut coeffs = Vec::new();
            for &g in w_groups.iter() {
                coeffs.extend(p.trace_coeffs(g, &e));
            }
            // ī = V̄ᴴ e_n so that īᴴ T ī = [V̄TV̄ᴴ]_nn
            let ibar = basis.matrix.row(ant).adjoint();
            coeffs.extend(p.trace_coeffs(t_group, &(-(&ibar * ibar.adjoint()))));
            cap_rows.push(p.rows.len());
            p.add_row(&format!("cap{}", ant + 1), inst.antenna_caps_w[ant], coeffs)?;
        }
    }

    let mut psd_blocks = Vec::new();
    for (i, &g) in w_groups.iter().enumerate() {
        psd_blocks.push(p.blocks.len());
        p.add_lmi(&format!("W{}_psd", i + 1), ComplexMatrix::zeros(n, n), vec![Term::Congruence { group: g, coeff: 1.0, map: None }])?;
    }
    psd_blocks.push(p.blocks.len());
    p.add_lmi("T_psd", ComplexMatrix::zeros(m, m), vec![Term::Congruence { group: t_group, coeff: 1.0, map: None }])?;

    let mut mu_rows = Vec::new();
    for (i, &g) in mu_groups.iter().enumerate() {
        mu_rows.push(p.rows.len());
        let off = p.offset(g);
        p.add_row(&format!("mu{}_nonneg", i + 1), 0.0, vec![(off, 1.0)])?;
    }

    Ok(P4 {
        program: p,
        layout: P4Layout { w_groups, t_group, mu_groups, lu_rows, cap_rows, mu_rows, ae_blocks, pe_block, psd_blocks, xi },
    })
}

/// One line of a certification report.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CheckLine {
    pub name: String,
    /// Signed slack; negative means violated.
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Re-verifies every first-stage constraint from (W, T, μ) without touching the solver.
pub fn certify(
    inst: &ProblemInstance,
    tol: &ToleranceSet,
    basis: &NullSpaceBasis,
    w: &[HermitianMatrix],
    t: &HermitianMatrix,
    mu: &[f64],
    rel_tol: f64,
) -> Result<Vec<CheckLine>> {
    let n = inst.n();
    let nz = inst.normalized();
    let z = basis.an_covariance(t);
    let mut out = Vec::new();
    let mut push = |name: String, margin: f64, scale: f64| {
        let tolerance = rel_tol * scale.max(1e-300);
        out.push(CheckLine { name, margin, tolerance, pass: margin >= -tolerance });
    };
    for (k, h) in inst.lu_channels.iter().enumerate() {
        let sig = w[k].quad_form(h);
        let interf: f64 = (0..w.len()).filter(|&i| i != k).map(|i| w[i].quad_form(h)).sum();
        let need = inst.min_sinr[k] * (interf + inst.noise.lu_w);
        push(format!("lu_sinr{}", k + 1), (sig - need) / need, 1.0);
        let leak = z.quad_form(h);
        let allowed = 1e-10 * z.trace().max(0.0) * h.norm_squared();
        push(format!("an_null{}", k + 1), allowed - leak, h.norm_squared() * z.trace().max(1e-300));
    }
    for (r, region) in nz.ae_regions.iter().enumerate() {
        let s = build_ae_lmi(w, t, mu[r], region, tol.ae_sinr[r], nz.ae_noise, basis);
        push(format!("ae{}_lmi", r + 1), s.min_eigenvalue()?, s.norm().max(1.0));
        push(format!("mu{}_nonneg", r + 1), mu[r], 1.0);
    }
    if inst.num_pe > 0 {
        let xi = chance_bound_xi(tol.outage_prob, inst.num_pe, n, tol.pe_sinr, inst.pe_noise_eff_w)?;
        let w_sum = w.iter().fold(HermitianMatrix::zeros(n), |a, b| a.add(b));
        let lhs = w_sum.sub(&z.scale(tol.pe_sinr));
        push("pe_bound".into(), xi - lhs.max_eigenvalue()?, xi.max(lhs.norm()));
    }
    let per_antenna: Vec<f64> =
        (0..n).map(|i| w.iter().map(|wk| wk.get(i, i).re).sum::<f64>() + z.get(i, i).re).collect();
    if inst.sum_power {
        let cap: f64 = inst.antenna_caps_w.iter().sum();
        push("sum_power".into(), cap - per_antenna.iter().sum::<f64>(), cap);
    } else {
        for (i, p) in per_antenna.iter().enumerate() {
            push(format!("cap{}", i + 1), inst.antenna_caps_w[i] - p, inst.antenna_caps_w[i]);
        }
    }
    for (k, wk) in w.iter().enumerate() {
        push(format!("W{}_psd", k + 1), wk.min_eigenvalue()?, wk.norm().max(1e-300));
    }
    push("T_psd".into(), t.min_eigenvalue()?, t.norm().max(1e-300));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_closed_forms() {
        assert!((inverse_chisq_quantile(0.5, 1).unwrap() - 1.0 / (2.0 * 2f64.ln())).abs() < 1e-10);
        assert!((inverse_chisq_quantile(0.05, 1).unwrap() - 1.0 / (-2.0 * 0.05f64.ln())).abs() < 1e-10);
        assert!(inverse_chisq_quantile(1.0, 1).is_err());
        assert!(inverse_chisq_quantile(0.0, 3).is_err());
    }

    #[test]
    fn xi_examples() {
        assert_eq!(chance_bound_xi(0.95, 2, 4, 0.0, 1.0).unwrap(), 0.0);
        assert!((chance_bound_xi(0.95, 1, 1, 1.0, 1.0).unwrap() - 0.166904).abs() < 1e-6);
        assert!(chance_bound_xi(1.5, 1, 1, 1.0, 1.0).is_err());
        assert!(chance_bound_xi(1.0 - 1e-9, 1, 4, 1.0, 1.0).unwrap() < chance_bound_xi(0.5, 1, 4, 1.0, 1.0).unwrap());
    }

    #[test]
    fn null_basis_small() {
        let h = ComplexVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let b = an_null_basis(&[h.clone()]).unwrap();
        assert_eq!(b.matrix.shape(), (2, 1));
        assert!(b.matrix[(0, 0)].norm() < 1e-14);
        assert!(matches!(an_null_basis(&[h.clone(), h.clone()]), Err(Error::DimensionalInfeasibility { .. })));
        let h3 = ComplexVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(an_null_basis(&[h3.clone(), h3 * C64::new(0.0, 2.0)]), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn empty_design_lmi() {
        let center = ComplexVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.5, 0.0)]);
        let basis = an_null_basis(&[center.clone()]).unwrap();
        let region = UncertaintyRegion { center, radius: 0.3 };
        let w = vec![HermitianMatrix::zeros(3)];
        let s = build_ae_lmi(&w, &HermitianMatrix::zeros(2), 1.0, &region, 0.5, 0.04, &basis);
        for i in 0..3 {
            assert!((s.get(i, i).re - 1.0).abs() < 1e-15);
        }
        assert!((s.get(3, 3).re - (0.04 - 0.09)).abs() < 1e-15);
        assert!(!crate::linalg::is_psd(&s, 1e-12));
        let region0 = UncertaintyRegion { radius: 0.0, ..region };
        let s0 = build_ae_lmi(&w, &HermitianMatrix::zeros(2), 0.0, &region0, 0.5, 0.04, &basis);
        assert!((s0.get(3, 3).re - 0.04).abs() < 1e-15 && s0.get(0, 0).re == 0.0);
    }
}
