//! Closed-form and external-reference checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};

use secbeam::array::{complex_gaussian, steering_vector, ArrayGeometry, UncertaintyRegion};
use secbeam::linalg::{ComplexVector, HermitianMatrix, C64};
use secbeam::metrics::LinkNoise;
use secbeam::minimax::{bfgs_minimize, grad_phi_p, minimize_tolerances, omega_star, phi_p, psi_p, PenaltyParams, PenaltyTerms};
use secbeam::mvdr::{mvdr_weights, sample_covariance, SnapshotBatch};
use secbeam::robust::{an_null_basis, assemble_p4, inverse_chisq_quantile, ProblemInstance, ToleranceSet};
use secbeam::sdp::beam::to_beamforming_solution;
use secbeam::sdp::sdpa::read_sdpa;
use secbeam::sdp::{solve, solve_p4, SolveStatus, SolverSettings};

fn mrt_instance(n: usize, zeta: f64) -> ProblemInstance {
    let g = ArrayGeometry::half_wavelength(n, 30e9);
    let h = steering_vector(&g, 0.4) * C64::new(3e-7, 0.0);
    ProblemInstance {
        lu_channels: vec![h],
        ae_regions: vec![],
        noise: LinkNoise { lu_w: 1e-13, ae_w: 1e-15, pe_w: 1e-15 },
        min_sinr: vec![zeta],
        antenna_caps_w: vec![100.0; n],
        num_pe: 0,
        pe_noise_eff_w: 1.0,
        sum_power: false,
    }
}

#[test]
fn sdpa_manual_example_optimum() {
    // reference optimum -41.9 at x = (-1.1, -2.7375, -0.55)
    let text = "3\n1\n2\n48 -8 20\n0 1 1 1 -11\n0 1 2 2 23\n1 1 1 1 10\n1 1 1 2 4\n2 1 2 2 -8\n3 1 1 2 -8\n3 1 2 2 -2\n";
    let p = read_sdpa(text).unwrap();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective + 41.9).abs() < 41.9 * 1e-7, "{}", sol.objective);
    for (x, e) in sol.x.iter().zip([-1.1, -2.7375, -0.55]) {
        assert!((x - e).abs() < 1e-5, "{x} vs {e}");
    }
    assert!(sol.relative_gap() <= 1e-7);
}

#[test]
fn single_user_power_is_mrt() {
    for (n, zeta) in [(4, 10.0), (8, 31.6), (12, 3.0)] {
        let inst = mrt_instance(n, zeta);
        let tol = ToleranceSet { ae_sinr: vec![], pe_sinr: 0.0, outage_prob: 0.95 };
        let basis = an_null_basis(&inst.lu_channels).unwrap();
        let p4 = assemble_p4(&inst, &tol, &basis).unwrap();
        let sdp = solve_p4(&p4, &SolverSettings::default()).unwrap();
        let sol = to_beamforming_solution(&sdp, &p4, &basis).unwrap();
        let h = &inst.lu_channels[0];
        let expect = zeta * inst.noise.lu_w / h.norm_squared();
        let got = sol.w_matrices[0].trace();
        assert!((got - expect).abs() <= 1e-6 * expect, "N={n}: {got} vs {expect}");
        // the beam is aligned with the channel
        let align = h.dotc(&sol.beams[0]).norm() / (h.norm() * sol.beams[0].norm());
        assert!((align - 1.0).abs() < 1e-8);
        assert!(sdp.relative_gap() <= 1e-7);
    }
}

#[test]
fn embedded_and_native_agree() {
    let g = ArrayGeometry::half_wavelength(5, 30e9);
    let h = steering_vector(&g, -0.3) * C64::new(3e-7, 0.0);
    let ae = steering_vector(&g, 0.7) * C64::new(3e-7, 0.0);
    let inst = ProblemInstance {
        lu_channels: vec![h],
        ae_regions: vec![UncertaintyRegion::from_level(ae, 0.1)],
        noise: LinkNoise { lu_w: 1e-13, ae_w: 1e-15, pe_w: 1e-15 },
        min_sinr: vec![10.0],
        antenna_caps_w: vec![1.0; 5],
        num_pe: 0,
        pe_noise_eff_w: 1.0,
        sum_power: false,
    };
    let tol = ToleranceSet::uniform(1, 0.3, 0.95);
    let basis = an_null_basis(&inst.lu_channels).unwrap();
    let p4 = assemble_p4(&inst, &tol, &basis).unwrap();
    let a = solve_p4(&p4, &SolverSettings::default()).unwrap();
    let b = secbeam::sdp::solve_embedded(&p4.program, &SolverSettings::default()).unwrap();
    assert_eq!(a.status, SolveStatus::Optimal);
    assert_eq!(b.status, SolveStatus::Optimal);
    assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective.abs());
}

#[test]
fn bfgs_one_dimensional_quadratic() {
    let params = PenaltyParams::default();
    let out = bfgs_minimize(|x| (x[0] - 2.0).powi(2), |x| vec![2.0 * (x[0] - 2.0)], &[0.5], &params).unwrap();
    assert!(out.converged);
    assert!(out.iterations <= 5, "{} iterations", out.iterations);
    assert!((out.x[0] - 2.0).abs() < 1e-8);
}

#[test]
fn bfgs_rosenbrock() {
    let params = PenaltyParams { epsilon: 1e-16, max_bfgs_iters: 5000, ..PenaltyParams::default() };
    let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let g = |x: &[f64]| vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0])];
    let out = bfgs_minimize(f, g, &[-1.2, 1.0], &params).unwrap();
    assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5, "{:?}", out.x);
}

fn two_term_instance() -> PenaltyTerms {
    PenaltyTerms { entries: vec![vec![(1.0, 0.30), (1.0, 0.12), (1.0, -0.05)], vec![(1.0, 0.29), (1.0, 0.2)]] }
}

#[test]
fn gradient_matches_central_differences() {
    let t = two_term_instance();
    for p in [10.0, 100.0, 1000.0] {
        for g in [[0.31, 0.30], [0.5, 0.33], [0.295, 0.35]] {
            let an = grad_phi_p(&g, &t, p);
            for i in 0..2 {
                let h = 1e-6 * g[i];
                let mut up = g;
                let mut dn = g;
                up[i] += h;
                dn[i] -= h;
                let fd = (phi_p(&up, &t, p) - phi_p(&dn, &t, p)) / (2.0 * h);
                assert!((an[i] - fd).abs() <= 1e-5 * an[i].abs().max(1e-3), "p={p} g={g:?} i={i}: {} vs {fd}", an[i]);
            }
        }
    }
}

#[test]
fn bfgs_minimizer_matches_grid_search() {
    let t = two_term_instance();
    let params = PenaltyParams::default();
    let p = *params.p_schedule.last().unwrap();
    let g = minimize_tolerances(&t, &[0.5, 0.5], &params, |_, _, _| {}).unwrap();
    let (lo, hi, cells) = (0.25, 0.35, 200);
    let step = (hi - lo) / cells as f64;
    let mut best = (f64::INFINITY, [0.0; 2]);
    for i in 0..=cells {
        for j in 0..=cells {
            let x = [lo + i as f64 * step, lo + j as f64 * step];
            let v = psi_p(omega_star(&x, p), &x, &t, p);
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    for i in 0..2 {
        assert!((g[i] - best.1[i]).abs() <= step, "coordinate {i}: {} vs grid {}", g[i], best.1[i]);
    }
    // eliminating ω reproduces φ_p
    assert!((psi_p(omega_star(&g, p), &g, &t, p) - phi_p(&g, &t, p)).abs() < 1e-12);
}

#[test]
fn mvdr_matches_sherman_morrison() {
    let m = 8;
    let geom = ArrayGeometry::half_wavelength(m, 30e9);
    let a = steering_vector(&geom, 0.2);
    let b = steering_vector(&geom, -0.6);
    let (s2, p) = (0.5, 1000.0);
    let r = HermitianMatrix::identity(m).scale(s2).add(&HermitianMatrix::outer(&b).scale(p));
    let v = mvdr_weights(&r, &a, 0.0, 0.2).unwrap().weights;
    // R⁻¹ = (I − c bbᴴ)/σ², c = P/(σ² + P M)
    let c = p / (s2 + p * m as f64);
    let rinv_a: ComplexVector = (&a - &b * (b.dotc(&a) * C64::new(c, 0.0))) / C64::new(s2, 0.0);
    let expect = &rinv_a / a.dotc(&rinv_a).conj();
    assert!((&v - &expect).norm() < 1e-10 * expect.norm());
    assert!((a.dotc(&v) - C64::new(1.0, 0.0)).norm() < 1e-10);
    assert!(b.dotc(&v).norm_sqr() < s2 / (p * m as f64));
}

#[test]
fn white_noise_covariance_converges() {
    let m = 4;
    let mut inside = 0;
    let trials = 200;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(t);
        for l in [100usize, 1000] {
            let snaps: Vec<_> = (0..l).map(|_| complex_gaussian(&mut rng, m, 1.0)).collect();
            let r = sample_covariance(&SnapshotBatch::new(snaps).unwrap());
            let dev = r.sub(&HermitianMatrix::identity(m)).norm();
            if l == 1000 && dev <= 5.0 / (l as f64).sqrt() {
                inside += 1;
            }
        }
    }
    assert!(inside as f64 >= 0.95 * trials as f64, "{inside}/{trials}");
}

#[test]
fn chance_quantile_matches_monte_carlo() {
    // Pr{1/X ≤ q} = p for X ~ χ²_{2N}
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (p, n) in [(0.05, 4usize), (0.025, 20)] {
        let q = inverse_chisq_quantile(p, n).unwrap();
        let chi = ChiSquared::new(2.0 * n as f64).unwrap();
        let draws = 200_000;
        let hits = (0..draws).filter(|_| 1.0 / chi.sample(&mut rng) <= q).count();
        let emp = hits as f64 / draws as f64;
        assert!((emp - p).abs() < 4.0 * (p * (1.0 - p) / draws as f64).sqrt(), "p={p}: {emp}");
    }
}
