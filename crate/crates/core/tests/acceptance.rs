//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use secbeam::array::{steering_vector, ArrayGeometry};
use secbeam::harness::experiment::trial_rng;
use secbeam::harness::pipeline::{ae_boundary_audit, pe_outage_audit};
use secbeam::harness::scenario::{dbm_to_watts, linear_to_db, watts_to_dbm};
use secbeam::harness::{run_experiment, solve_scenario, ExperimentKind, ExperimentSpec, Format, PipelineSettings, Scenario, ScenarioConfig};
use secbeam::linalg::C64;
use secbeam::metrics::LinkNoise;
use secbeam::minimax::{bfgs_minimize, grad_phi_p, minimize_tolerances, omega_star, phi_p, psi_p, PenaltyParams, PenaltyTerms, TwoStageResult};
use secbeam::mvdr::{jamming_snapshots, mvdr_default, receive_beampattern, sample_covariance};
use secbeam::robust::{an_null_basis, assemble_p4, ProblemInstance, ToleranceSet};
use secbeam::sdp::beam::to_beamforming_solution;
use secbeam::sdp::{solve_p4, SolverSettings};
use secbeam::Error;

const SUITE_SIZE: usize = 50;
const AUDIT_SAMPLES: usize = 10_000;

struct Solved {
    scenario: Scenario,
    result: TwoStageResult,
}

fn settings() -> PipelineSettings {
    PipelineSettings::default()
}

fn reference() -> &'static Solved {
    static CELL: OnceLock<Solved> = OnceLock::new();
    CELL.get_or_init(|| {
        let scenario = Scenario::default();
        let result = solve_scenario(&scenario, &settings()).expect("reference scenario solves");
        Solved { scenario, result }
    })
}

/// Outcome of drawing random scenarios until `SUITE_SIZE` of them solve.
struct Suite {
    solved: Vec<Solved>,
    infeasible: usize,
    failures: Vec<String>,
}

fn random_config(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let k = rng.random_range(1..=2);
    let r = rng.random_range(1..=3);
    let mut angles: Vec<f64> = Vec::new();
    while angles.len() < k + r {
        let a = rng.random_range(-75.0..75.0f64).round();
        if angles.iter().all(|b| (a - b).abs() >= 10.0) {
            angles.push(a);
        }
    }
    ScenarioConfig {
        tx_antennas: [8, 10, 12, 16][rng.random_range(0..4)],
        lu_angles_deg: angles[..k].to_vec(),
        ae_angles_deg: angles[k..].to_vec(),
        pe_count: rng.random_range(0..=2),
        min_snr_db: rng.random_range(5.0..15.0f64).round(),
        uncertainty: rng.random_range(0.02..0.2),
        ..ScenarioConfig::default()
    }
}

fn suite() -> &'static Suite {
    static CELL: OnceLock<Suite> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut out = Suite { solved: Vec::new(), infeasible: 0, failures: Vec::new() };
        let mut attempts = 0;
        while out.solved.len() + out.failures.len() < SUITE_SIZE && attempts < 4 * SUITE_SIZE {
            attempts += 1;
            let scenario = random_config(&mut rng).validate().expect("generated config is valid");
            match solve_scenario(&scenario, &settings()) {
                Ok(result) => out.solved.push(Solved { scenario, result }),
                Err(Error::InfeasibleScenario(_)) => out.infeasible += 1,
                Err(e) => out.failures.push(format!("instance {attempts}: {e}")),
            }
        }
        out
    })
}

fn all_solved() -> impl Iterator<Item = &'static Solved> {
    std::iter::once(reference()).chain(suite().solved.iter())
}

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c1_beampattern() -> Check {
    let t0 = Instant::now();
    let sc = Scenario::default();
    let lu: Vec<f64> = vec![-35.0, 15.0];
    let ae: Vec<f64> = vec![-60.0, 3.0, 60.0];
    let spec = ExperimentSpec { kind: ExperimentKind::TxBeampattern, sweep: [lu.clone(), ae.clone()].concat(), trials: 1 };
    let table = run_experiment(&sc, &spec, &settings()).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let at = |deg: f64| table.rows.iter().find(|r| r.sweep == deg).map(|r| r.mean).unwrap_or(f64::NAN);
    let lu_db: Vec<f64> = lu.iter().map(|&d| at(d)).collect();
    let peak = lu_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ae_max = ae.iter().map(|&d| at(d)).fold(f64::NEG_INFINITY, f64::max);
    let ok = lu_db.iter().all(|v| (v - 15.0).abs() <= 0.1) && peak - ae_max >= 20.0 && secs < 60.0;
    ensure(ok, format!("LU SINR {:.4}/{:.4} dB, strongest AE direction {:.2} dB ({:.1} dB below peak), {secs:.1} s", lu_db[0], lu_db[1], ae_max, peak - ae_max))
}

fn cap_report(sol: &secbeam::sdp::BeamformingSolution, cap_w: f64) -> (bool, String) {
    let max_w = sol.per_antenna_power_w.iter().copied().fold(0.0, f64::max);
    let cap_dbm = watts_to_dbm(cap_w);
    let within = watts_to_dbm(max_w) <= cap_dbm + 0.01;
    let dual_scale = sol.cap_duals.iter().copied().fold(0.0, f64::max);
    let active = dual_scale > 1e-6;
    let near = sol.per_antenna_power_w.iter().any(|&p| watts_to_dbm(p) >= cap_dbm - 0.5);
    let ok = within && (!active || near);
    (ok, format!("max {:.3} dBm vs cap {:.1} dBm, caps {}", watts_to_dbm(max_w), cap_dbm, if active { "active" } else { "inactive" }))
}

fn c2_per_antenna() -> Check {
    let r = reference();
    let (ok_default, msg_default) = cap_report(&r.result.solution, r.scenario.antenna_cap_w);
    // a tighter budget exercises the active-cap branch
    let tight = ScenarioConfig { antenna_budget_dbm: 16.0, ..ScenarioConfig::default() }.validate().map_err(|e| e.to_string())?;
    let res = solve_scenario(&tight, &settings()).map_err(|e| e.to_string())?;
    let (ok_tight, msg_tight) = cap_report(&res.solution, tight.antenna_cap_w);
    ensure(ok_default && ok_tight, format!("default: {msg_default}; 16 dBm budget: {msg_tight}"))
}

fn c3_null_space() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for s in all_solved() {
        let z = &s.result.solution.z;
        for h in s.scenario.lu_channels() {
            let bound = 1e-10 * z.trace() * h.norm_squared();
            let leak = z.quad_form(&h);
            worst = worst.max(leak / (z.trace() * h.norm_squared()).max(f64::MIN_POSITIVE));
            count += 1;
            if leak > bound {
                return Err(format!("leak {leak:.3e} above {bound:.3e}"));
            }
        }
    }
    Ok(format!("{count} LU channels, worst hᴴZh/(Tr Z ‖h‖²) = {worst:.2e}"))
}

fn c4_rank() -> Check {
    let s = suite();
    let ratios: Vec<f64> = s.solved.iter().flat_map(|x| x.result.solution.rank_ratios.iter().copied()).collect();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let msg = format!(
        "{} instances solved ({} infeasible draws skipped), {} beams, worst λ₂/λ₁ = {worst:.2e}",
        s.solved.len(),
        s.infeasible,
        ratios.len()
    );
    if !s.failures.is_empty() {
        return Err(format!("{msg}; failures: {}", s.failures.join("; ")));
    }
    ensure(s.solved.len() == SUITE_SIZE && worst <= 1e-6, msg)
}

fn c5_s_procedure() -> Check {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for (i, s) in all_solved().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i as u64);
        let design = s.result.solution.design();
        for ratio in ae_boundary_audit(&s.scenario, &design, &s.result.tolerances, AUDIT_SAMPLES, &mut rng) {
            worst = worst.max(ratio);
            n += 1;
        }
    }
    ensure(worst <= 1.0 + 1e-6, format!("{n} AE regions x {AUDIT_SAMPLES} boundary samples, worst SINR/Γ = {worst:.6}"))
}

fn c6_chance() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, s) in all_solved().enumerate().filter(|(_, s)| s.scenario.pe_count > 0) {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + i as u64);
        let frac = pe_outage_audit(&s.scenario, &s.result.solution.design(), s.result.tolerances.pe_sinr, AUDIT_SAMPLES, &mut rng);
        ok &= frac >= s.scenario.outage_prob;
        lines.push(frac);
    }
    let min = lines.iter().copied().fold(1.0, f64::min);
    let default = lines.first().copied().unwrap_or(f64::NAN);
    ensure(ok, format!("{} instances x {AUDIT_SAMPLES} draws, reference {default:.4}, lowest {min:.4} (κ = 0.95)", lines.len()))
}

fn c7_sdp_oracle() -> Check {
    let n = 12;
    let g = ArrayGeometry::half_wavelength(n, 30e9);
    let h = steering_vector(&g, 0.25) * C64::new(7.9e-7, 0.0);
    let zeta = 31.6;
    let noise = dbm_to_watts(-100.0);
    let inst = ProblemInstance {
        lu_channels: vec![h.clone()],
        ae_regions: vec![],
        noise: LinkNoise { lu_w: noise, ae_w: noise, pe_w: noise },
        min_sinr: vec![zeta],
        antenna_caps_w: vec![1.0; n],
        num_pe: 0,
        pe_noise_eff_w: 1.0,
        sum_power: false,
    };
    let tol = ToleranceSet { ae_sinr: vec![], pe_sinr: 0.0, outage_prob: 0.95 };
    let basis = an_null_basis(&inst.lu_channels).map_err(|e| e.to_string())?;
    let p4 = assemble_p4(&inst, &tol, &basis).map_err(|e| e.to_string())?;
    let sdp = solve_p4(&p4, &SolverSettings::default()).map_err(|e| e.to_string())?;
    let sol = to_beamforming_solution(&sdp, &p4, &basis).map_err(|e| e.to_string())?;
    let expect = zeta * noise / h.norm_squared();
    let rel = (sol.w_matrices[0].trace() - expect).abs() / expect;
    let mut gaps = vec![sdp.relative_gap()];
    gaps.extend(all_solved().map(|s| {
        let b = &s.result.solution;
        (b.objective - b.dual_objective).abs() / (1.0 + b.objective.abs())
    }));
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    ensure(rel <= 1e-6 && worst <= 1e-7, format!("MRT relative error {rel:.2e}; worst relative gap {worst:.2e} over {} programs", gaps.len()))
}

fn c8_penalty_oracle() -> Check {
    // two stacked tolerances whose bounds are close, so both coordinates
    // shape the minimizer
    let terms = PenaltyTerms { entries: vec![vec![(1.0, 0.30), (1.0, 0.12), (1.0, -0.05)], vec![(1.0, 0.29), (1.0, 0.2)]] };
    let params = PenaltyParams::default();
    let p = *params.p_schedule.last().expect("schedule");
    let g = minimize_tolerances(&terms, &[0.5, 0.5], &params, |_, _, _| {}).map_err(|e| e.to_string())?;
    let (lo, hi, cells) = (0.25, 0.35, 200);
    let step = (hi - lo) / cells as f64;
    let mut best = (f64::INFINITY, [0.0; 2]);
    for i in 0..cells {
        for j in 0..cells {
            let x = [lo + (i as f64 + 0.5) * step, lo + (j as f64 + 0.5) * step];
            let v = psi_p(omega_star(&x, p), &x, &terms, p);
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    let cell_err = (0..2).map(|i| (g[i] - best.1[i]).abs() / step).fold(0.0, f64::max);
    let mut fd_err: f64 = 0.0;
    for pp in [10.0, 100.0, 1000.0] {
        for x in [[0.31, 0.30], [0.5, 0.33], [0.295, 0.35]] {
            let an = grad_phi_p(&x, &terms, pp);
            for i in 0..2 {
                let h = 1e-6 * x[i];
                let (mut up, mut dn) = (x, x);
                up[i] += h;
                dn[i] -= h;
                let fd = (phi_p(&up, &terms, pp) - phi_p(&dn, &terms, pp)) / (2.0 * h);
                fd_err = fd_err.max((an[i] - fd).abs() / an[i].abs().max(1e-3));
            }
        }
    }
    ensure(
        cell_err <= 1.0 && fd_err <= 1e-5,
        format!("BFGS ({:.5}, {:.5}) vs grid ({:.5}, {:.5}): {cell_err:.2} cells; gradient vs central differences {fd_err:.1e}", g[0], g[1], best.1[0], best.1[1]),
    )
}

fn c9_bfgs() -> Check {
    let params = PenaltyParams::default();
    let q = bfgs_minimize(|x| (x[0] - 2.0).powi(2), |x| vec![2.0 * (x[0] - 2.0)], &[0.5], &params).map_err(|e| e.to_string())?;
    let tight = PenaltyParams { epsilon: 1e-16, max_bfgs_iters: 5000, ..PenaltyParams::default() };
    let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let df = |x: &[f64]| vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0])];
    let r = bfgs_minimize(f, df, &[-1.2, 1.0], &tight).map_err(|e| e.to_string())?;
    let err = (r.x[0] - 1.0).abs().max((r.x[1] - 1.0).abs());
    ensure(
        q.iterations <= 5 && (q.x[0] - 2.0).abs() < 1e-8 && err < 1e-5,
        format!("quadratic: {} iterations to {:.10}; Rosenbrock: {} iterations, error {err:.1e}", q.iterations, q.x[0], r.iterations),
    )
}

fn c10_mvdr() -> Check {
    let sc = Scenario::default();
    let geom = sc.rx_geometry();
    let sources = sc.jamming_sources();
    let mut rng = trial_rng(sc.seed, 0, 0);
    let mut worst_null = f64::NEG_INFINITY;
    let mut worst_target: f64 = 0.0;
    for k in 0..sc.num_lu() {
        let batch = jamming_snapshots(&mut rng, &geom, &sources, k, sc.lu_noise_w, sc.snapshots).map_err(|e| e.to_string())?;
        let w = mvdr_default(&sample_covariance(&batch), &geom, sc.lu_angles_rad[k]).map_err(|e| e.to_string())?;
        let jams: Vec<f64> = sc.jam_angles_rad[k].clone();
        for v in receive_beampattern(&w, &geom, &jams) {
            worst_null = worst_null.max(v);
        }
        worst_target = worst_target.max(receive_beampattern(&w, &geom, &[sc.lu_angles_rad[k]])[0].abs());
    }
    ensure(
        worst_null <= -30.0 && worst_target <= 1e-8,
        format!("M = {}, L = {}, JNR {:.0} dB: shallowest null {worst_null:.1} dB, target deviation {worst_target:.1e} dB", sc.rx_antennas, sc.snapshots, linear_to_db(sc.jnr)),
    )
}

fn power_curve(sc: &Scenario, kind: ExperimentKind) -> Result<Vec<(f64, f64)>, String> {
    let table = run_experiment(sc, &ExperimentSpec { kind, sweep: Vec::new(), trials: 100 }, &settings()).map_err(|e| e.to_string())?;
    if table.rows_for("infeasible_fraction").any(|r| r.mean > 0.0) {
        return Err(format!("{} has infeasible points", kind.name()));
    }
    Ok(table.rows_for("total_power_dbm").map(|r| (r.sweep, r.mean)).collect())
}

fn c11_trends() -> Check {
    let t0 = Instant::now();
    let base = Scenario::default();
    let snr = power_curve(&base, ExperimentKind::PowerVsSnr)?;
    let ant = power_curve(&base, ExperimentKind::PowerVsAntennas)?;
    let loose = ScenarioConfig { uncertainty: 0.5, ..ScenarioConfig::default() }.validate().map_err(|e| e.to_string())?;
    let snr_loose = power_curve(&loose, ExperimentKind::PowerVsSnr)?;
    let secs = t0.elapsed().as_secs_f64();
    let inc = snr.windows(2).all(|w| w[1].1 > w[0].1);
    let dec = ant.windows(2).all(|w| w[1].1 < w[0].1);
    let above = snr.len() == snr_loose.len() && snr.iter().zip(&snr_loose).all(|(a, b)| b.1 >= a.1);
    let fmt = |c: &[(f64, f64)]| c.iter().map(|(_, p)| format!("{p:.2}")).collect::<Vec<_>>().join(" ");
    ensure(
        inc && dec && above && secs < 1800.0,
        format!(
            "ζ sweep [{}] dBm, χ=0.5 [{}] dBm, N sweep [{}] dBm, {secs:.0} s",
            fmt(&snr),
            fmt(&snr_loose),
            fmt(&ant)
        ),
    )
}

fn c12_determinism() -> Check {
    let sc = Scenario::default();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let specs = [
        ExperimentSpec { kind: ExperimentKind::SecrecyVsSnr, sweep: vec![5.0, 15.0], trials: 20 },
        ExperimentSpec { kind: ExperimentKind::RxBeampattern, sweep: Vec::new(), trials: 10 },
    ];
    let mut files = 0;
    for spec in &specs {
        for format in [Format::Csv, Format::Jsonl] {
            let mut bytes = Vec::new();
            for run in 0..2 {
                let table = run_experiment(&sc, spec, &settings()).map_err(|e| e.to_string())?;
                let path = dir.path().join(format!("{}-{run}", spec.kind.name()));
                secbeam::harness::emit_results(&table, format, &path).map_err(|e| e.to_string())?;
                bytes.push(std::fs::read(&path).map_err(|e| e.to_string())?);
            }
            if bytes[0] != bytes[1] {
                return Err(format!("{} {format:?} output differs between runs", spec.kind.name()));
            }
            files += 1;
        }
    }
    Ok(format!("{files} result files byte-identical across two runs"))
}

fn main() {
    let _ = env_logger::try_init();
    let criteria: [(&str, fn() -> Check); 12] = [
        ("beampattern compliance", c1_beampattern),
        ("per-antenna budget", c2_per_antenna),
        ("null-space exactness", c3_null_space),
        ("rank-one relaxation", c4_rank),
        ("S-procedure robustness", c5_s_procedure),
        ("chance-constraint conservatism", c6_chance),
        ("SDP solver oracle", c7_sdp_oracle),
        ("penalty-stage oracle", c8_penalty_oracle),
        ("BFGS sanity", c9_bfgs),
        ("MVDR nulls", c10_mvdr),
        ("trend reproduction", c11_trends),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{secs:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
