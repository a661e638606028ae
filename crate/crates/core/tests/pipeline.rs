use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use secbeam::harness::pipeline::{lu_links, verify_design, AuditSettings};
use secbeam::harness::scenario::parse_scenario;
use secbeam::harness::{
    load_solution, run_experiment, save_solution, ExperimentKind, ExperimentSpec, Format, PipelineSettings, ResultTable,
    Scenario, SolutionFile,
};
use secbeam::minimax::TwoStageResult;
use secbeam::Error;

fn reference() -> &'static TwoStageResult {
    static CELL: OnceLock<TwoStageResult> = OnceLock::new();
    CELL.get_or_init(|| secbeam::harness::solve_scenario(&Scenario::default(), &PipelineSettings::default()).unwrap())
}

#[test]
fn reference_design_meets_lu_targets() {
    let res = reference();
    let sc = Scenario::default();
    for s in &res.summary.lu_sinr {
        assert!((10.0 * s.log10() - 15.0).abs() < 0.1);
    }
    assert!(res.tolerances.ae_sinr.iter().all(|&g| g < sc.min_sinr));
    assert!(res.summary.secrecy_rate > 0.0);
    // MVDR only adds array gain on top of the transmit-side SINR
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (k, link) in lu_links(&sc, &res.solution.design(), &mut rng).unwrap().iter().enumerate() {
        assert!(link.sinr >= res.summary.lu_sinr[k]);
    }
}

#[test]
fn saved_solution_verifies() {
    let sc = Scenario::default();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sol.json");
    let file = SolutionFile::from_result(&sc, reference());
    save_solution(&file, &path).unwrap();
    let back = load_solution(&path).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.metadata.scenario_hash, sc.hash());
    let d = back.design().unwrap();
    let audit = AuditSettings { ae_samples: 500, pe_draws: 2000, ..AuditSettings::default() };
    let report = verify_design(&sc, &d.w, &d.t, &d.mu, &d.tolerances, &audit, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(report.pass(), "{:?}", report);
}

#[test]
fn tampered_solution_fails_verification() {
    let sc = Scenario::default();
    let mut file = SolutionFile::from_result(&sc, reference());
    for v in &mut file.solution.beams[0] {
        *v *= 0.9;
    }
    let d = file.design().unwrap();
    let audit = AuditSettings { ae_samples: 10, pe_draws: 10, ..AuditSettings::default() };
    let report = verify_design(&sc, &d.w, &d.t, &d.mu, &d.tolerances, &audit, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(!report.pass());
    assert!(report.constraints.iter().any(|c| c.name == "lu_sinr1" && !c.pass));
}

#[test]
fn scenario_errors_name_the_field() {
    match parse_scenario("outage_prob = 1.5") {
        Err(Error::Config { field, .. }) => assert_eq!(field, "outage_prob"),
        other => panic!("{other:?}"),
    }
    match parse_scenario("tx_antennas = 2") {
        Err(Error::Config { field, .. }) => assert_eq!(field, "tx_antennas"),
        other => panic!("{other:?}"),
    }
    let sc = parse_scenario("antenna_budget_dbm = 30").unwrap();
    assert!((sc.antenna_cap_w - 1.0).abs() < 1e-12);
}

#[test]
fn sweeps_are_byte_stable() {
    let sc = Scenario::default();
    let spec = ExperimentSpec { kind: ExperimentKind::SecrecyVsSnr, sweep: vec![10.0], trials: 4 };
    let a = run_experiment(&sc, &spec, &PipelineSettings::default()).unwrap();
    let b = run_experiment(&sc, &spec, &PipelineSettings::default()).unwrap();
    for f in [Format::Csv, Format::Jsonl] {
        let (ta, tb) = (a.render(f).unwrap(), b.render(f).unwrap());
        assert_eq!(ta, tb);
        assert_eq!(ResultTable::parse(&ta, f).unwrap(), a);
        assert!(ta.contains(&sc.hash()));
    }
    let mut other = sc.clone();
    other.seed = 2;
    let c = run_experiment(&other, &spec, &PipelineSettings::default()).unwrap();
    assert_ne!(c.rows, a.rows);
}

#[test]
fn infeasible_points_are_recorded() {
    // high SNR with a tight PE bound cannot be met
    let sc = Scenario::default();
    let spec = ExperimentSpec { kind: ExperimentKind::PowerVsSnr, sweep: vec![40.0], trials: 1 };
    let t = run_experiment(&sc, &spec, &PipelineSettings::default()).unwrap();
    let row = t.rows_for("infeasible_fraction").next().unwrap();
    assert_eq!(row.mean, 1.0);
    assert!(t.rows_for("total_power_dbm").next().is_none());
}
