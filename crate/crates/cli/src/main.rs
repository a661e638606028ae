use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use secbeam::harness::pipeline::{verify_design, AuditSettings, VerifyReport};
use secbeam::harness::scenario::{linear_to_db, watts_to_dbm};
use secbeam::harness::{
    load_scenario, load_solution, run_experiment, save_solution, ExperimentSpec, Format, PipelineSettings, Scenario,
    SolutionFile,
};
use secbeam::robust::{an_null_basis, assemble_p4, certify};
use secbeam::sdp::sdpa::write_sdpa;

#[derive(Parser)]
#[command(name = "secbeam", version, about = "Robust secure multi-beam design with artificial noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); the reference scenario when omitted
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let mut sc = match &self.scenario {
            Some(p) => load_scenario(p).with_context(|| format!("loading {}", p.display()))?,
            None => Scenario::default(),
        };
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        Ok(sc)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and print the certification report
    Solve {
        #[command(flatten)]
        common: Common,
        /// Solution file (JSON)
        #[arg(long, default_value = "solution.json")]
        out: PathBuf,
        /// Second-stage trace (JSON lines)
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Export the initial first-stage program in SDPA sparse format
        #[arg(long)]
        sdpa: Option<PathBuf>,
    },
    /// Run an experiment sweep
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Experiment name (e.g. power_vs_snr) or TOML spec file
        #[arg(long)]
        experiment: String,
        /// Result file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or jsonl; taken from the file extension when omitted
        #[arg(long)]
        format: Option<String>,
        /// Overrides the trials per sweep point
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Re-check a saved solution: constraints plus sampling audits
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solution: PathBuf,
        /// Samples per audit
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Machine-readable report path (JSON)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { common, out, trace, sdpa } => solve(&common.scenario()?, &out, trace.as_deref(), sdpa.as_deref()),
        Command::Sweep { common, experiment, out, format, trials } => {
            sweep(&common.scenario()?, &experiment, out.as_deref(), format.as_deref(), trials)
        }
        Command::Verify { common, solution, trials, out } => verify(&common, &solution, trials, out.as_deref()),
    }
}

fn solve(sc: &Scenario, out: &Path, trace: Option<&Path>, sdpa: Option<&Path>) -> Result<bool> {
    let settings = PipelineSettings::default();
    let inst = sc.instance();
    if let Some(path) = sdpa {
        let basis = an_null_basis(&inst.lu_channels)?;
        let tol = secbeam::harness::pipeline::initial_tolerances(sc, settings.initial_gamma);
        let p4 = assemble_p4(&inst, &tol, &basis)?;
        std::fs::write(path, write_sdpa(&p4.program.to_real()))?;
    }
    let res = secbeam::harness::solve_scenario(sc, &settings)?;
    let sol = &res.solution;
    save_solution(&SolutionFile::from_result(sc, &res), out)?;
    if let Some(path) = trace {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for rec in &res.trace {
            writeln!(f, "{}", serde_json::to_string(rec)?)?;
        }
    }
    let checks = certify(&inst, &res.tolerances, &res.basis, &sol.w_matrices, &sol.t, &sol.mu, 1e-6)?;
    let s = &res.summary;
    println!("scenario {}  seed {}", sc.hash(), sc.seed);
    println!("outer iterations {}  converged {}", res.outer_iterations, res.converged);
    for w in &res.warnings {
        println!("warning: {w}");
    }
    println!("total power {:.4} W ({:.2} dBm)", sol.total_power_w, watts_to_dbm(sol.total_power_w));
    let max_ant = sol.per_antenna_power_w.iter().copied().fold(0.0, f64::max);
    println!("max antenna power {:.2} dBm (cap {:.2} dBm)", watts_to_dbm(max_ant), watts_to_dbm(sc.antenna_cap_w));
    for (k, v) in s.lu_sinr.iter().enumerate() {
        println!("LU{} SINR {:.4} dB  rank ratio {:.2e}", k + 1, linear_to_db(*v), sol.rank_ratios[k]);
    }
    for (r, g) in res.tolerances.ae_sinr.iter().enumerate() {
        println!("AE{} tolerance {:.4} dB", r + 1, linear_to_db(*g));
    }
    if sc.pe_count > 0 {
        println!("PE tolerance {:.4} dB", linear_to_db(res.tolerances.pe_sinr));
    }
    println!("secrecy rate {:.4} bit/s/Hz (LU {:.4}, Eve {:.4})", s.secrecy_rate, s.min_lu_rate, s.max_eve_rate);
    print_checks(&checks);
    println!("solution written to {}", out.display());
    Ok(checks.iter().all(|c| c.pass))
}

fn print_checks(checks: &[secbeam::robust::CheckLine]) {
    for c in checks {
        println!("{:<5} {:<18} margin {:+.3e}  tol {:.1e}", if c.pass { "ok" } else { "FAIL" }, c.name, c.margin, c.tolerance);
    }
}

fn sweep(sc: &Scenario, experiment: &str, out: Option<&Path>, format: Option<&str>, trials: Option<usize>) -> Result<bool> {
    let mut spec = ExperimentSpec::load(experiment).with_context(|| format!("loading experiment {experiment}"))?;
    if let Some(t) = trials {
        spec.trials = t;
    }
    let format: Format = match (format, out.and_then(|p| p.extension()).and_then(|e| e.to_str())) {
        (Some(f), _) => f.parse()?,
        (None, Some(ext)) => ext.parse().unwrap_or(Format::Csv),
        (None, None) => Format::Csv,
    };
    let table = run_experiment(sc, &spec, &PipelineSettings::default())?;
    let text = table.render(format)?;
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn verify(common: &Common, solution: &Path, samples: usize, out: Option<&Path>) -> Result<bool> {
    use rand::SeedableRng;
    let file = load_solution(solution).with_context(|| format!("loading {}", solution.display()))?;
    let sc = common.scenario()?;
    if file.metadata.scenario_hash != sc.hash() {
        log::warn!("solution was computed for scenario {}, checking against {}", file.metadata.scenario_hash, sc.hash());
    }
    let d = file.design()?;
    let audit = AuditSettings { ae_samples: samples, pe_draws: samples, ..AuditSettings::default() };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(sc.seed);
    let report = verify_design(&sc, &d.w, &d.t, &d.mu, &d.tolerances, &audit, &mut rng)?;
    print_report(&report);
    if let Some(p) = out {
        std::fs::write(p, serde_json::to_string_pretty(&serde_json::json!({
            "scenario_hash": sc.hash(),
            "pass": report.pass(),
            "constraints": report.constraints.iter().map(|c| serde_json::json!({
                "name": c.name, "margin": c.margin, "tolerance": c.tolerance, "pass": c.pass
            })).collect::<Vec<_>>(),
            "audits": report.audits,
        }))?)?;
    }
    Ok(report.pass())
}

fn print_report(report: &VerifyReport) {
    print_checks(&report.constraints);
    for a in &report.audits {
        println!("{:<5} {:<30} {:.6} (limit {:.6})", if a.pass { "ok" } else { "FAIL" }, a.name, a.value, a.limit);
    }
    println!("{}", if report.pass() { "PASS" } else { "FAIL" });
}
