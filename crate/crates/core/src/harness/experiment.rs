//! Experiment drivers. Sweep points and trials run on the rayon pool; every
//! (point, trial) pair owns a ChaCha stream so results do not depend on
//! scheduling.

use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{draw_pe_channel, lu_links, solve_scenario, PipelineSettings};
use super::results::{mean_std, version_string, Metadata, ResultRow, ResultTable};
use super::scenario::{db_to_linear, linear_to_db, watts_to_dbm};
use super::Scenario;
use crate::array::{los_channel, sample_uncertainty, SampleMode};
use crate::error::{Error, Result};
use crate::metrics::{achievable_rate, eve_sinr_upper, probe_sinr, secrecy_rate};
use crate::minimax::TwoStageResult;
use crate::mvdr::{jamming_snapshots, mvdr_default, receive_beampattern, sample_covariance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PowerVsSnr,
    PowerVsAntennas,
    TxBeampattern,
    PerAntennaPower,
    RxBeampattern,
    SecrecyVsSnr,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::PowerVsSnr,
        Self::PowerVsAntennas,
        Self::TxBeampattern,
        Self::PerAntennaPower,
        Self::RxBeampattern,
        Self::SecrecyVsSnr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PowerVsSnr => "power_vs_snr",
            Self::PowerVsAntennas => "power_vs_antennas",
            Self::TxBeampattern => "tx_beampattern",
            Self::PerAntennaPower => "per_antenna_power",
            Self::RxBeampattern => "rx_beampattern",
            Self::SecrecyVsSnr => "secrecy_vs_snr",
        }
    }

    /// Sweep used when the spec leaves it empty.
    pub fn default_sweep(self, sc: &Scenario) -> Vec<f64> {
        let angle_grid = || (-179..=179).map(|i| i as f64 * 0.5).collect();
        match self {
            Self::PowerVsSnr => vec![5.0, 10.0, 15.0, 20.0],
            Self::PowerVsAntennas => vec![12.0, 16.0, 20.0, 24.0],
            Self::TxBeampattern | Self::RxBeampattern => angle_grid(),
            Self::PerAntennaPower => (1..=sc.tx_antennas).map(|n| n as f64).collect(),
            Self::SecrecyVsSnr => vec![0.0, 5.0, 10.0, 15.0, 20.0],
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Config {
            field: "kind".into(),
            message: format!("unknown experiment `{s}`"),
        })
    }
}

fn default_trials() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// dB for the SNR sweeps, antenna count, angle in degrees, or antenna index.
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self { kind, sweep: Vec::new(), trials: default_trials() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config { field: "experiment".into(), message: e.message().to_string() })
    }

    /// Accepts a TOML file or a bare experiment name.
    pub fn load(arg: &str) -> Result<Self> {
        if let Ok(kind) = arg.parse::<ExperimentKind>() {
            return Ok(Self::new(kind));
        }
        Self::parse(&std::fs::read_to_string(Path::new(arg))?)
    }

    /// Fills an empty sweep and checks the values against the scenario.
    pub fn resolve(&self, sc: &Scenario) -> Result<Self> {
        let bad = |field: &str, message: String| Error::Config { field: field.into(), message };
        if self.trials == 0 {
            return Err(bad("trials", "need at least one trial".into()));
        }
        let sweep = if self.sweep.is_empty() { self.kind.default_sweep(sc) } else { self.sweep.clone() };
        if sweep.is_empty() || sweep.iter().any(|v| !v.is_finite()) {
            return Err(bad("sweep", "sweep values must be finite and non-empty".into()));
        }
        match self.kind {
            ExperimentKind::TxBeampattern | ExperimentKind::RxBeampattern if sweep.iter().any(|a| a.abs() >= 90.0) => {
                return Err(bad("sweep", "angles must lie strictly inside (-90, 90) degrees".into()))
            }
            ExperimentKind::PowerVsAntennas if sweep.iter().any(|&n| n.fract() != 0.0 || n as usize <= sc.num_lu()) => {
                return Err(bad("sweep", format!("antenna counts must be integers above {}", sc.num_lu())))
            }
            ExperimentKind::PerAntennaPower
                if sweep.iter().any(|&n| n.fract() != 0.0 || n < 1.0 || n as usize > sc.tx_antennas) =>
            {
                return Err(bad("sweep", format!("antenna indices must be integers in 1..={}", sc.tx_antennas)))
            }
            _ => {}
        }
        Ok(Self { kind: self.kind, sweep, trials: self.trials })
    }
}

/// Independent stream for one (sweep point, trial) pair.
pub fn trial_rng(seed: u64, point: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | trial as u64);
    rng
}

fn row(sweep: f64, metric: &str, values: &[f64]) -> Option<ResultRow> {
    if values.is_empty() {
        return None;
    }
    let (mean, std) = mean_std(values);
    Some(ResultRow { sweep, metric: metric.to_string(), mean, std, trials: values.len() })
}

/// Row for a value that does not change from trial to trial.
fn fixed_row(sweep: f64, metric: &str, value: f64, trials: usize) -> ResultRow {
    ResultRow { sweep, metric: metric.to_string(), mean: value, std: 0.0, trials }
}

/// Infeasible points become an `infeasible_fraction` row; anything else is an error.
fn solve_point(sc: &Scenario, settings: &PipelineSettings) -> Result<Option<TwoStageResult>> {
    match solve_scenario(sc, settings) {
        Ok(r) => Ok(Some(r)),
        Err(Error::InfeasibleScenario(msg)) => {
            log::warn!("infeasible point: {msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

pub fn run_experiment(sc: &Scenario, spec: &ExperimentSpec, settings: &PipelineSettings) -> Result<ResultTable> {
    let spec = spec.resolve(sc)?;
    let rows = match spec.kind {
        ExperimentKind::PowerVsSnr | ExperimentKind::PowerVsAntennas => power_sweep(sc, &spec, settings)?,
        ExperimentKind::TxBeampattern => tx_beampattern(sc, &spec, settings)?,
        ExperimentKind::PerAntennaPower => per_antenna(sc, &spec, settings)?,
        ExperimentKind::RxBeampattern => rx_beampattern(sc, &spec)?,
        ExperimentKind::SecrecyVsSnr => secrecy_sweep(sc, &spec, settings)?,
    };
    Ok(ResultTable {
        metadata: Metadata {
            experiment: spec.kind.name().to_string(),
            scenario_hash: sc.hash(),
            seed: sc.seed,
            version: version_string(),
        },
        rows,
    })
}

fn point_scenario(sc: &Scenario, kind: ExperimentKind, v: f64) -> Result<Scenario> {
    let mut s = sc.clone();
    match kind {
        ExperimentKind::PowerVsSnr | ExperimentKind::SecrecyVsSnr => s.min_sinr = db_to_linear(v),
        ExperimentKind::PowerVsAntennas => {
            s.tx_antennas = v as usize;
            if s.tx_antennas <= s.num_lu() {
                return Err(Error::DimensionalInfeasibility { users: s.num_lu(), antennas: s.tx_antennas });
            }
        }
        _ => {}
    }
    Ok(s)
}

/// The LoS first stage has no per-trial randomness, so each point is solved
/// once and the value stands for every trial.
fn power_sweep(sc: &Scenario, spec: &ExperimentSpec, settings: &PipelineSettings) -> Result<Vec<ResultRow>> {
    let per_point: Vec<Vec<ResultRow>> = spec
        .sweep
        .par_iter()
        .map(|&v| {
            let s = point_scenario(sc, spec.kind, v)?;
            let mut rows = Vec::new();
            match solve_point(&s, settings)? {
                Some(r) => {
                    rows.push(fixed_row(v, "total_power_dbm", watts_to_dbm(r.solution.total_power_w), spec.trials));
                    rows.push(fixed_row(v, "infeasible_fraction", 0.0, spec.trials));
                }
                None => rows.push(fixed_row(v, "infeasible_fraction", 1.0, spec.trials)),
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn tx_beampattern(sc: &Scenario, spec: &ExperimentSpec, settings: &PipelineSettings) -> Result<Vec<ResultRow>> {
    let res = solve_scenario(sc, settings)?;
    let design = res.solution.design();
    let geom = sc.tx_geometry();
    let range = sc.lu_ranges_m.iter().sum::<f64>() / sc.num_lu() as f64;
    Ok(spec
        .sweep
        .iter()
        .map(|&deg| {
            let h = los_channel(&geom, range, deg.to_radians()).vector;
            fixed_row(deg, "sinr_db", linear_to_db(probe_sinr(&design, &h, sc.lu_noise_w)), spec.trials)
        })
        .collect())
}

fn per_antenna(sc: &Scenario, spec: &ExperimentSpec, settings: &PipelineSettings) -> Result<Vec<ResultRow>> {
    let res = solve_scenario(sc, settings)?;
    let p = &res.solution.per_antenna_power_w;
    Ok(spec.sweep.iter().map(|&n| fixed_row(n, "power_dbm", watts_to_dbm(p[n as usize - 1]), spec.trials)).collect())
}

/// MVDR patterns at every LU; one trial covers the whole angle grid.
fn rx_beampattern(sc: &Scenario, spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let geom = sc.rx_geometry();
    let sources = sc.jamming_sources();
    let grid: Vec<f64> = spec.sweep.iter().map(|d| d.to_radians()).collect();
    // [trial][lu][angle]
    let patterns: Vec<Vec<Vec<f64>>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(sc.seed, 0, trial);
            (0..sc.num_lu())
                .map(|k| {
                    let batch = jamming_snapshots(&mut rng, &geom, &sources, k, sc.lu_noise_w, sc.snapshots)?;
                    let w = mvdr_default(&sample_covariance(&batch), &geom, sc.lu_angles_rad[k])?;
                    Ok(receive_beampattern(&w, &geom, &grid))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, &deg) in spec.sweep.iter().enumerate() {
        for k in 0..sc.num_lu() {
            let vals: Vec<f64> = patterns.iter().map(|p| p[k][i]).collect();
            rows.extend(row(deg, &format!("lu{}_gain_db", k + 1), &vals));
        }
    }
    Ok(rows)
}

struct SecrecyTrial {
    secrecy: f64,
    min_lu_rate: f64,
    max_eve_rate: f64,
}

/// Each trial trains fresh MVDR weights, realizes every AE channel inside its
/// uncertainty ball and draws new Rayleigh PE channels.
fn secrecy_sweep(sc: &Scenario, spec: &ExperimentSpec, settings: &PipelineSettings) -> Result<Vec<ResultRow>> {
    let per_point: Vec<Vec<ResultRow>> = spec
        .sweep
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let s = point_scenario(sc, spec.kind, v)?;
            let Some(res) = solve_point(&s, settings)? else {
                return Ok(vec![fixed_row(v, "infeasible_fraction", 1.0, spec.trials)]);
            };
            let design = res.solution.design();
            let regions = s.ae_regions();
            let trials: Vec<SecrecyTrial> = (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(s.seed, i, t);
                    let lu: Vec<f64> = lu_links(&s, &design, &mut rng)?.iter().map(|l| achievable_rate(l.sinr)).collect();
                    let ae: Vec<f64> = regions
                        .iter()
                        .map(|reg| {
                            let h = sample_uncertainty(reg, &mut rng, SampleMode::Interior);
                            achievable_rate(eve_sinr_upper(&design, &h, s.ae_noise_w))
                        })
                        .collect();
                    let pe: Vec<f64> = (0..s.pe_count)
                        .map(|_| achievable_rate(eve_sinr_upper(&design, &draw_pe_channel(&s, &mut rng), s.pe_noise_w)))
                        .collect();
                    let min_lu_rate = lu.iter().copied().fold(f64::INFINITY, f64::min);
                    let max_eve_rate = ae.iter().chain(&pe).copied().fold(0.0, f64::max);
                    Ok(SecrecyTrial { secrecy: secrecy_rate(&lu, &ae, &pe), min_lu_rate, max_eve_rate })
                })
                .collect::<Result<_>>()?;
            let col = |f: fn(&SecrecyTrial) -> f64| trials.iter().map(f).collect::<Vec<f64>>();
            let mut rows = Vec::new();
            rows.extend(row(v, "secrecy_rate", &col(|t| t.secrecy)));
            rows.extend(row(v, "min_lu_rate", &col(|t| t.min_lu_rate)));
            rows.extend(row(v, "max_eve_rate", &col(|t| t.max_eve_rate)));
            rows.push(fixed_row(v, "infeasible_fraction", 0.0, spec.trials));
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        let s = ExperimentSpec::parse("kind = \"power_vs_snr\"\nsweep = [5.0, 10.0]\ntrials = 3").unwrap();
        assert_eq!(s.kind, ExperimentKind::PowerVsSnr);
        assert_eq!(s.trials, 3);
        assert!(ExperimentSpec::parse("kind = \"nope\"").is_err());
        assert!(ExperimentSpec::parse("kind = \"power_vs_snr\"\nextra = 1").is_err());
        assert_eq!(ExperimentSpec::load("rx_beampattern").unwrap().trials, 100);
    }

    #[test]
    fn resolve_checks_sweep() {
        let sc = Scenario::default();
        let mut s = ExperimentSpec::new(ExperimentKind::PerAntennaPower);
        assert_eq!(s.resolve(&sc).unwrap().sweep.len(), 20);
        s.sweep = vec![21.0];
        assert!(s.resolve(&sc).is_err());
        let mut s = ExperimentSpec::new(ExperimentKind::TxBeampattern);
        s.sweep = vec![90.0];
        assert!(s.resolve(&sc).is_err());
        let mut s = ExperimentSpec::new(ExperimentKind::PowerVsSnr);
        s.trials = 0;
        assert!(s.resolve(&sc).is_err());
    }

    #[test]
    fn streams_are_distinct_and_repeatable() {
        use rand::Rng;
        let a: u64 = trial_rng(1, 0, 0).random();
        assert_eq!(a, trial_rng(1, 0, 0).random::<u64>());
        assert_ne!(a, trial_rng(1, 0, 1).random::<u64>());
        assert_ne!(a, trial_rng(1, 1, 0).random::<u64>());
    }
}
