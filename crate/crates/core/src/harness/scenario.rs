//! Scenario files: flat `key = value` TOML with dB units, validated into a
//! [`Scenario`] holding linear quantities.
//!
//! Every key is optional; an empty file gives the reference scenario
//! (30 GHz, N = 20, two LUs at −35° and 15°, three AEs at −60°, 3°, 60°,
//! two PEs, 30 dBm per antenna).
//!
//! | key | unit | default |
//! |---|---|---|
//! | `carrier_ghz` | GHz | 30 |
//! | `tx_antennas` | N | 20 |
//! | `rx_antennas` | M | 16 |
//! | `lu_angles_deg` | list | [-35, 15] |
//! | `lu_ranges_m` | list, empty = 1000 each | [] |
//! | `ae_angles_deg` | list | [-60, 3, 60] |
//! | `ae_ranges_m` | list, empty = 1000 each | [] |
//! | `pe_count` | Q | 2 |
//! | `pe_gain_db` | PE large-scale power gain | -170 |
//! | `jam_angles_deg` | one list per LU | [[-70, -10, 40], [-50, -10, 60]] |
//! | `antenna_budget_dbm` | per antenna | 30 |
//! | `lu_noise_dbm` | | -100 |
//! | `ae_noise_dbm` | | -120 |
//! | `pe_noise_dbm` | | -120 |
//! | `min_snr_db` | ζ, all LUs | 15 |
//! | `uncertainty` | χ = ε²/‖ĥ‖² | 0.1 |
//! | `outage_prob` | κ | 0.95 |
//! | `jnr_db` | at each LU | 30 |
//! | `snapshots` | L | 1000 |
//! | `seed` | | 1 |
//! | `sum_power` | replace per-antenna caps by their sum | false |

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::{los_channel, ArrayGeometry, JammingSource, UncertaintyRegion};
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::metrics::LinkNoise;
use crate::robust::ProblemInstance;

const REFERENCE_RANGE_M: f64 = 1000.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub carrier_ghz: f64,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub lu_angles_deg: Vec<f64>,
    pub lu_ranges_m: Vec<f64>,
    pub ae_angles_deg: Vec<f64>,
    pub ae_ranges_m: Vec<f64>,
    pub pe_count: usize,
    pub pe_gain_db: f64,
    pub jam_angles_deg: Vec<Vec<f64>>,
    pub antenna_budget_dbm: f64,
    pub lu_noise_dbm: f64,
    pub ae_noise_dbm: f64,
    pub pe_noise_dbm: f64,
    pub min_snr_db: f64,
    pub uncertainty: f64,
    pub outage_prob: f64,
    pub jnr_db: f64,
    pub snapshots: usize,
    pub seed: u64,
    pub sum_power: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: 30.0,
            tx_antennas: 20,
            rx_antennas: 16,
            lu_angles_deg: vec![-35.0, 15.0],
            lu_ranges_m: Vec::new(),
            ae_angles_deg: vec![-60.0, 3.0, 60.0],
            ae_ranges_m: Vec::new(),
            pe_count: 2,
            pe_gain_db: -170.0,
            jam_angles_deg: vec![vec![-70.0, -10.0, 40.0], vec![-50.0, -10.0, 60.0]],
            antenna_budget_dbm: 30.0,
            lu_noise_dbm: -100.0,
            ae_noise_dbm: -120.0,
            pe_noise_dbm: -120.0,
            min_snr_db: 15.0,
            uncertainty: 0.1,
            outage_prob: 0.95,
            jnr_db: 30.0,
            snapshots: 1000,
            seed: 1,
            sum_power: false,
        }
    }
}

/// Validated scenario in linear units (watts, radians, linear ratios).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub carrier_hz: f64,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub lu_angles_rad: Vec<f64>,
    pub lu_ranges_m: Vec<f64>,
    pub ae_angles_rad: Vec<f64>,
    pub ae_ranges_m: Vec<f64>,
    pub pe_count: usize,
    pub pe_gain: f64,
    /// `[k][r]`: arrival angle of AE r's jamming at LU k.
    pub jam_angles_rad: Vec<Vec<f64>>,
    pub antenna_cap_w: f64,
    pub lu_noise_w: f64,
    pub ae_noise_w: f64,
    pub pe_noise_w: f64,
    pub min_sinr: f64,
    pub uncertainty: f64,
    pub outage_prob: f64,
    pub jnr: f64,
    pub snapshots: usize,
    pub seed: u64,
    pub sum_power: bool,
}

fn bad(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.to_string(), message: message.into() }
}

fn ranges(field: &str, given: &[f64], count: usize) -> Result<Vec<f64>> {
    if given.is_empty() {
        return Ok(vec![REFERENCE_RANGE_M; count]);
    }
    if given.len() != count {
        return Err(bad(field, format!("expected {count} entries, got {}", given.len())));
    }
    if given.iter().any(|&r| !(r > 0.0)) {
        return Err(bad(field, "ranges must be positive"));
    }
    Ok(given.to_vec())
}

fn angles(field: &str, deg: &[f64]) -> Result<Vec<f64>> {
    if deg.iter().any(|a| !(a.abs() < 90.0)) {
        return Err(bad(field, "angles must lie strictly inside (-90, 90) degrees"));
    }
    Ok(deg.iter().map(|a| a.to_radians()).collect())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<Scenario> {
        let k = self.lu_angles_deg.len();
        let r = self.ae_angles_deg.len();
        let n = self.tx_antennas;
        if !(self.carrier_ghz > 0.0) {
            return Err(bad("carrier_ghz", "must be positive"));
        }
        if k == 0 {
            return Err(bad("lu_angles_deg", "need at least one legitimate user"));
        }
        if k >= n {
            return Err(bad("tx_antennas", format!("{k} users need more than {n} transmit antennas")));
        }
        if self.rx_antennas == 0 {
            return Err(bad("rx_antennas", "must be positive"));
        }
        if !(self.outage_prob > 0.0 && self.outage_prob < 1.0) {
            return Err(bad("outage_prob", "must lie in (0, 1)"));
        }
        if !(self.uncertainty >= 0.0 && self.uncertainty.is_finite()) {
            return Err(bad("uncertainty", "must be non-negative"));
        }
        if self.snapshots == 0 {
            return Err(bad("snapshots", "must be positive"));
        }
        let jam_angles_rad = if self.jam_angles_deg.len() == k && self.jam_angles_deg.iter().all(|j| j.len() == r) {
            self.jam_angles_deg.iter().map(|j| angles("jam_angles_deg", j)).collect::<Result<Vec<_>>>()?
        } else if self.jam_angles_deg == ScenarioConfig::default().jam_angles_deg {
            // default list does not fit a custom geometry: jam from the AE bearings
            vec![angles("ae_angles_deg", &self.ae_angles_deg)?; k]
        } else {
            return Err(bad("jam_angles_deg", format!("expected {k} lists of {r} angles")));
        };
        if r > 0 && self.rx_antennas <= r {
            log::warn!("{} receive antennas cannot null {} jammers", self.rx_antennas, r);
        }
        Ok(Scenario {
            carrier_hz: self.carrier_ghz * 1e9,
            tx_antennas: n,
            rx_antennas: self.rx_antennas,
            lu_angles_rad: angles("lu_angles_deg", &self.lu_angles_deg)?,
            lu_ranges_m: ranges("lu_ranges_m", &self.lu_ranges_m, k)?,
            ae_angles_rad: angles("ae_angles_deg", &self.ae_angles_deg)?,
            ae_ranges_m: ranges("ae_ranges_m", &self.ae_ranges_m, r)?,
            pe_count: self.pe_count,
            pe_gain: db_to_linear(self.pe_gain_db),
            jam_angles_rad,
            antenna_cap_w: dbm_to_watts(self.antenna_budget_dbm),
            lu_noise_w: dbm_to_watts(self.lu_noise_dbm),
            ae_noise_w: dbm_to_watts(self.ae_noise_dbm),
            pe_noise_w: dbm_to_watts(self.pe_noise_dbm),
            min_sinr: db_to_linear(self.min_snr_db),
            uncertainty: self.uncertainty,
            outage_prob: self.outage_prob,
            jnr: db_to_linear(self.jnr_db),
            snapshots: self.snapshots,
            seed: self.seed,
            sum_power: self.sum_power,
        })
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let field = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| e.span().map(|s| text[s].to_string()).unwrap_or_default());
        Error::Config { field, message: msg }
    })?;
    cfg.validate()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

impl Default for Scenario {
    fn default() -> Self {
        ScenarioConfig::default().validate().expect("reference scenario is valid")
    }
}

impl Scenario {
    pub fn num_lu(&self) -> usize {
        self.lu_angles_rad.len()
    }

    pub fn num_ae(&self) -> usize {
        self.ae_angles_rad.len()
    }

    pub fn tx_geometry(&self) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(self.tx_antennas, self.carrier_hz)
    }

    pub fn rx_geometry(&self) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(self.rx_antennas, self.carrier_hz)
    }

    pub fn lu_channels(&self) -> Vec<ComplexVector> {
        let g = self.tx_geometry();
        self.lu_angles_rad.iter().zip(&self.lu_ranges_m).map(|(&a, &r)| los_channel(&g, r, a).vector).collect()
    }

    /// ĥ_{a,r} with radius from χ.
    pub fn ae_regions(&self) -> Vec<UncertaintyRegion> {
        let g = self.tx_geometry();
        self.ae_angles_rad
            .iter()
            .zip(&self.ae_ranges_m)
            .map(|(&a, &r)| UncertaintyRegion::from_level(los_channel(&g, r, a).vector, self.uncertainty))
            .collect()
    }

    pub fn noise(&self) -> LinkNoise {
        LinkNoise { lu_w: self.lu_noise_w, ae_w: self.ae_noise_w, pe_w: self.pe_noise_w }
    }

    /// PE noise referred to unit-variance channel entries; the factor 2 turns
    /// ‖h‖² ~ Gamma(N,1) into the χ²_{2N} variable of the bound.
    pub fn pe_noise_eff_w(&self) -> f64 {
        2.0 * self.pe_noise_w / self.pe_gain
    }

    /// Per-AE jamming; power is set so that each LU sees JNR·σ_u².
    pub fn jamming_sources(&self) -> Vec<JammingSource> {
        (0..self.num_ae())
            .map(|r| JammingSource {
                angle_rad: self.jam_angles_rad.iter().map(|row| row[r]).collect(),
                power_w: self.jnr * self.lu_noise_w,
                path_loss: vec![1.0; self.num_lu()],
                unit_power_waveform: true,
            })
            .collect()
    }

    pub fn instance(&self) -> ProblemInstance {
        ProblemInstance {
            lu_channels: self.lu_channels(),
            ae_regions: self.ae_regions(),
            noise: self.noise(),
            min_sinr: vec![self.min_sinr; self.num_lu()],
            antenna_caps_w: vec![self.antenna_cap_w; self.tx_antennas],
            num_pe: self.pe_count,
            pe_noise_eff_w: self.pe_noise_eff_w(),
            sum_power: self.sum_power,
        }
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference() {
        let s = parse_scenario("").unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.num_lu(), 2);
        assert_eq!(s.num_ae(), 3);
        assert!((s.antenna_cap_w - 1.0).abs() < 1e-12);
        assert!((s.lu_noise_w - 1e-13).abs() < 1e-25);
    }

    #[test]
    fn rejects_bad_values() {
        match parse_scenario("outage_prob = 1.5") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "outage_prob"),
            other => panic!("{other:?}"),
        }
        match parse_scenario("tx_antennas = 2") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "tx_antennas"),
            other => panic!("{other:?}"),
        }
        match parse_scenario("bogus_key = 3") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "bogus_key"),
            other => panic!("{other:?}"),
        }
        match parse_scenario("tx_antennas = \"many\"") {
            Err(Error::Config { message, .. }) => assert!(message.contains("integer") || message.contains("invalid")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.min_sinr *= 2.0;
        assert_ne!(a.hash(), b.hash());
    }
}
