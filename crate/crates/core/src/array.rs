//! Far-field uniform linear array models, free-space path loss and the
//! bounded channel uncertainty of active eavesdroppers.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{C64, ComplexVector};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrayGeometry {
    pub num_elements: usize,
    pub element_spacing_m: f64,
    pub carrier_hz: f64,
}

impl ArrayGeometry {
    pub fn half_wavelength(num_elements: usize, carrier_hz: f64) -> Self {
        Self {
            num_elements,
            element_spacing_m: SPEED_OF_LIGHT / (2.0 * carrier_hz),
            carrier_hz,
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Spacing beyond half a wavelength lets grating lobes into visible space.
    pub fn grating_lobe_risk(&self) -> bool {
        self.element_spacing_m > self.wavelength_m() / 2.0 * (1.0 + 1e-12)
    }
}

#[derive(Clone, Debug)]
pub struct LosChannel {
    pub range_m: f64,
    pub angle_rad: f64,
    pub vector: ComplexVector,
}

#[derive(Clone, Debug)]
pub struct UncertaintyRegion {
    pub center: ComplexVector,
    pub radius: f64,
}

impl UncertaintyRegion {
    /// Radius from the normalized level χ = ε²/‖ĥ‖².
    pub fn from_level(center: ComplexVector, chi: f64) -> Self {
        let radius = (chi.max(0.0)).sqrt() * center.norm();
        Self { center, radius }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Surface,
    Interior,
}

/// Jamming emitted by one active eavesdropper as seen by each legitimate user.
#[derive(Clone, Debug)]
pub struct JammingSource {
    /// Arrival angle at LU k.
    pub angle_rad: Vec<f64>,
    pub power_w: f64,
    /// Amplitude attenuation toward LU k.
    pub path_loss: Vec<f64>,
    pub unit_power_waveform: bool,
}

impl JammingSource {
    /// Expected received jamming power at LU k, E ρ_k² |a(θ_k)ᴴ v|².
    pub fn received_power(&self, lu: usize, geom: &ArrayGeometry, weights: &ComplexVector) -> f64 {
        let a = steering_vector(geom, self.angle_rad[lu]);
        self.power_w * self.path_loss[lu].powi(2) * a.dotc(weights).norm_sqr()
    }
}

pub fn steering_vector(geom: &ArrayGeometry, angle_rad: f64) -> ComplexVector {
    let k = 2.0 * PI * geom.carrier_hz * geom.element_spacing_m * angle_rad.sin() / SPEED_OF_LIGHT;
    ComplexVector::from_fn(geom.num_elements, |m, _| C64::from_polar(1.0, -k * m as f64))
}

/// 32.5 + 20 lg(f / MHz) + 20 lg(r / km)
pub fn path_loss_db(carrier_hz: f64, range_m: f64) -> f64 {
    32.5 + 20.0 * (carrier_hz / 1e6).log10() + 20.0 * (range_m / 1e3).log10()
}

pub fn amplitude_gain(carrier_hz: f64, range_m: f64) -> f64 {
    10f64.powf(-path_loss_db(carrier_hz, range_m) / 20.0)
}

pub fn los_channel(geom: &ArrayGeometry, range_m: f64, angle_rad: f64) -> LosChannel {
    let rho = amplitude_gain(geom.carrier_hz, range_m);
    let vector = steering_vector(geom, angle_rad) * C64::new(rho, 0.0);
    LosChannel { range_m, angle_rad, vector }
}

/// Circularly-symmetric complex Gaussian vector with E|x_i|² = variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> ComplexVector {
    let s = (variance / 2.0).sqrt();
    ComplexVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

pub fn sample_uncertainty<R: Rng + ?Sized>(
    region: &UncertaintyRegion,
    rng: &mut R,
    mode: SampleMode,
) -> ComplexVector {
    if region.radius == 0.0 {
        return region.center.clone();
    }
    let n = region.center.len();
    let mut dir = complex_gaussian(rng, n, 1.0);
    while dir.norm() == 0.0 {
        dir = complex_gaussian(rng, n, 1.0);
    }
    let len = match mode {
        SampleMode::Surface => region.radius,
        // uniform in a ball of real dimension 2n
        SampleMode::Interior => region.radius * rng.random::<f64>().powf(1.0 / (2 * n) as f64),
    };
    let dh = &dir * C64::new(len / dir.norm(), 0.0);
    &region.center + dh
}
