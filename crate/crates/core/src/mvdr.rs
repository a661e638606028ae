//! Receive-side anti-jamming at a legitimate user: sample covariance of
//! jamming-plus-noise snapshots and minimum variance distortionless weights.

use nalgebra::Cholesky;
use rand::Rng;

use crate::array::{complex_gaussian, steering_vector, ArrayGeometry, JammingSource};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, HermitianMatrix, C64};

/// Relative loading below which the default is replaced (all-zero snapshots).
const MIN_LOADING: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct SnapshotBatch {
    snapshots: Vec<ComplexVector>,
}

impl SnapshotBatch {
    pub fn new(snapshots: Vec<ComplexVector>) -> Result<Self> {
        let Some(first) = snapshots.first() else {
            return Err(Error::Dimension("need at least one snapshot".into()));
        };
        let m = first.len();
        if m == 0 || snapshots.iter().any(|y| y.len() != m) {
            return Err(Error::Dimension("snapshots differ in length".into()));
        }
        Ok(Self { snapshots })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.snapshots[0].len()
    }

    pub fn snapshots(&self) -> &[ComplexVector] {
        &self.snapshots
    }
}

#[derive(Clone, Debug)]
pub struct ReceiveWeights {
    pub weights: ComplexVector,
    pub target_angle_rad: f64,
}

/// R̃ = (1/L) Σ y yᴴ
pub fn sample_covariance(batch: &SnapshotBatch) -> HermitianMatrix {
    let m = batch.dim();
    let mut acc = ComplexMatrix::zeros(m, m);
    for y in batch.snapshots() {
        acc.gerc(C64::new(1.0, 0.0), y, y, C64::new(1.0, 0.0));
    }
    HermitianMatrix::from_average(&(acc / C64::new(batch.len() as f64, 0.0)))
}

/// 1e-3 · Tr(R)/M
pub fn default_loading(r: &HermitianMatrix) -> f64 {
    1e-3 * r.trace() / r.dim() as f64
}

/// v = (R+δI)⁻¹a / (aᴴ(R+δI)⁻¹a)
pub fn mvdr_weights(r: &HermitianMatrix, steering: &ComplexVector, loading: f64, target_angle_rad: f64) -> Result<ReceiveWeights> {
    let m = r.dim();
    if steering.len() != m {
        return Err(Error::Dimension(format!("steering has {} entries, covariance is {m}x{m}", steering.len())));
    }
    if !(loading >= 0.0) {
        return Err(Error::Domain("diagonal loading must be non-negative".into()));
    }
    let mut loaded = r.as_matrix().clone();
    for i in 0..m {
        loaded[(i, i)] += C64::new(loading, 0.0);
    }
    let chol = Cholesky::new(loaded).ok_or_else(|| Error::IllConditioned("loaded covariance is not positive definite".into()))?;
    let d = chol.l_dirty().diagonal();
    let (dmin, dmax) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.re), hi.max(v.re)));
    // condition number of R is (dmax/dmin)²
    if !(dmin > 1e-8 * dmax) {
        return Err(Error::IllConditioned(format!("loaded covariance condition estimate {:.1e}", (dmax / dmin).powi(2))));
    }
    let x = chol.solve(steering);
    let denom = steering.dotc(&x);
    if !(denom.re > 0.0) {
        return Err(Error::NumericalFailure("aᴴR⁻¹a is not positive".into()));
    }
    Ok(ReceiveWeights { weights: x / denom.conj(), target_angle_rad })
}

/// MVDR with the default loading.
pub fn mvdr_default(r: &HermitianMatrix, geom: &ArrayGeometry, target_angle_rad: f64) -> Result<ReceiveWeights> {
    let a = steering_vector(geom, target_angle_rad);
    let loading = default_loading(r).max(MIN_LOADING);
    mvdr_weights(r, &a, loading, target_angle_rad)
}

/// 20 lg|a(θ)ᴴv| over the grid.
pub fn receive_beampattern(weights: &ReceiveWeights, geom: &ArrayGeometry, angle_grid: &[f64]) -> Vec<f64> {
    angle_grid
        .iter()
        .map(|&t| 20.0 * steering_vector(geom, t).dotc(&weights.weights).norm().log10())
        .collect()
}

pub fn output_power(weights: &ComplexVector, r: &HermitianMatrix) -> f64 {
    r.quad_form(weights)
}

/// Warns when the receive array cannot place a null on every jammer.
pub fn check_array_size(rx_elements: usize, num_jammers: usize) -> bool {
    if rx_elements <= num_jammers {
        log::warn!("{rx_elements} receive antennas against {num_jammers} jammers: not enough degrees of freedom for nulls");
        return false;
    }
    true
}

/// Observation window at LU `lu`: jamming plus receiver noise, desired signal absent.
pub fn jamming_snapshots<R: Rng + ?Sized>(
    rng: &mut R,
    geom: &ArrayGeometry,
    sources: &[JammingSource],
    lu: usize,
    noise_w: f64,
    count: usize,
) -> Result<SnapshotBatch> {
    let steer: Vec<ComplexVector> = sources.iter().map(|s| steering_vector(geom, s.angle_rad[lu])).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut y = complex_gaussian(rng, geom.num_elements, noise_w);
        for (src, a) in sources.iter().zip(&steer) {
            let amp = (src.power_w).sqrt() * src.path_loss[lu];
            let s = if src.unit_power_waveform {
                C64::from_polar(amp, rng.random::<f64>() * std::f64::consts::TAU)
            } else {
                complex_gaussian(rng, 1, amp * amp)[0]
            };
            y.axpy(s, a, C64::new(1.0, 0.0));
        }
        out.push(y);
    }
    SnapshotBatch::new(out)
}
