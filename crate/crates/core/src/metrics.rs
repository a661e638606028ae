//! SINR, achievable rate and secrecy rate.

use crate::linalg::{ComplexVector, HermitianMatrix};

#[derive(Clone, Debug)]
pub struct TransmitDesign {
    pub beams: Vec<ComplexVector>,
    pub an_covariance: HermitianMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkNoise {
    pub lu_w: f64,
    pub ae_w: f64,
    pub pe_w: f64,
}

/// Receive side of one legitimate user.
#[derive(Clone, Debug)]
pub struct LuReceiver<'a> {
    /// a_{u,k}: receive steering toward the transmitter.
    pub steering: &'a ComplexVector,
    pub weights: &'a ComplexVector,
    /// Residual jamming power after receive combining.
    pub jamming_power_w: f64,
}

/// Average SINR of LU `k`. The AN term is taken in expectation, hᴴZh·|aᴴv|².
pub fn lu_sinr(
    design: &TransmitDesign,
    channel: &ComplexVector,
    k: usize,
    rx: &LuReceiver<'_>,
    noise_w: f64,
) -> f64 {
    let g = rx.steering.dotc(rx.weights).norm_sqr();
    let beam = |i: usize| channel.dotc(&design.beams[i]).norm_sqr() * g;
    let interference: f64 = (0..design.beams.len()).filter(|&i| i != k).map(beam).sum();
    let an = design.an_covariance.quad_form(channel) * g;
    beam(k) / (interference + an + rx.jamming_power_w + noise_w)
}

/// Σ_k |hᴴw_k|² / (hᴴZh + σ²): an eavesdropper that cancels nothing but AN.
pub fn eve_sinr_upper(design: &TransmitDesign, channel: &ComplexVector, noise_w: f64) -> f64 {
    let signal: f64 = design.beams.iter().map(|w| channel.dotc(w).norm_sqr()).sum();
    signal / (design.an_covariance.quad_form(channel) + noise_w)
}

pub fn achievable_rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

pub fn secrecy_rate(lu_rates: &[f64], ae_rates: &[f64], pe_rates: &[f64]) -> f64 {
    let lu = lu_rates.iter().copied().fold(f64::INFINITY, f64::min);
    let eve = ae_rates.iter().chain(pe_rates).copied().fold(0.0, f64::max);
    (lu - eve).max(0.0)
}

/// SINR(θ) of a probe receiver: best beam against the rest plus AN and noise.
pub fn probe_sinr(design: &TransmitDesign, channel: &ComplexVector, noise_w: f64) -> f64 {
    let gains: Vec<f64> = design.beams.iter().map(|w| channel.dotc(w).norm_sqr()).collect();
    let total: f64 = gains.iter().sum();
    let an = design.an_covariance.quad_form(channel);
    gains.iter().map(|&g| g / (total - g + an + noise_w)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{C64, ComplexMatrix};

    fn cv(v: &[(f64, f64)]) -> ComplexVector {
        ComplexVector::from_iterator(v.len(), v.iter().map(|&(r, i)| C64::new(r, i)))
    }

    #[test]
    fn degenerate_single_user() {
        let h = cv(&[(1.0, 0.0), (0.0, 1.0)]);
        let w = cv(&[(0.5, 0.0), (0.0, 0.5)]);
        let d = TransmitDesign { beams: vec![w.clone()], an_covariance: HermitianMatrix::zeros(2) };
        let one = cv(&[(1.0, 0.0)]);
        let rx = LuReceiver { steering: &one, weights: &one, jamming_power_w: 0.0 };
        let s = lu_sinr(&d, &h, 0, &rx, 0.1);
        assert!((s - h.dotc(&w).norm_sqr() / 0.1).abs() < 1e-12);
        let orth = TransmitDesign { beams: vec![cv(&[(0.0, 1.0), (1.0, 0.0)])], ..d };
        assert!(lu_sinr(&orth, &h, 0, &rx, 0.1).abs() < 1e-15);
    }

    #[test]
    fn eve_bound_and_rates() {
        let h = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let d = TransmitDesign {
            beams: vec![cv(&[(2.0, 0.0), (0.0, 0.0)])],
            an_covariance: HermitianMatrix::zeros(2),
        };
        assert!((eve_sinr_upper(&d, &h, 0.5) - 8.0).abs() < 1e-12);
        assert_eq!(achievable_rate(0.0), 0.0);
        assert_eq!(achievable_rate(1.0), 1.0);
        assert!((achievable_rate(10f64.powf(1.5)) - 5.028).abs() < 1e-3);
        assert_eq!(secrecy_rate(&[5.0], &[5.0], &[]), 0.0);
        assert_eq!(secrecy_rate(&[5.0, 4.0], &[1.0], &[2.0]), 2.0);
        assert_eq!(secrecy_rate(&[1.0], &[3.0], &[]), 0.0);
        let z = HermitianMatrix::from_upper(ComplexMatrix::identity(2, 2));
        let with_an = TransmitDesign { an_covariance: z, ..d };
        assert!((eve_sinr_upper(&with_an, &h, 0.5) - 4.0 / 1.5).abs() < 1e-12);
    }
}
