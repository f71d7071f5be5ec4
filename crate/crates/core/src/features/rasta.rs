//! RASTA-PLP cepstra.
//!
//! Per frame: Bark-spaced critical-band power spectrum, log, RASTA band-pass
//! across frames, back to linear, equal-loudness weighting and cube-root
//! compression, then an order-16 all-pole fit converted to 17 cepstra.

use std::f64::consts::PI;

use super::lpc::levinson_durbin;
use super::spectrum::{bin_hz, floored_ln, NBINS};
use crate::error::{Error, Result};

pub const PLP_ORDER: usize = 16;
pub const PLP_COEFFS: usize = PLP_ORDER + 1;
/// Frames consumed before the RASTA filter produces output.
pub const RASTA_WARMUP: usize = 4;

const RASTA_NUMERATOR: [f64; 5] = [0.2, 0.1, 0.0, -0.1, -0.2];
const RASTA_POLE: f64 = 0.98;

pub fn hz_to_bark(f: f64) -> f64 {
    6.0 * (f / 600.0).asinh()
}

pub fn bark_to_hz(z: f64) -> f64 {
    600.0 * (z / 6.0).sinh()
}

/// RASTA band-pass over one band's log trajectory. The first four outputs are
/// zero; from the fifth on the filter runs with its FIR history taken from
/// the real preceding frames.
pub fn rasta_filter(x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for t in RASTA_WARMUP..x.len() {
        let fir: f64 = RASTA_NUMERATOR
            .iter()
            .enumerate()
            .map(|(k, b)| b * x[t - k])
            .sum();
        y[t] = RASTA_POLE * y[t - 1] + fir;
    }
    y
}

pub struct RastaPlp {
    band_weights: Vec<Vec<f64>>,
    loudness: Vec<f64>,
    /// cos(2 pi k n / M) table for the spectrum-to-autocorrelation step.
    idft: Vec<Vec<f64>>,
}

impl RastaPlp {
    pub fn new(sample_rate: u32) -> Self {
        let nyq_bark = hz_to_bark(sample_rate as f64 / 2.0);
        let n_bands = PLP_COEFFS;
        let step = nyq_bark / (n_bands - 1) as f64;
        let band_weights = (0..n_bands)
            .map(|b| {
                let mid = b as f64 * step;
                (0..NBINS)
                    .map(|k| {
                        let z = hz_to_bark(bin_hz(k, sample_rate)) - mid;
                        let lo = z - 0.5;
                        let hi = z + 0.5;
                        10f64.powf(hi.min(-2.5 * lo).min(0.0))
                    })
                    .collect()
            })
            .collect();
        let loudness = (0..n_bands)
            .map(|b| {
                let f = bark_to_hz(b as f64 * step);
                let fsq = f * f;
                (fsq / (fsq + 1.6e5)).powi(2) * ((fsq + 1.44e6) / (fsq + 9.61e6))
            })
            .collect();
        let m = 2 * (n_bands - 1);
        let idft = (0..=PLP_ORDER)
            .map(|n| (0..m).map(|k| (2.0 * PI * (k * n) as f64 / m as f64).cos()).collect())
            .collect();
        RastaPlp {
            band_weights,
            loudness,
            idft,
        }
    }

    pub fn bands(&self) -> usize {
        self.band_weights.len()
    }

    /// Critical-band power spectrum of one frame.
    pub fn critical_bands(&self, magnitude: &[f64]) -> Vec<f64> {
        self.band_weights
            .iter()
            .map(|w| w.iter().zip(magnitude).map(|(w, m)| w * m * m).sum())
            .collect()
    }

    /// Cepstra for a whole utterance given its per-frame magnitude spectra.
    pub fn extract(&self, magnitudes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if magnitudes.len() < RASTA_WARMUP {
            return Err(Error::Insufficient(format!(
                "RASTA needs at least {RASTA_WARMUP} frames, got {}",
                magnitudes.len()
            )));
        }
        let nb = self.bands();
        let log_bands: Vec<Vec<f64>> = magnitudes
            .iter()
            .map(|m| self.critical_bands(m).into_iter().map(floored_ln).collect())
            .collect();
        let mut filtered = vec![vec![0.0; nb]; magnitudes.len()];
        for b in 0..nb {
            let traj: Vec<f64> = log_bands.iter().map(|f| f[b]).collect();
            for (t, v) in rasta_filter(&traj).into_iter().enumerate() {
                filtered[t][b] = v;
            }
        }
        Ok(filtered.iter().map(|f| self.cepstra(f)).collect())
    }

    /// Auditory post-processing and all-pole cepstra of one filtered log spectrum.
    pub fn cepstra(&self, log_spectrum: &[f64]) -> Vec<f64> {
        let nb = self.bands();
        let mut aud: Vec<f64> = log_spectrum
            .iter()
            .zip(&self.loudness)
            .map(|(x, e)| (e * x.exp()).cbrt())
            .collect();
        aud[0] = aud[1];
        aud[nb - 1] = aud[nb - 2];
        // Symmetric extension to a full period, then a real inverse DFT.
        let m = 2 * (nb - 1);
        let full: Vec<f64> = (0..m).map(|k| if k < nb { aud[k] } else { aud[m - k] }).collect();
        let r: Vec<f64> = self
            .idft
            .iter()
            .map(|row| row.iter().zip(&full).map(|(c, s)| c * s).sum::<f64>() / m as f64)
            .collect();
        let mut c = vec![0.0; PLP_COEFFS];
        match levinson_durbin(&r, PLP_ORDER) {
            Some(lp) => {
                let a = &lp.coeffs;
                c[0] = floored_ln(lp.final_error());
                for n in 1..=PLP_ORDER {
                    let mut acc = a[n - 1];
                    for k in 1..n {
                        acc += (k as f64 / n as f64) * c[k] * a[n - k - 1];
                    }
                    c[n] = acc;
                }
            }
            None => c[0] = floored_ln(r[0]),
        }
        c
    }
}
