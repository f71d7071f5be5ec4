//! Amplitude modulation spectrogram.
//!
//! Nine mel-spaced sub-band envelopes, each analysed over a 32-frame context
//! for its modulation content at 15 frequencies, DC to 14 Hz in 1 Hz steps.

use std::f64::consts::PI;

use super::spectrum::{floored_ln, mel_filterbank};
use crate::error::{Error, Result};

pub const AMS_BANDS: usize = 9;
pub const MOD_BINS: usize = 15;
pub const MOD_CONTEXT: usize = 32;
pub const MOD_MAX_HZ: f64 = 14.0;

pub struct AmsExtractor {
    filters: Vec<Vec<f64>>,
    /// (cos, sin) tables per modulation bin, indexed by context position.
    basis: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Modulation frequencies analysed, in Hz.
pub fn modulation_freqs() -> Vec<f64> {
    (0..MOD_BINS)
        .map(|k| k as f64 * MOD_MAX_HZ / (MOD_BINS - 1) as f64)
        .collect()
}

impl AmsExtractor {
    /// `frame_rate` is frames per second (100 for a 10 ms shift).
    pub fn new(sample_rate: u32, frame_rate: f64) -> Self {
        let filters = mel_filterbank(AMS_BANDS, sample_rate, 0.0, sample_rate as f64 / 2.0);
        let basis = modulation_freqs()
            .into_iter()
            .map(|f| {
                let ph: Vec<f64> = (0..MOD_CONTEXT).map(|n| 2.0 * PI * f * n as f64 / frame_rate).collect();
                (ph.iter().map(|p| p.cos()).collect(), ph.iter().map(|p| p.sin()).collect())
            })
            .collect();
        AmsExtractor {
            filters,
            basis,
        }
    }

    /// Sub-band amplitude envelope of one frame.
    pub fn envelope(&self, magnitude: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|f| f.iter().zip(magnitude).map(|(w, m)| w * m * m).sum::<f64>().sqrt())
            .collect()
    }

    /// Linear modulation magnitudes of one 32-sample envelope segment. Bin 0
    /// is the envelope sum; the others see the mean-removed envelope. The
    /// segment is not tapered: with only 32 samples a taper widens the main
    /// lobe enough to pull low-rate peaks into the neighbouring bin.
    pub fn modulation_spectrum(&self, segment: &[f64]) -> Vec<f64> {
        debug_assert_eq!(segment.len(), MOD_CONTEXT);
        let mean = segment.iter().sum::<f64>() / segment.len() as f64;
        self.basis
            .iter()
            .enumerate()
            .map(|(k, (cos, sin))| {
                let offset = if k == 0 { 0.0 } else { mean };
                let (mut re, mut im) = (0.0, 0.0);
                for n in 0..MOD_CONTEXT {
                    let v = segment[n] - offset;
                    re += v * cos[n];
                    im -= v * sin[n];
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    /// 135 log modulation magnitudes per frame, band-major.
    pub fn extract(&self, magnitudes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let t_len = magnitudes.len();
        if t_len < MOD_CONTEXT {
            return Err(Error::Insufficient(format!(
                "AMS needs at least {MOD_CONTEXT} frames, got {t_len}"
            )));
        }
        let envelopes: Vec<Vec<f64>> = magnitudes.iter().map(|m| self.envelope(m)).collect();
        let half = MOD_CONTEXT / 2;
        // Context windows slide with the frame and stop at the utterance edges.
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; t_len - MOD_CONTEXT + 1];
        let mut out = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let start = t.saturating_sub(half).min(t_len - MOD_CONTEXT);
            let row = cache[start].get_or_insert_with(|| {
                let mut row = Vec::with_capacity(AMS_BANDS * MOD_BINS);
                for b in 0..AMS_BANDS {
                    let seg: Vec<f64> = envelopes[start..start + MOD_CONTEXT].iter().map(|e| e[b]).collect();
                    row.extend(self.modulation_spectrum(&seg).into_iter().map(floored_ln));
                }
                row
            });
            out.push(row.clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argmax(v: &[f64]) -> usize {
        v.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
    }

    #[test]
    fn grid_covers_dc_to_14hz() {
        let f = modulation_freqs();
        assert_eq!(f.len(), 15);
        assert_eq!(f[0], 0.0);
        assert!((f[14] - 14.0).abs() < 1e-12);
    }

    #[test]
    fn constant_envelope_is_dc_only() {
        let ams = AmsExtractor::new(8000, 100.0);
        let spec = ams.modulation_spectrum(&[0.7; MOD_CONTEXT]);
        assert!(spec[0] > 1.0);
        assert!(spec[1..].iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn am_tone_peaks_near_modulation_rate() {
        let ams = AmsExtractor::new(8000, 100.0);
        let freqs = modulation_freqs();
        for rate in [3.0, 4.0, 5.0, 8.0, 12.0] {
            let nearest = argmax(&freqs.iter().map(|f| -(f - rate as f64).abs()).collect::<Vec<_>>());
            for phase in (0..8).map(|i| i as f64 * PI / 4.0) {
                let seg: Vec<f64> = (0..MOD_CONTEXT)
                    .map(|n| 1.0 + 0.5 * (2.0 * PI * rate * n as f64 / 100.0 + phase).sin())
                    .collect();
                let spec = ams.modulation_spectrum(&seg);
                assert_eq!(1 + argmax(&spec[1..]), nearest, "rate {rate} phase {phase}: {spec:?}");
            }
        }
    }

    #[test]
    fn layout_and_edges() {
        let ams = AmsExtractor::new(8000, 100.0);
        let frames: Vec<Vec<f64>> = (0..40).map(|t| vec![1.0 + (t as f64 * 0.3).sin(); 129]).collect();
        let out = ams.extract(&frames).unwrap();
        assert_eq!(out.len(), 40);
        assert!(out.iter().all(|r| r.len() == 135));
        // frames near the start share the first full context
        assert_eq!(out[0], out[16]);
        assert_eq!(out[39], out[24]);
        assert!(ams.extract(&frames[..31]).is_err());
    }
}
