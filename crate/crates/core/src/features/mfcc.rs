//! Mel-frequency cepstral coefficients.

use std::f64::consts::PI;

use super::spectrum::{floored_ln, mel_filterbank, SpectralAnalyzer};

pub const MEL_FILTERS: usize = 26;
pub const MFCC_COEFFS: usize = 20;

pub struct MfccExtractor {
    filters: Vec<Vec<f64>>,
}

impl MfccExtractor {
    pub fn new(sample_rate: u32) -> Self {
        MfccExtractor {
            filters: mel_filterbank(MEL_FILTERS, sample_rate, 0.0, sample_rate as f64 / 2.0),
        }
    }

    /// C0..C19 from a one-sided magnitude spectrum.
    pub fn from_magnitude(&self, magnitude: &[f64]) -> Vec<f64> {
        let log_energies: Vec<f64> = self
            .filters
            .iter()
            .map(|f| floored_ln(f.iter().zip(magnitude).map(|(w, m)| w * m * m).sum()))
            .collect();
        dct2(&log_energies, MFCC_COEFFS)
    }

    pub fn extract(&self, analyzer: &SpectralAnalyzer, frame: &[f64]) -> Vec<f64> {
        self.from_magnitude(&analyzer.magnitude(frame))
    }
}

/// Unnormalized DCT-II, first `n_out` coefficients.
pub fn dct2(x: &[f64], n_out: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..n_out)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / m).cos())
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::spectrum::LOG_FLOOR;
    use super::*;

    #[test]
    fn silence_cepstrum() {
        let an = SpectralAnalyzer::new(200);
        let c = MfccExtractor::new(8000).extract(&an, &[0.0; 200]);
        assert_eq!(c.len(), 20);
        assert!((c[0] - 26.0 * LOG_FLOOR.ln()).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    /// Independent path: direct DFT, filter edges recomputed from the mel
    /// formula, DCT summed inline.
    fn oracle(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        let xw: Vec<f64> = (0..n)
            .map(|i| frame[i] * (0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
            .collect();
        let power: Vec<f64> = (0..=128)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, x) in xw.iter().enumerate() {
                    let ph = 2.0 * PI * (k * t) as f64 / 256.0;
                    re += x * ph.cos();
                    im -= x * ph.sin();
                }
                re * re + im * im
            })
            .collect();
        let mel_max = 2595.0 * (1.0f64 + 4000.0 / 700.0).log10();
        let edge = |i: usize| 700.0 * (10f64.powf(mel_max * i as f64 / 27.0 / 2595.0) - 1.0);
        let mut logs = Vec::new();
        for m in 0..26 {
            let (l, c, r) = (edge(m), edge(m + 1), edge(m + 2));
            let mut e = 0.0;
            for (k, p) in power.iter().enumerate() {
                let f = k as f64 * 8000.0 / 256.0;
                let w = if f > l && f <= c {
                    (f - l) / (c - l)
                } else if f > c && f < r {
                    (r - f) / (r - c)
                } else {
                    0.0
                };
                e += w * p;
            }
            logs.push(e.max(1e-10).ln());
        }
        (0..20)
            .map(|k| (0..26).map(|j| logs[j] * (PI * k as f64 * (2 * j + 1) as f64 / 52.0).cos()).sum())
            .collect()
    }

    #[test]
    fn matches_reimplementation() {
        let an = SpectralAnalyzer::new(200);
        let ex = MfccExtractor::new(8000);
        let frame: Vec<f64> = (0..200)
            .map(|i| {
                let t = i as f64 / 8000.0;
                0.4 * (2.0 * PI * 220.0 * t).sin() + 0.2 * (2.0 * PI * 1330.0 * t).sin() + 0.01 * ((i * 13 % 7) as f64 - 3.0)
            })
            .collect();
        let got = ex.extract(&an, &frame);
        let want = oracle(&frame);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-8 * w.abs().max(1.0), "{g} vs {w}");
        }
    }
}
