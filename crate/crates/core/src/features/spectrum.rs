use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// FFT size used for every 200-sample analysis frame.
pub const NFFT: usize = 256;
/// One-sided spectrum length, DC through Nyquist.
pub const NBINS: usize = NFFT / 2 + 1;

/// Floor applied before every logarithm of a possibly-zero quantity.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn floored_ln(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

/// Symmetric Hamming window.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Windowed, zero-padded magnitude spectra of analysis frames.
pub struct SpectralAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl SpectralAnalyzer {
    pub fn new(frame_length: usize) -> Self {
        assert!(frame_length <= NFFT, "frame longer than the FFT size");
        let fft = FftPlanner::new().plan_fft_forward(NFFT);
        SpectralAnalyzer {
            fft,
            window: hamming(frame_length),
        }
    }

    pub fn windowed(&self, frame: &[f64]) -> Vec<f64> {
        frame.iter().zip(&self.window).map(|(x, w)| x * w).collect()
    }

    /// `|X[k]|` for `k = 0..=NFFT/2`.
    pub fn magnitude(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); NFFT];
        for (slot, (x, w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
            slot.re = x * w;
        }
        self.fft.process(&mut buf);
        buf[..NBINS].iter().map(|c| c.norm()).collect()
    }
}

/// Centre frequency in Hz of FFT bin `k`.
pub fn bin_hz(k: usize, sample_rate: u32) -> f64 {
    k as f64 * sample_rate as f64 / NFFT as f64
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with edges equally spaced on the mel scale between
/// `low_hz` and `high_hz`. Rows are filters, columns FFT bins.
pub fn mel_filterbank(n_filters: usize, sample_rate: u32, low_hz: f64, high_hz: f64) -> Vec<Vec<f64>> {
    let lo = hz_to_mel(low_hz);
    let hi = hz_to_mel(high_hz);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_filters + 1) as f64))
        .collect();
    (0..n_filters)
        .map(|m| {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..NBINS)
                .map(|k| {
                    let f = bin_hz(k, sample_rate);
                    if f <= l || f >= r {
                        0.0
                    } else if f <= c {
                        (f - l) / (c - l)
                    } else {
                        (r - f) / (r - c)
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_endpoints() {
        let w = hamming(200);
        assert!((w[0] - 0.08).abs() < 1e-12);
        assert!((w[199] - 0.08).abs() < 1e-12);
        assert!(w.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn fft_matches_direct_dft() {
        let an = SpectralAnalyzer::new(200);
        let frame: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let mag = an.magnitude(&frame);
        let xw = an.windowed(&frame);
        for k in [0usize, 1, 17, 64, 128] {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, x) in xw.iter().enumerate() {
                let ph = -2.0 * PI * (k * n) as f64 / NFFT as f64;
                re += x * ph.cos();
                im += x * ph.sin();
            }
            assert!((mag[k] - (re * re + im * im).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn mel_roundtrip() {
        for f in [0.0, 100.0, 1000.0, 4000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }
}
