//! Log band magnitudes of the short-time spectrum.

use super::spectrum::{floored_ln, SpectralAnalyzer, NBINS};

pub const DFT_BANDS: usize = 16;

/// Band holding FFT bin `k`; the Nyquist bin joins the top band.
fn band_of(k: usize) -> usize {
    (k * DFT_BANDS / (NBINS - 1)).min(DFT_BANDS - 1)
}

/// Log of the mean magnitude in 16 equal-width bands spanning DC to Nyquist.
pub fn dft_bands(magnitude: &[f64]) -> Vec<f64> {
    let mut sums = [0.0; DFT_BANDS];
    let mut counts = [0usize; DFT_BANDS];
    for (k, m) in magnitude.iter().enumerate() {
        let b = band_of(k);
        sums[b] += m;
        counts[b] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| floored_ln(s / c as f64))
        .collect()
}

pub fn extract_dft_bands(analyzer: &SpectralAnalyzer, frame: &[f64]) -> Vec<f64> {
    dft_bands(&analyzer.magnitude(frame))
}
