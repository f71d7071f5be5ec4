//! Autocorrelation pitch estimate.

pub const MIN_F0: f64 = 60.0;
pub const MAX_F0: f64 = 400.0;
/// Normalized correlation a lag must reach for the frame to count as voiced.
pub const VOICING_THRESHOLD: f64 = 0.6;

/// Normalized cross-correlation of `x` with itself shifted by `lag`.
fn normalized_corr(x: &[f64], lag: usize) -> f64 {
    let n = x.len() - lag;
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        xy += x[i] * x[i + lag];
        xx += x[i] * x[i];
        yy += x[i + lag] * x[i + lag];
    }
    let denom = (xx * yy).sqrt();
    if denom <= 1e-20 {
        0.0
    } else {
        xy / denom
    }
}

/// F0 in Hz within `[60, 400]`, or 0 for unvoiced or silent frames.
///
/// The period is the shortest lag whose local correlation peak is within 10%
/// of the global peak, which keeps octave-down errors from period multiples
/// out. The lag is refined by parabolic interpolation.
pub fn extract_pitch(frame: &[f64], sample_rate: u32) -> f64 {
    let rate = sample_rate as f64;
    let min_lag = (rate / MAX_F0).floor() as usize;
    let max_lag = ((rate / MIN_F0).ceil() as usize).min(frame.len().saturating_sub(2));
    if max_lag <= min_lag + 2 {
        return 0.0;
    }
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    if x.iter().all(|v| v.abs() < 1e-12) {
        return 0.0;
    }
    let lo = min_lag - 1;
    let corr: Vec<f64> = (lo..=max_lag + 1).map(|lag| normalized_corr(&x, lag)).collect();
    let at = |lag: usize| corr[lag - lo];
    let peak = (min_lag..=max_lag).map(at).fold(f64::NEG_INFINITY, f64::max);
    if peak < VOICING_THRESHOLD {
        return 0.0;
    }
    let lag = (min_lag..=max_lag)
        .find(|&l| at(l) >= 0.9 * peak && at(l) >= at(l - 1) && at(l) >= at(l + 1))
        .unwrap_or(min_lag);
    let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
    let curvature = a - 2.0 * b + c;
    let offset = if curvature.abs() > 1e-12 {
        (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    (rate / (lag as f64 + offset)).clamp(MIN_F0, MAX_F0)
}
