//! Linear prediction by the Levinson-Durbin recursion.

use super::spectrum::hamming;

pub const LPC_ORDER: usize = 12;

/// Biased autocorrelation `r[0..=max_lag]`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|lag| {
            if lag >= x.len() {
                0.0
            } else {
                x[..x.len() - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    /// Predictor coefficients `a[1..=p]` in `x[n] ~ sum_k a[k] x[n-k]`.
    pub coeffs: Vec<f64>,
    /// Prediction error power after each order, `errors[0] = r[0]`.
    pub errors: Vec<f64>,
}

impl LinearPredictor {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().unwrap()
    }
}

/// Solves the normal equations for `order` coefficients. Returns `None` when
/// the autocorrelation is singular (zero energy or a non-positive error).
pub fn levinson_durbin(r: &[f64], order: usize) -> Option<LinearPredictor> {
    assert!(r.len() > order, "need r[0..=order]");
    if r[0] <= 1e-12 || !r[0].is_finite() {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    let mut errors = Vec::with_capacity(order + 1);
    let mut err = r[0];
    errors.push(err);
    for i in 1..=order {
        let mut acc = r[i];
        for j in 1..i {
            acc -= a[j] * r[i - j];
        }
        let k = acc / err;
        let prev = a.clone();
        a[i] = k;
        for j in 1..i {
            a[j] = prev[j] - k * prev[i - j];
        }
        err *= 1.0 - k * k;
        if err <= r[0] * 1e-14 {
            return None;
        }
        errors.push(err);
    }
    Some(LinearPredictor {
        coeffs: a[1..].to_vec(),
        errors,
    })
}

/// Order-12 LPC of a Hamming-windowed frame; zeros for silent frames.
pub fn extract_lpc(frame: &[f64]) -> Vec<f64> {
    let w = hamming(frame.len());
    let xw: Vec<f64> = frame.iter().zip(&w).map(|(x, w)| x * w).collect();
    lpc_of(&xw, LPC_ORDER)
}

pub fn lpc_of(x: &[f64], order: usize) -> Vec<f64> {
    let r = autocorrelation(x, order);
    levinson_durbin(&r, order)
        .map(|p| p.coeffs)
        .unwrap_or_else(|| vec![0.0; order])
}
