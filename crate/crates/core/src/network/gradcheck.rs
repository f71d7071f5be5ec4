//! Central finite-difference verification of the analytic gradients.

use ndarray::{Array1, ArrayView2};

use super::finetune::finetune_loss_and_grad;
use super::pretrain::{layer_loss_and_grad, Objective};
use super::{label_targets, LayerWeights, NetworkStack, PretrainTarget};
use crate::error::{Error, Result};
use crate::signal::Label;

pub const STEP: f64 = 1e-5;
/// Below this magnitude a gradient is compared by absolute error instead.
pub const SMALL_GRADIENT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|)` over
    /// parameters whose gradient is at least `SMALL_GRADIENT`.
    pub max_relative_error: f64,
    /// Largest absolute error over the remaining near-zero gradients.
    pub max_absolute_error: f64,
    pub parameters: usize,
    pub small_parameters: usize,
}

impl GradCheckReport {
    fn record(&mut self, analytic: f64, numeric: f64) {
        self.parameters += 1;
        let scale = analytic.abs().max(numeric.abs());
        let diff = (analytic - numeric).abs();
        if scale < SMALL_GRADIENT {
            self.small_parameters += 1;
            self.max_absolute_error = self.max_absolute_error.max(diff);
        } else {
            self.max_relative_error = self.max_relative_error.max(diff / scale);
        }
    }

    pub fn merge(self, other: GradCheckReport) -> GradCheckReport {
        GradCheckReport {
            max_relative_error: self.max_relative_error.max(other.max_relative_error),
            max_absolute_error: self.max_absolute_error.max(other.max_absolute_error),
            parameters: self.parameters + other.parameters,
            small_parameters: self.small_parameters + other.small_parameters,
        }
    }
}

fn central<F: FnMut(f64) -> f64>(value: f64, mut loss_at: F) -> f64 {
    (loss_at(value + STEP) - loss_at(value - STEP)) / (2.0 * STEP)
}

/// Checks every parameter of the fine-tuning loss on a labeled batch.
pub fn finetune_gradient_check(stack: &NetworkStack, x: ArrayView2<f64>, labels: &[Label]) -> Result<GradCheckReport> {
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: labels.len() });
    }
    if x.ncols() != stack.input_dim {
        return Err(Error::DimensionMismatch { expected: stack.input_dim, found: x.ncols() });
    }
    let y: Array1<f64> = label_targets(labels);
    let (_, grad) = finetune_loss_and_grad(stack, x, y.view());
    let loss = |s: &NetworkStack| finetune_loss_and_grad(s, x, y.view()).0;
    let mut report = GradCheckReport::default();
    let mut probe = stack.clone();

    for l in 0..stack.depth() {
        let (gw, gb) = &grad.layers[l];
        for (idx, &analytic) in gw.indexed_iter() {
            let orig = probe.layers[l].w[idx];
            let numeric = central(orig, |v| {
                probe.layers[l].w[idx] = v;
                loss(&probe)
            });
            probe.layers[l].w[idx] = orig;
            report.record(analytic, numeric);
        }
        for (j, &analytic) in gb.iter().enumerate() {
            let orig = probe.layers[l].b_enc[j];
            let numeric = central(orig, |v| {
                probe.layers[l].b_enc[j] = v;
                loss(&probe)
            });
            probe.layers[l].b_enc[j] = orig;
            report.record(analytic, numeric);
        }
    }
    for (j, &analytic) in grad.out_w.iter().enumerate() {
        let orig = probe.output.w[j];
        let numeric = central(orig, |v| {
            probe.output.w[j] = v;
            loss(&probe)
        });
        probe.output.w[j] = orig;
        report.record(analytic, numeric);
    }
    let orig = probe.output.b;
    let numeric = central(orig, |v| {
        probe.output.b = v;
        loss(&probe)
    });
    report.record(grad.out_b, numeric);
    Ok(report)
}

/// Checks one layer's pre-training objective for `input` against `target`.
pub fn pretrain_gradient_check(
    layer: &LayerWeights,
    input: ArrayView2<f64>,
    target: ArrayView2<f64>,
    mode: PretrainTarget,
) -> Result<GradCheckReport> {
    let objective = match mode {
        PretrainTarget::CleanInput => Objective::Reconstruct,
        PretrainTarget::CleanOutput => Objective::Encode,
    };
    let want = match objective {
        Objective::Reconstruct => layer.in_dim(),
        Objective::Encode => layer.out_dim(),
    };
    if input.ncols() != layer.in_dim() || target.ncols() != want || target.nrows() != input.nrows() {
        return Err(Error::DimensionMismatch { expected: want, found: target.ncols() });
    }
    let (_, grad) = layer_loss_and_grad(layer, input, target, objective);
    let loss = |l: &LayerWeights| layer_loss_and_grad(l, input, target, objective).0;
    let mut report = GradCheckReport::default();
    let mut probe = layer.clone();
    for (idx, &analytic) in grad.w.indexed_iter() {
        let orig = probe.w[idx];
        let numeric = central(orig, |v| {
            probe.w[idx] = v;
            loss(&probe)
        });
        probe.w[idx] = orig;
        report.record(analytic, numeric);
    }
    for (j, &analytic) in grad.b_enc.iter().enumerate() {
        let orig = probe.b_enc[j];
        let numeric = central(orig, |v| {
            probe.b_enc[j] = v;
            loss(&probe)
        });
        probe.b_enc[j] = orig;
        report.record(analytic, numeric);
    }
    if objective == Objective::Reconstruct {
        for (j, &analytic) in grad.b_dec.iter().enumerate() {
            let orig = probe.b_dec[j];
            let numeric = central(orig, |v| {
                probe.b_dec[j] = v;
                loss(&probe)
            });
            probe.b_dec[j] = orig;
            report.record(analytic, numeric);
        }
    }
    Ok(report)
}
