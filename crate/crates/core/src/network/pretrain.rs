use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    batch_ce, chunked_sum, init_layer, mix_seed, select_rows, LayerWeights, TrainConfig,
    HIDDEN_WIDTHS, SALT_INIT, SALT_PRETRAIN,
};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

const EVAL_CHUNK: usize = 4096;

/// What the noisy layer `l` is asked to produce from the noisy layer-`l-1`
/// representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PretrainTarget {
    /// Decode back to the clean layer-`l-1` representation (autoencoder form).
    #[default]
    CleanInput,
    /// Encode to the clean layer-`l` representation directly.
    CleanOutput,
}

impl PretrainTarget {
    /// Clean layers needed to pre-train a noisy stack of `depth` layers.
    pub fn clean_depth(self, depth: usize) -> usize {
        match self {
            PretrainTarget::CleanInput => depth.saturating_sub(1),
            PretrainTarget::CleanOutput => depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Objective {
    Reconstruct,
    Encode,
}

/// Row-aligned noisy and clean features, both already scaled into `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct PretrainPair<'a> {
    pub noisy: &'a FeatureMatrix,
    pub clean: &'a FeatureMatrix,
}

impl<'a> PretrainPair<'a> {
    pub fn new(noisy: &'a FeatureMatrix, clean: &'a FeatureMatrix) -> Result<Self> {
        if noisy.values.dim() != clean.values.dim() {
            return Err(Error::DimensionMismatch {
                expected: noisy.rows(),
                found: clean.rows(),
            });
        }
        if noisy.is_empty() {
            return Err(Error::Empty("pre-training pair"));
        }
        let in_unit = |m: &FeatureMatrix| m.values.iter().all(|v| (0.0..=1.0).contains(v));
        if !in_unit(noisy) || !in_unit(clean) {
            return Err(Error::InvalidConfig("pre-training features must lie in [0, 1]".into()));
        }
        Ok(PretrainPair { noisy, clean })
    }
}

/// Full-set loss at checkpoints plus the per-epoch sum of mini-batch losses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerTrace {
    pub checkpoints: Vec<(usize, f64)>,
    pub epoch_losses: Vec<f64>,
}

impl LayerTrace {
    pub fn initial(&self) -> f64 {
        self.checkpoints.first().map(|c| c.1).unwrap_or(f64::NAN)
    }

    pub fn last(&self) -> f64 {
        self.checkpoints.last().map(|c| c.1).unwrap_or(f64::NAN)
    }
}

pub(crate) struct LayerGrad {
    pub w: Array2<f64>,
    pub b_enc: Array1<f64>,
    pub b_dec: Array1<f64>,
}

/// Summed batch loss and its gradient for one layer's pre-training objective.
pub(crate) fn layer_loss_and_grad(
    layer: &LayerWeights,
    x: ArrayView2<f64>,
    t: ArrayView2<f64>,
    objective: Objective,
) -> (f64, LayerGrad) {
    let h = layer.encode(x);
    match objective {
        Objective::Reconstruct => {
            let r = layer.decode(h.view());
            let loss = batch_ce(t, r.view());
            let d_r = &r - &t;
            let mut d_h = d_r.dot(&layer.w.t());
            d_h.zip_mut_with(&h, |d, &hv| *d *= hv * (1.0 - hv));
            let mut gw = h.t().dot(&d_r);
            gw += &d_h.t().dot(&x);
            let grad = LayerGrad {
                w: gw,
                b_enc: d_h.sum_axis(Axis(0)),
                b_dec: d_r.sum_axis(Axis(0)),
            };
            (loss, grad)
        }
        Objective::Encode => {
            let loss = batch_ce(t, h.view());
            let d_h = &h - &t;
            let grad = LayerGrad {
                w: d_h.t().dot(&x),
                b_enc: d_h.sum_axis(Axis(0)),
                b_dec: Array1::zeros(layer.in_dim()),
            };
            (loss, grad)
        }
    }
}

pub(crate) fn layer_loss(layer: &LayerWeights, x: ArrayView2<f64>, t: ArrayView2<f64>, objective: Objective) -> f64 {
    chunked_sum(x.nrows(), EVAL_CHUNK, |s, e| {
        let xs = x.slice(ndarray::s![s..e, ..]);
        let ts = t.slice(ndarray::s![s..e, ..]);
        let h = layer.encode(xs);
        match objective {
            Objective::Reconstruct => batch_ce(ts, layer.decode(h.view()).view()),
            Objective::Encode => batch_ce(ts, h.view()),
        }
    })
}

impl Objective {
    fn target_dim(self, layer: &LayerWeights) -> usize {
        match self {
            Objective::Reconstruct => layer.in_dim(),
            Objective::Encode => layer.out_dim(),
        }
    }
}

/// Mini-batch SGD on one layer. Gradients are summed over the batch; the
/// final partial batch of each epoch is kept.
pub(crate) fn sgd_layer(
    mut layer: LayerWeights,
    input: ArrayView2<f64>,
    target: ArrayView2<f64>,
    objective: Objective,
    cfg: &TrainConfig,
    shuffle_seed: u64,
) -> Result<(LayerWeights, LayerTrace)> {
    let rows = input.nrows();
    if rows == 0 {
        return Err(Error::Empty("pre-training rows"));
    }
    if input.ncols() != layer.in_dim() || target.ncols() != objective.target_dim(&layer) || target.nrows() != rows {
        return Err(Error::DimensionMismatch {
            expected: objective.target_dim(&layer),
            found: target.ncols(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut order: Vec<usize> = (0..rows).collect();
    let mut trace = LayerTrace::default();
    trace.checkpoints.push((0, layer_loss(&layer, input, target, objective)));
    for epoch in 1..=cfg.epochs_pretrain {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = select_rows(input, batch);
            let tb = select_rows(target, batch);
            let (loss, g) = layer_loss_and_grad(&layer, xb.view(), tb.view(), objective);
            epoch_loss += loss;
            layer.w.scaled_add(-cfg.lr_pretrain, &g.w);
            layer.b_enc.scaled_add(-cfg.lr_pretrain, &g.b_enc);
            layer.b_dec.scaled_add(-cfg.lr_pretrain, &g.b_dec);
        }
        trace.epoch_losses.push(epoch_loss);
        if epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs_pretrain {
            trace.checkpoints.push((epoch, layer_loss(&layer, input, target, objective)));
        }
    }
    if !layer.is_finite() {
        return Err(Error::Insufficient("pre-training diverged".into()));
    }
    Ok((layer, trace))
}

fn layer_seeds(cfg: &TrainConfig, index: usize) -> (u64, u64) {
    let l = index as u64;
    (
        mix_seed(cfg.seed, SALT_INIT * 1000 + l),
        mix_seed(cfg.seed, SALT_PRETRAIN * 1000 + l),
    )
}

pub(crate) fn widths(depth: usize) -> Result<&'static [usize]> {
    if depth > HIDDEN_WIDTHS.len() {
        return Err(Error::InvalidConfig(format!("depth {depth} exceeds {}", HIDDEN_WIDTHS.len())));
    }
    Ok(&HIDDEN_WIDTHS[..depth])
}

/// Trains hidden layer `index` (1-based) from scratch on `input`, using the
/// given reconstruction or encoding target.
pub fn train_layer(
    input: ArrayView2<f64>,
    target: ArrayView2<f64>,
    index: usize,
    out_dim: usize,
    mode: PretrainTarget,
    cfg: &TrainConfig,
) -> Result<(LayerWeights, LayerTrace)> {
    let (init_seed, shuffle_seed) = layer_seeds(cfg, index);
    let init = init_layer(input.ncols(), out_dim, init_seed);
    let objective = match mode {
        PretrainTarget::CleanInput => Objective::Reconstruct,
        PretrainTarget::CleanOutput => Objective::Encode,
    };
    sgd_layer(init, input, target, objective, cfg, shuffle_seed)
}

/// The accompanying clean network and its per-layer representations of the
/// clean data (`representations[0]` is the clean input itself).
#[derive(Debug, Clone)]
pub struct CleanStack {
    pub layers: Vec<LayerWeights>,
    pub representations: Vec<Array2<f64>>,
    pub traces: Vec<LayerTrace>,
}

impl CleanStack {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

/// Greedy layer-wise autoencoder training on clean features.
pub fn pretrain_clean_stack(clean: &FeatureMatrix, depth: usize, cfg: &TrainConfig) -> Result<CleanStack> {
    cfg.validate()?;
    if clean.is_empty() {
        return Err(Error::Empty("clean pre-training corpus"));
    }
    let widths = widths(depth)?;
    let mut stack = CleanStack {
        layers: Vec::with_capacity(depth),
        representations: vec![clean.values.clone()],
        traces: Vec::with_capacity(depth),
    };
    for (i, &width) in widths.iter().enumerate() {
        let x = stack.representations.last().unwrap();
        let (layer, trace) = train_layer(x.view(), x.view(), i + 1, width, PretrainTarget::CleanInput, cfg)?;
        let h = encode_chunked(&layer, x.view());
        stack.layers.push(layer);
        stack.traces.push(trace);
        stack.representations.push(h);
    }
    Ok(stack)
}

pub(crate) fn encode_chunked(layer: &LayerWeights, x: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), layer.out_dim()));
    let mut start = 0;
    while start < x.nrows() {
        let end = (start + EVAL_CHUNK).min(x.nrows());
        out.slice_mut(ndarray::s![start..end, ..])
            .assign(&layer.encode(x.slice(ndarray::s![start..end, ..])));
        start = end;
    }
    out
}

#[derive(Debug, Clone)]
pub struct NoisyStack {
    pub layers: Vec<LayerWeights>,
    pub traces: Vec<LayerTrace>,
    /// Noisy representation after the top layer.
    pub top_representation: Array2<f64>,
}

/// Greedy pre-training of the denoising stack: noisy layer `l` sees the
/// noisy layer-`l-1` representation and is scored against the clean stack's
/// representation selected by `mode`.
pub fn pretrain_noisy_stack(
    pair: &PretrainPair<'_>,
    clean_stack: &CleanStack,
    depth: usize,
    mode: PretrainTarget,
    cfg: &TrainConfig,
) -> Result<NoisyStack> {
    cfg.validate()?;
    let widths = widths(depth)?;
    if clean_stack.depth() < mode.clean_depth(depth) {
        return Err(Error::InvalidConfig(format!(
            "clean stack of depth {} cannot supervise a noisy stack of depth {depth}",
            clean_stack.depth()
        )));
    }
    if clean_stack.representations[0].nrows() != pair.noisy.rows() {
        return Err(Error::DimensionMismatch {
            expected: pair.noisy.rows(),
            found: clean_stack.representations[0].nrows(),
        });
    }
    let mut layers = Vec::with_capacity(depth);
    let mut traces = Vec::with_capacity(depth);
    let mut h = pair.noisy.values.clone();
    for (i, &width) in widths.iter().enumerate() {
        let target = match mode {
            PretrainTarget::CleanInput => &clean_stack.representations[i],
            PretrainTarget::CleanOutput => &clean_stack.representations[i + 1],
        };
        let (layer, trace) = train_layer(h.view(), target.view(), i + 1, width, mode, cfg)?;
        h = encode_chunked(&layer, h.view());
        layers.push(layer);
        traces.push(trace);
    }
    Ok(NoisyStack {
        layers,
        traces,
        top_representation: h,
    })
}

#[derive(Debug, Clone)]
pub struct PretrainedDdnn {
    pub clean: CleanStack,
    pub noisy: NoisyStack,
}

/// Clean stack (to the depth `mode` needs) followed by the noisy stack.
pub fn pretrain_ddnn(pair: &PretrainPair<'_>, depth: usize, mode: PretrainTarget, cfg: &TrainConfig) -> Result<PretrainedDdnn> {
    if depth == 0 {
        return Err(Error::InvalidConfig("depth must be at least 1".into()));
    }
    let clean = pretrain_clean_stack(pair.clean, mode.clean_depth(depth), cfg)?;
    let noisy = pretrain_noisy_stack(pair, &clean, depth, mode, cfg)?;
    Ok(PretrainedDdnn { clean, noisy })
}
