//! Denoising deep neural network.
//!
//! A stack of sigmoid layers with tied-weight decoders, pre-trained greedily
//! so that each noisy layer reconstructs the representation an accompanying
//! clean network produces, then fine-tuned end to end through a single
//! sigmoid output unit. `NetworkStack::encode` is the learned feature map.

mod gradcheck;
pub mod io;
mod pretrain;
mod finetune;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use finetune::{finetune, FinetuneOutcome};
pub use gradcheck::{finetune_gradient_check, pretrain_gradient_check, GradCheckReport};
pub use pretrain::{
    pretrain_clean_stack, pretrain_ddnn, pretrain_noisy_stack, train_layer, CleanStack, LayerTrace,
    NoisyStack, PretrainPair, PretrainTarget, PretrainedDdnn,
};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::signal::Label;

pub const HIDDEN_WIDTHS: [usize; 3] = [54, 7, 7];
pub const MAX_DEPTH: usize = HIDDEN_WIDTHS.len();

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_pretrain: f64,
    pub epochs_pretrain: usize,
    pub lr_finetune: f64,
    pub epochs_finetune: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epoch interval at which full-set pre-training loss is recorded.
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: usize,
}

fn default_checkpoint() -> usize {
    20
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_pretrain: 0.004,
            epochs_pretrain: 200,
            lr_finetune: 0.005,
            epochs_finetune: 130,
            batch_size: 512,
            seed: 0,
            checkpoint_every: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr_pretrain > 0.0
            && self.lr_finetune > 0.0
            && self.epochs_pretrain > 0
            && self.epochs_finetune > 0
            && self.batch_size > 0
            && self.checkpoint_every > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("training parameters must be positive".into()))
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig { seed, ..self.clone() }
    }
}

/// splitmix64 finalizer, used to derive independent stream seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const SALT_INIT: u64 = 1;
pub(crate) const SALT_PRETRAIN: u64 = 2;
pub(crate) const SALT_FINETUNE: u64 = 3;
pub(crate) const SALT_OUTPUT: u64 = 4;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(crate) fn sigmoid_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(sigmoid);
}

/// One hidden layer: `W` is `out x in`; the decoder uses `W^T` with its own bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub w: Array2<f64>,
    pub b_enc: Array1<f64>,
    pub b_dec: Array1<f64>,
}

impl LayerWeights {
    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    /// `sigmoid(x W^T + b_enc)` for a batch of rows.
    pub fn encode(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.dot(&self.w.t());
        h += &self.b_enc;
        sigmoid_inplace(&mut h);
        h
    }

    /// `sigmoid(h W + b_dec)` for a batch of codes.
    pub fn decode(&self, h: ArrayView2<f64>) -> Array2<f64> {
        let mut r = h.dot(&self.w);
        r += &self.b_dec;
        sigmoid_inplace(&mut r);
        r
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b_enc).chain(&self.b_dec).all(|v| v.is_finite())
    }
}

/// Uniform `(-r, r)` weights with `r = sqrt(6 / (in + out))`, zero biases.
pub fn init_layer(in_dim: usize, out_dim: usize, seed: u64) -> LayerWeights {
    let r = init_radius(in_dim, out_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array2::from_shape_simple_fn((out_dim, in_dim), || rng.random_range(-r..r));
    LayerWeights {
        w,
        b_enc: Array1::zeros(out_dim),
        b_dec: Array1::zeros(in_dim),
    }
}

pub fn init_radius(in_dim: usize, out_dim: usize) -> f64 {
    (6.0 / (in_dim + out_dim) as f64).sqrt()
}

/// Sigmoid unit giving the speech probability.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputUnit {
    pub w: Array1<f64>,
    pub b: f64,
}

impl OutputUnit {
    pub fn init(in_dim: usize, seed: u64) -> Self {
        let layer = init_layer(in_dim, 1, seed);
        OutputUnit {
            w: layer.w.row(0).to_owned(),
            b: 0.0,
        }
    }

    pub fn zeros(in_dim: usize) -> Self {
        OutputUnit {
            w: Array1::zeros(in_dim),
            b: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStack {
    pub input_dim: usize,
    pub layers: Vec<LayerWeights>,
    pub output: OutputUnit,
}

impl NetworkStack {
    /// Checks the layer chain and attaches a freshly initialised output unit.
    pub fn from_layers(layers: Vec<LayerWeights>, output_seed: u64) -> Result<Self> {
        let input_dim = layers.first().map(|l| l.in_dim()).ok_or(Error::Empty("no hidden layers"))?;
        for pair in layers.windows(2) {
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].out_dim(),
                    found: pair[1].in_dim(),
                });
            }
        }
        let top = layers.last().unwrap().out_dim();
        Ok(NetworkStack {
            input_dim,
            layers,
            output: OutputUnit::init(top, output_seed),
        })
    }

    /// `from_layers` with the output unit seeded from a run seed.
    pub fn assemble(layers: Vec<LayerWeights>, run_seed: u64) -> Result<Self> {
        Self::from_layers(layers, mix_seed(run_seed, SALT_OUTPUT))
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.out_dim()).collect()
    }

    /// The learned representation: the top hidden layer's activations.
    pub fn encode(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for layer in &self.layers {
            h = layer.encode(h.view());
        }
        h
    }

    pub fn probabilities(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let h = self.encode(x);
        let mut z = h.dot(&self.output.w);
        z += self.output.b;
        z.mapv(sigmoid)
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.is_finite())
            && self.output.w.iter().all(|v| v.is_finite())
            && self.output.b.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<Label>,
    pub probabilities: Vec<f64>,
}

/// Speech iff the output probability is strictly above 0.5.
pub fn predict(stack: &NetworkStack, features: &FeatureMatrix) -> Result<Prediction> {
    if features.dim() != stack.input_dim {
        return Err(Error::DimensionMismatch {
            expected: stack.input_dim,
            found: features.dim(),
        });
    }
    let probabilities = stack.probabilities(features.values.view()).to_vec();
    let labels = probabilities.iter().map(|&p| Label::from_bool(p > 0.5)).collect();
    Ok(Prediction { labels, probabilities })
}

/// `-sum_j t_j ln r_j + (1 - t_j) ln(1 - r_j)`.
pub fn reconstruction_ce(target: &[f64], reconstruction: &[f64]) -> Result<f64> {
    if target.len() != reconstruction.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            found: reconstruction.len(),
        });
    }
    Ok(target
        .iter()
        .zip(reconstruction)
        .map(|(t, r)| -(t * r.ln() + (1.0 - t) * (1.0 - r).ln()))
        .sum())
}

const PROB_EPS: f64 = 1e-15;

/// Summed cross-entropy over a batch, with outputs kept off exact 0 and 1.
pub(crate) fn batch_ce(target: ArrayView2<f64>, output: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    ndarray::Zip::from(&target).and(&output).for_each(|&t, &r| {
        let r = r.clamp(PROB_EPS, 1.0 - PROB_EPS);
        total -= t * r.ln() + (1.0 - t) * (1.0 - r).ln();
    });
    total
}

pub(crate) fn label_targets(labels: &[Label]) -> Array1<f64> {
    labels.iter().map(|l| if l.is_speech() { 1.0 } else { 0.0 }).collect()
}

/// Mean of `f` applied to row chunks, used to evaluate large sets without
/// materialising every activation at once.
pub(crate) fn chunked_sum(rows: usize, chunk: usize, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
    let mut total = 0.0;
    let mut start = 0;
    while start < rows {
        let end = (start + chunk).min(rows);
        total += f(start, end);
        start = end;
    }
    total
}

pub(crate) fn select_rows(m: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    m.select(Axis(0), idx)
}
