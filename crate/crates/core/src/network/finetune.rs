use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{label_targets, mix_seed, predict, select_rows, sigmoid, NetworkStack, TrainConfig, SALT_FINETUNE};
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::features::FeatureMatrix;

pub(crate) struct StackGrad {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
    pub out_w: Array1<f64>,
    pub out_b: f64,
}

/// Summed binary cross-entropy of the output unit and its gradient with
/// respect to every encoder weight, encoder bias and the output unit.
pub(crate) fn finetune_loss_and_grad(stack: &NetworkStack, x: ArrayView2<f64>, y: ArrayView1<f64>) -> (f64, StackGrad) {
    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(stack.depth() + 1);
    acts.push(x.to_owned());
    for layer in &stack.layers {
        let h = layer.encode(acts.last().unwrap().view());
        acts.push(h);
    }
    let top = acts.last().unwrap();
    let mut z = top.dot(&stack.output.w);
    z += stack.output.b;
    let p = z.mapv(sigmoid);
    let loss: f64 = p
        .iter()
        .zip(y.iter())
        .map(|(&p, &t)| {
            let p = p.clamp(1e-15, 1.0 - 1e-15);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    let d_out = &p - &y;
    let out_w = top.t().dot(&d_out);
    let out_b = d_out.sum();

    // delta at the top hidden layer
    let mut delta = d_out.insert_axis(Axis(1)).dot(&stack.output.w.view().insert_axis(Axis(0)));
    delta.zip_mut_with(top, |d, &h| *d *= h * (1.0 - h));
    let mut layers = Vec::with_capacity(stack.depth());
    for l in (0..stack.depth()).rev() {
        let below = &acts[l];
        let gw = delta.t().dot(below);
        let gb = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut next = delta.dot(&stack.layers[l].w);
            next.zip_mut_with(below, |d, &h| *d *= h * (1.0 - h));
            delta = next;
        }
        layers.push((gw, gb));
    }
    layers.reverse();
    (loss, StackGrad { layers, out_w, out_b })
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    /// Parameters from the epoch with the highest dev accuracy.
    pub stack: NetworkStack,
    /// 0 means the untuned input stack won.
    pub best_epoch: usize,
    /// Dev accuracy before training (index 0) and after each epoch.
    pub dev_accuracy: Vec<f64>,
    pub train_loss: Vec<f64>,
}

fn dev_accuracy(stack: &NetworkStack, dev: &FeatureMatrix) -> Result<f64> {
    let labels = dev.labels.as_ref().ok_or(Error::Empty("dev labels"))?;
    accuracy(&predict(stack, dev)?.labels, labels)
}

/// Supervised backpropagation of the whole stack with dev-set model selection.
pub fn finetune(stack: &NetworkStack, labeled: &FeatureMatrix, cfg: &TrainConfig, dev: &FeatureMatrix) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    let labels = labeled.labels.as_ref().ok_or(Error::Empty("fine-tuning labels"))?;
    if labels.len() != labeled.rows() {
        return Err(Error::DimensionMismatch { expected: labeled.rows(), found: labels.len() });
    }
    if labeled.is_empty() {
        return Err(Error::Empty("fine-tuning rows"));
    }
    if labeled.dim() != stack.input_dim {
        return Err(Error::DimensionMismatch { expected: stack.input_dim, found: labeled.dim() });
    }
    let y = label_targets(labels);
    let mut net = stack.clone();
    let mut best = net.clone();
    let mut best_epoch = 0;
    let mut best_acc = dev_accuracy(&net, dev)?;
    let mut dev_trace = vec![best_acc];
    let mut loss_trace = Vec::with_capacity(cfg.epochs_finetune);

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, SALT_FINETUNE));
    let mut order: Vec<usize> = (0..labeled.rows()).collect();
    let lr = cfg.lr_finetune;
    for epoch in 1..=cfg.epochs_finetune {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = select_rows(labeled.values.view(), batch);
            let yb: Array1<f64> = batch.iter().map(|&i| y[i]).collect();
            let (loss, g) = finetune_loss_and_grad(&net, xb.view(), yb.view());
            epoch_loss += loss;
            for (layer, (gw, gb)) in net.layers.iter_mut().zip(&g.layers) {
                layer.w.scaled_add(-lr, gw);
                layer.b_enc.scaled_add(-lr, gb);
            }
            net.output.w.scaled_add(-lr, &g.out_w);
            net.output.b -= lr * g.out_b;
        }
        if !net.is_finite() {
            return Err(Error::Insufficient("fine-tuning diverged".into()));
        }
        loss_trace.push(epoch_loss);
        let acc = dev_accuracy(&net, dev)?;
        dev_trace.push(acc);
        if acc > best_acc {
            best_acc = acc;
            best_epoch = epoch;
            best = net.clone();
        }
    }
    Ok(FinetuneOutcome {
        stack: best,
        best_epoch,
        dev_accuracy: dev_trace,
        train_loss: loss_trace,
    })
}
