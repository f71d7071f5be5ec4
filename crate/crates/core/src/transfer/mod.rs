//! Transfer schemes between a labeled source corpus and an unlabeled target.
//!
//! Every scheme fine-tunes on the labeled source train split with source dev
//! model selection (UB uses the target's own splits instead) and is scored
//! once on the target test split. The schemes differ only in the data the
//! network is pre-trained on:
//!
//! * LB: source train.
//! * UB: target train.
//! * S1: the target adaptation segment alone.
//! * S2: source train pooled with the adaptation segment.
//! * S3(t), S3(s): separate lower stacks for source and target, a shared top
//!   layer pre-trained on both sides' representations, then fine-tuning of
//!   the target-side or the source-side stack.

mod cache;
mod matrix;

use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use ndarray::{concatenate, Axis};

pub use crate::eval::report::Scheme;
pub use cache::{CacheKey, CacheStats, LowerStack, StackCache};
pub use matrix::{run_task_matrix, CellId, MatrixOptions, MatrixOutcome, MatrixSpec};

use crate::corpus::{load_segment, load_split, AdaptationSegment, CorpusFeatures, CorpusManifest, Split};
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::features::{fit_normalizer, FeatureMatrix, Normalizer};
use crate::network::{
    finetune, PretrainTarget, predict, pretrain_clean_stack, pretrain_ddnn, pretrain_noisy_stack, train_layer,
    NetworkStack, PretrainPair, TrainConfig, HIDDEN_WIDTHS, MAX_DEPTH,
};
use crate::signal::Label;

/// Labeled evaluation frames whose labels are reachable only through `score`,
/// which counts every access.
#[derive(Debug)]
pub struct TestSet {
    features: FeatureMatrix,
    labels: Vec<Label>,
    reads: AtomicUsize,
}

impl TestSet {
    pub fn new(labeled: FeatureMatrix) -> Result<Self> {
        let labels = labeled.labels.clone().ok_or(Error::Empty("test labels"))?;
        if labels.is_empty() {
            return Err(Error::Empty("test frames"));
        }
        Ok(TestSet {
            features: labeled.without_labels(),
            labels,
            reads: AtomicUsize::new(0),
        })
    }

    /// Unlabeled test features.
    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn score(&self, predicted: &[Label]) -> Result<f64> {
        self.reads.fetch_add(1, Ordering::SeqCst);
        accuracy(predicted, &self.labels)
    }

    /// How many times labels were consulted.
    pub fn label_reads(&self) -> usize {
        self.reads.load(Ordering::SeqCst)
    }
}

fn fingerprint(m: &CorpusFeatures) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    m.noisy.values.dim().hash(&mut h);
    for v in m.noisy.values.iter().chain(m.clean.values.iter()) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// One noise condition's data, all unnormalized.
#[derive(Debug)]
pub struct Domain {
    pub name: String,
    /// Labeled noisy train frames with their clean counterparts.
    pub train: CorpusFeatures,
    pub dev: FeatureMatrix,
    pub test: TestSet,
    /// Unlabeled segment of the train split, with clean counterparts.
    pub adaptation: CorpusFeatures,
    train_fp: u64,
    adaptation_fp: u64,
}

impl Domain {
    pub fn new(
        name: impl Into<String>,
        train: CorpusFeatures,
        dev: FeatureMatrix,
        test: FeatureMatrix,
        adaptation: CorpusFeatures,
    ) -> Result<Self> {
        let name = name.into();
        if train.noisy.labels.is_none() || dev.labels.is_none() {
            return Err(Error::InvalidConfig(format!("domain '{name}' needs labeled train and dev frames")));
        }
        let adaptation = CorpusFeatures {
            noisy: adaptation.noisy.without_labels(),
            clean: adaptation.clean,
        };
        Ok(Domain {
            train_fp: fingerprint(&train),
            adaptation_fp: fingerprint(&adaptation),
            name,
            train,
            dev,
            test: TestSet::new(test)?,
            adaptation,
        })
    }

    pub fn from_manifest(manifest: &CorpusManifest, segment: &AdaptationSegment) -> Result<Self> {
        let train = load_split(manifest, Split::Train)?;
        let dev = load_split(manifest, Split::Dev)?.noisy;
        let test = load_split(manifest, Split::Test)?.noisy;
        let adaptation = load_segment(manifest, segment)?;
        Domain::new(manifest.noise_type.clone(), train, dev, test, adaptation)
    }

    pub fn with_adaptation(mut self, adaptation: CorpusFeatures) -> Self {
        self.adaptation = CorpusFeatures {
            noisy: adaptation.noisy.without_labels(),
            clean: adaptation.clean,
        };
        self.adaptation_fp = fingerprint(&self.adaptation);
        self
    }

    /// Labeled source train frames as handed to fine-tuning.
    fn labeled_train(&self) -> &FeatureMatrix {
        &self.train.noisy
    }
}

#[derive(Debug, Clone)]
pub struct TransferTask<'a> {
    pub source: &'a Domain,
    pub target: &'a Domain,
    pub depth: usize,
    pub cfg: TrainConfig,
    pub mode: PretrainTarget,
    pub seeds: Vec<u64>,
}

impl TransferTask<'_> {
    pub fn pair_name(&self) -> String {
        crate::eval::report::pair_name(&self.source.name, &self.target.name)
    }

    pub fn validate(&self, scheme: Scheme) -> Result<()> {
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return Err(Error::InvalidConfig(format!("depth {} outside 1..={MAX_DEPTH}", self.depth)));
        }
        if self.depth < scheme.min_depth() {
            return Err(Error::InvalidConfig(format!(
                "{} needs at least {} layers, got {}",
                scheme.heading(),
                scheme.min_depth(),
                self.depth
            )));
        }
        self.cfg.validate()
    }
}

/// What fine-tuning was given, for checking that schemes share it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinetuneAudit {
    pub domain: String,
    pub rows: usize,
    pub labels_hash: u64,
}

fn audit_of(domain: &Domain) -> FinetuneAudit {
    let labels = domain.labeled_train().labels.as_ref().expect("checked on construction");
    let mut h = std::collections::hash_map::DefaultHasher::new();
    labels.hash(&mut h);
    domain.train_fp.hash(&mut h);
    FinetuneAudit {
        domain: domain.name.clone(),
        rows: labels.len(),
        labels_hash: h.finish(),
    }
}

/// One scheme trained and scored under one seed.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub depth: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub pretrain_s: f64,
    pub finetune_s: f64,
    pub best_epoch: usize,
    pub stack: NetworkStack,
    pub normalizer: Normalizer,
    pub audit: FinetuneAudit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub depth: usize,
    pub per_seed: Vec<(u64, f64)>,
    pub mean: f64,
    pub pretrain_s: f64,
}

impl SchemeResult {
    fn from_runs(scheme: Scheme, depth: usize, runs: &[SchemeRun]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::InvalidConfig("at least one run seed is required".into()));
        }
        let per_seed: Vec<(u64, f64)> = runs.iter().map(|r| (r.seed, r.accuracy)).collect();
        let n = runs.len() as f64;
        Ok(SchemeResult {
            scheme,
            depth,
            mean: per_seed.iter().map(|p| p.1).sum::<f64>() / n,
            pretrain_s: runs.iter().map(|r| r.pretrain_s).sum::<f64>() / n,
            per_seed,
        })
    }
}

/// Shared state for a batch of runs: the lower-stack caches used by the
/// hybrid schemes.
#[derive(Debug, Default)]
pub struct TransferContext {
    pub source_stacks: StackCache,
    pub target_stacks: StackCache,
}

impl TransferContext {
    pub fn new() -> Self {
        Self::default()
    }
}

fn normalizer_for(pre: &CorpusFeatures, label: &str) -> Result<Normalizer> {
    fit_normalizer(&[&pre.noisy, &pre.clean], label)
}

/// Fits a normalizer to the pre-training data and pre-trains a full stack.
fn pretrain_stack(pre: &CorpusFeatures, label: &str, task: &TransferTask<'_>, cfg: &TrainConfig) -> Result<(Normalizer, NetworkStack)> {
    if pre.rows() == 0 {
        return Err(Error::Empty("pre-training corpus"));
    }
    let norm = normalizer_for(pre, label)?;
    let scaled = pre.normalized(&norm)?;
    let pair = PretrainPair::new(&scaled.noisy, &scaled.clean)?;
    let ddnn = pretrain_ddnn(&pair, task.depth, task.mode, cfg)?;
    Ok((norm, NetworkStack::assemble(ddnn.noisy.layers, cfg.seed)?))
}

pub(crate) fn pretrain_lower(pre: &CorpusFeatures, label: &str, depth: usize, mode: PretrainTarget, cfg: &TrainConfig) -> Result<LowerStack> {
    if pre.rows() == 0 {
        return Err(Error::Empty("pre-training corpus"));
    }
    let normalizer = normalizer_for(pre, label)?;
    let scaled = pre.normalized(&normalizer)?;
    let pair = PretrainPair::new(&scaled.noisy, &scaled.clean)?;
    let clean = pretrain_clean_stack(&scaled.clean, depth, cfg)?;
    let noisy = pretrain_noisy_stack(&pair, &clean, depth, mode, cfg)?;
    Ok(LowerStack { normalizer, clean, noisy })
}

struct Tuned {
    accuracy: f64,
    finetune_s: f64,
    best_epoch: usize,
    stack: NetworkStack,
}

/// Fine-tunes on `labeled`'s train split with its dev split for selection,
/// then scores once on `test`.
fn finetune_and_score(stack: &NetworkStack, norm: &Normalizer, labeled: &Domain, test: &TestSet, cfg: &TrainConfig) -> Result<Tuned> {
    let started = Instant::now();
    let train = norm.apply(labeled.labeled_train())?;
    let dev = norm.apply(&labeled.dev)?;
    let outcome = finetune(stack, &train, cfg, &dev)?;
    let finetune_s = started.elapsed().as_secs_f64();
    let predicted = predict(&outcome.stack, &norm.apply(test.features())?)?;
    Ok(Tuned {
        accuracy: test.score(&predicted.labels)?,
        finetune_s,
        best_epoch: outcome.best_epoch,
        stack: outcome.stack,
    })
}

fn lower_key(domain: &Domain, role_fp: u64, depth: usize, mode: PretrainTarget, cfg: &TrainConfig) -> CacheKey {
    CacheKey::new(&domain.name, role_fp, depth, mode, cfg)
}

/// Trains and scores one scheme under one seed.
pub fn run_scheme(task: &TransferTask<'_>, scheme: Scheme, seed: u64, ctx: &TransferContext) -> Result<SchemeRun> {
    task.validate(scheme)?;
    let cfg = task.cfg.with_seed(seed);
    let (src, tgt) = (task.source, task.target);
    let started = Instant::now();

    let (normalizer, stack, labeled) = match scheme {
        Scheme::LowerBound => {
            let (n, s) = pretrain_stack(&src.train, &format!("{} train", src.name), task, &cfg)?;
            (n, s, src)
        }
        Scheme::UpperBound => {
            let (n, s) = pretrain_stack(&tgt.train, &format!("{} train", tgt.name), task, &cfg)?;
            (n, s, tgt)
        }
        Scheme::Scheme1 => {
            if tgt.adaptation.rows() == 0 {
                return Err(Error::Empty("adaptation segment"));
            }
            let (n, s) = pretrain_stack(&tgt.adaptation, &format!("{} adaptation", tgt.name), task, &cfg)?;
            (n, s, src)
        }
        Scheme::Scheme2 => {
            let pooled = CorpusFeatures::concat(&[&src.train, &tgt.adaptation])?;
            let label = format!("{} train + {} adaptation", src.name, tgt.name);
            let (n, s) = pretrain_stack(&pooled, &label, task, &cfg)?;
            (n, s, src)
        }
        Scheme::Scheme3Target | Scheme::Scheme3Source => {
            if tgt.adaptation.rows() == 0 {
                return Err(Error::Empty("adaptation segment"));
            }
            let lower = task.depth - 1;
            let src_stack = ctx.source_stacks.get_or_build(lower_key(src, src.train_fp, lower, task.mode, &cfg), || {
                pretrain_lower(&src.train, &format!("{} train", src.name), lower, task.mode, &cfg)
            })?;
            let tgt_stack = ctx.target_stacks.get_or_build(
                lower_key(tgt, tgt.adaptation_fp, lower, task.mode, &cfg),
                || pretrain_lower(&tgt.adaptation, &format!("{} adaptation", tgt.name), lower, task.mode, &cfg),
            )?;
            let top = hybrid_top_layer(&src_stack, &tgt_stack, task.depth, task.mode, &cfg)?;
            let side: &Arc<LowerStack> = if scheme == Scheme::Scheme3Target { &tgt_stack } else { &src_stack };
            let mut layers = side.noisy.layers.clone();
            layers.push(top);
            (side.normalizer.clone(), NetworkStack::assemble(layers, cfg.seed)?, src)
        }
    };
    let pretrain_s = started.elapsed().as_secs_f64();
    let tuned = finetune_and_score(&stack, &normalizer, labeled, &tgt.test, &cfg)?;
    Ok(SchemeRun {
        scheme,
        depth: task.depth,
        seed,
        accuracy: tuned.accuracy,
        pretrain_s,
        finetune_s: tuned.finetune_s,
        best_epoch: tuned.best_epoch,
        stack: tuned.stack,
        normalizer,
        audit: audit_of(labeled),
    })
}

/// Top layer pre-trained on the pooled outputs of both lower stacks, with
/// each side's clean stack providing the clean representations.
fn hybrid_top_layer(
    src: &LowerStack,
    tgt: &LowerStack,
    depth: usize,
    mode: PretrainTarget,
    cfg: &TrainConfig,
) -> Result<crate::network::LayerWeights> {
    let below = depth - 1;
    let width = HIDDEN_WIDTHS[depth - 1];
    let noisy = concatenate(Axis(0), &[src.noisy.top_representation.view(), tgt.noisy.top_representation.view()])
        .map_err(|e| Error::Format(e.to_string()))?;
    let clean = concatenate(Axis(0), &[src.clean.representations[below].view(), tgt.clean.representations[below].view()])
        .map_err(|e| Error::Format(e.to_string()))?;
    let target = match mode {
        PretrainTarget::CleanInput => clean,
        PretrainTarget::CleanOutput => {
            let (clean_top, _) = train_layer(clean.view(), clean.view(), depth, width, PretrainTarget::CleanInput, cfg)?;
            clean_top.encode(clean.view())
        }
    };
    let (top, _) = train_layer(noisy.view(), target.view(), depth, width, mode, cfg)?;
    Ok(top)
}

fn run_all(task: &TransferTask<'_>, scheme: Scheme, ctx: &TransferContext) -> Result<SchemeResult> {
    let runs = task
        .seeds
        .iter()
        .map(|&s| run_scheme(task, scheme, s, ctx))
        .collect::<Result<Vec<_>>>()?;
    SchemeResult::from_runs(scheme, task.depth, &runs)
}

pub fn run_lb(task: &TransferTask<'_>) -> Result<SchemeResult> {
    run_all(task, Scheme::LowerBound, &TransferContext::new())
}

pub fn run_ub(task: &TransferTask<'_>) -> Result<SchemeResult> {
    run_all(task, Scheme::UpperBound, &TransferContext::new())
}

pub fn run_scheme1(task: &TransferTask<'_>) -> Result<SchemeResult> {
    run_all(task, Scheme::Scheme1, &TransferContext::new())
}

pub fn run_scheme2(task: &TransferTask<'_>) -> Result<SchemeResult> {
    run_all(task, Scheme::Scheme2, &TransferContext::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridVariant {
    Target,
    Source,
}

pub fn run_scheme3(task: &TransferTask<'_>, variant: HybridVariant, ctx: &TransferContext) -> Result<SchemeResult> {
    let scheme = match variant {
        HybridVariant::Target => Scheme::Scheme3Target,
        HybridVariant::Source => Scheme::Scheme3Source,
    };
    run_all(task, scheme, ctx)
}
