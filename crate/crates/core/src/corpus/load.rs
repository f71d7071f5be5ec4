//! Feature loading with an on-disk per-utterance cache.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{AdaptationSegment, CorpusManifest, Split, UtteranceEntry};
use crate::error::{Error, Result};
use crate::features::io::{read_features, write_features, write_features_csv};
use crate::features::{FeatureExtractor, FeatureMatrix, Normalizer};
use crate::signal::{read_labels, read_wav, FrameConfig};

/// Noisy features (labeled when loaded from a split) and the clean
/// counterpart, aligned row for row.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFeatures {
    pub noisy: FeatureMatrix,
    pub clean: FeatureMatrix,
}

impl CorpusFeatures {
    pub fn rows(&self) -> usize {
        self.noisy.rows()
    }

    pub fn normalized(&self, norm: &Normalizer) -> Result<CorpusFeatures> {
        Ok(CorpusFeatures {
            noisy: norm.apply(&self.noisy)?,
            clean: norm.apply(&self.clean)?,
        })
    }

    pub fn concat(parts: &[&CorpusFeatures]) -> Result<CorpusFeatures> {
        let noisy: Vec<&FeatureMatrix> = parts.iter().map(|p| &p.noisy).collect();
        let clean: Vec<&FeatureMatrix> = parts.iter().map(|p| &p.clean).collect();
        Ok(CorpusFeatures {
            noisy: FeatureMatrix::concat(&noisy)?,
            clean: FeatureMatrix::concat(&clean)?,
        })
    }
}

fn with_suffix(wav: &Path, suffix: &str) -> PathBuf {
    let name = wav.file_name().unwrap_or_default().to_string_lossy();
    let stem = name.strip_suffix(".wav").unwrap_or(&name);
    wav.with_file_name(format!("{stem}{suffix}"))
}

pub(crate) fn cache_paths(manifest: &CorpusManifest, u: &UtteranceEntry) -> (PathBuf, PathBuf) {
    (
        with_suffix(&manifest.resolve(&u.noisy), ".feat"),
        with_suffix(&manifest.resolve(&u.clean), ".feat"),
    )
}

fn features_of(extractor: &FeatureExtractor, wav: &Path, cache: &Path) -> Result<FeatureMatrix> {
    if cache.exists() {
        return read_features(cache);
    }
    let signal = read_wav(wav)?;
    extractor.extract(&signal).map_err(|e| e.at(wav))
}

/// Raw (unnormalized) features of one utterance: labeled noisy rows and the
/// clean rows they align with.
pub fn load_utterance(manifest: &CorpusManifest, u: &UtteranceEntry) -> Result<CorpusFeatures> {
    let extractor = FeatureExtractor::new(manifest.sample_rate);
    let (noisy_cache, clean_cache) = cache_paths(manifest, u);
    let noisy = features_of(&extractor, &manifest.resolve(&u.noisy), &noisy_cache)?;
    let clean = features_of(&extractor, &manifest.resolve(&u.clean), &clean_cache)?;
    if noisy.rows() != clean.rows() {
        return Err(Error::Format(format!(
            "utterance {}: {} noisy frames but {} clean frames",
            u.id,
            noisy.rows(),
            clean.rows()
        )));
    }
    let label_path = manifest.resolve(&u.labels);
    let labels = read_labels(&label_path)?;
    let noisy = noisy.with_labels(labels).map_err(|e| {
        Error::Format(format!("label file has the wrong length ({e})")).at(&label_path)
    })?;
    Ok(CorpusFeatures { noisy, clean })
}

fn load_many(manifest: &CorpusManifest, entries: &[&UtteranceEntry], keep: &[usize]) -> Result<CorpusFeatures> {
    let parts: Vec<CorpusFeatures> = entries
        .par_iter()
        .zip(keep)
        .map(|(u, &rows)| {
            let f = load_utterance(manifest, u)?;
            let n = rows.min(f.rows());
            Ok(CorpusFeatures {
                noisy: f.noisy.slice_rows(0, n),
                clean: f.clean.slice_rows(0, n),
            })
        })
        .collect::<Result<_>>()?;
    if parts.is_empty() {
        return Ok(CorpusFeatures {
            noisy: FeatureMatrix::new(ndarray::Array2::zeros((0, crate::features::FEATURE_DIM)), Some(Vec::new()))?,
            clean: FeatureMatrix::empty(crate::features::FEATURE_DIM),
        });
    }
    CorpusFeatures::concat(&parts.iter().collect::<Vec<_>>())
}

/// All frames of a split in manifest order, unnormalized.
pub fn load_split(manifest: &CorpusManifest, split: Split) -> Result<CorpusFeatures> {
    let entries: Vec<&UtteranceEntry> = manifest.split(split).collect();
    if entries.is_empty() {
        return Err(Error::Insufficient(format!("corpus '{}' has no {split} utterances", manifest.noise_type)));
    }
    load_many(manifest, &entries, &vec![usize::MAX; entries.len()])
}

/// A split scaled by `norm`.
pub fn load_features(manifest: &CorpusManifest, split: Split, norm: &Normalizer) -> Result<CorpusFeatures> {
    load_split(manifest, split)?.normalized(norm)
}

/// Unlabeled noisy frames of a segment with their clean counterparts. A
/// trimmed fragment keeps only the frames lying wholly inside its samples.
pub fn load_segment(manifest: &CorpusManifest, seg: &AdaptationSegment) -> Result<CorpusFeatures> {
    let frames = FrameConfig::for_rate(manifest.sample_rate);
    let mut entries = Vec::with_capacity(seg.fragments.len());
    let mut keep = Vec::with_capacity(seg.fragments.len());
    for f in &seg.fragments {
        let u = manifest
            .utterances
            .iter()
            .find(|u| u.id == f.id)
            .ok_or_else(|| Error::Format(format!("segment names unknown utterance '{}'", f.id)))?;
        if u.split != Split::Train {
            return Err(Error::InvalidConfig(format!("segment utterance '{}' is not in the train split", f.id)));
        }
        entries.push(u);
        keep.push(frames.frame_count(f.samples.min(u.samples)));
    }
    let loaded = load_many(manifest, &entries, &keep)?;
    Ok(CorpusFeatures {
        noisy: loaded.noisy.without_labels(),
        clean: loaded.clean,
    })
}

/// Extracts and caches features for every utterance; returns how many
/// utterances were written. With `export_csv` a CSV copy sits beside each
/// feature file.
pub fn extract_corpus(manifest: &CorpusManifest, splits: &[Split], export_csv: bool) -> Result<usize> {
    let extractor = FeatureExtractor::new(manifest.sample_rate);
    let entries: Vec<&UtteranceEntry> = manifest.utterances.iter().filter(|u| splits.contains(&u.split)).collect();
    entries
        .par_iter()
        .map(|u| {
            let (noisy_cache, clean_cache) = cache_paths(manifest, u);
            for (wav, cache) in [(&u.noisy, noisy_cache), (&u.clean, clean_cache)] {
                let wav = manifest.resolve(wav);
                let signal = read_wav(&wav)?;
                let m = extractor.extract(&signal).map_err(|e| e.at(&wav))?;
                write_features(&cache, &m)?;
                if export_csv {
                    write_features_csv(cache.with_extension("csv"), &m)?;
                }
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(entries.len())
}
