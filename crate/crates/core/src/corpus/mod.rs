//! Synthetic noisy-speech corpora with train/dev/test splits and clean
//! counterparts, plus the unlabeled adaptation segments drawn from them.
//!
//! On disk a corpus is a directory holding `manifest.json` and
//! `<split>/<id>.{noisy.wav,clean.wav,labels.txt}`; extracted features are
//! cached next to the audio as `<id>.{noisy,clean}.feat`.

mod load;
mod segment;
pub mod surrogate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use load::{extract_corpus, load_features, load_segment, load_split, load_utterance, CorpusFeatures};
pub use segment::{draw_adaptation_segment, AdaptationSegment, Fragment};

use crate::error::{Error, Result};
use crate::signal::{frame_labels_from_clean, mix_at_snr, noise_excerpt, write_labels, write_wav, AudioSignal, LABEL_THRESHOLD_DB};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_SNR_DB: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown split '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }

    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }
}

impl FromStr for SplitCounts {
    type Err = Error;

    /// `"train,dev,test"`, e.g. `30,30,40`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidConfig(format!("counts must be three integers, got '{s}'")))?;
        match parts[..] {
            [train, dev, test] => Ok(SplitCounts { train, dev, test }),
            _ => Err(Error::InvalidConfig(format!("counts must be three integers, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceEntry {
    pub id: String,
    pub split: Split,
    /// Paths relative to the corpus directory.
    pub noisy: PathBuf,
    pub clean: PathBuf,
    pub labels: PathBuf,
    pub samples: usize,
    #[serde(default)]
    pub clipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub noise_type: String,
    pub snr_db: f64,
    pub sample_rate: u32,
    pub seed: u64,
    pub utterances: Vec<UtteranceEntry>,
    /// Directory the relative paths are resolved against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &UtteranceEntry> + '_ {
        self.utterances.iter().filter(move |u| u.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn duration_secs(&self, split: Split) -> f64 {
        self.split(split).map(|u| u.samples).sum::<usize>() as f64 / self.sample_rate as f64
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for u in &self.utterances {
            if !seen.insert(&u.id) {
                return Err(Error::Format(format!("utterance id '{}' appears twice", u.id)));
            }
        }
        if self.sample_rate == 0 {
            return Err(Error::Format("manifest sample rate is zero".into()));
        }
        Ok(())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::from(e).at(&path))?;
        Ok(path)
    }

    /// Loads `manifest.json` from a corpus directory, or a manifest file directly.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::from(e).at(&file))?;
        let mut m: CorpusManifest = serde_json::from_str(&text).map_err(|e| Error::from(e).at(&file))?;
        m.root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| e.at(&file))?;
        Ok(m)
    }
}

/// Quantizes to the 16-bit grid the WAV files store, so in-memory signals
/// and files agree exactly.
fn quantize(signal: &AudioSignal) -> AudioSignal {
    let samples = signal
        .samples
        .iter()
        .map(|&s| (s * 32768.0).round().clamp(-32768.0, 32767.0) / 32768.0)
        .collect();
    AudioSignal { samples, sample_rate: signal.sample_rate, clipped: signal.clipped }
}

/// Mixes clean utterances with random excerpts of `noise` at `snr_db` and
/// writes the corpus under `out_dir`. Utterances are drawn without
/// replacement from `clean_pool` and assigned to splits at random.
pub fn synthesize_corpus(
    clean_pool: &[(String, AudioSignal)],
    noise: &AudioSignal,
    noise_type: &str,
    snr_db: f64,
    counts: SplitCounts,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<CorpusManifest> {
    let out_dir = out_dir.as_ref();
    if counts.total() == 0 {
        return Err(Error::InvalidConfig("corpus must contain at least one utterance".into()));
    }
    if clean_pool.len() < counts.total() {
        return Err(Error::Insufficient(format!(
            "clean pool has {} utterances, {} requested",
            clean_pool.len(),
            counts.total()
        )));
    }
    if noise.power() <= 0.0 {
        return Err(Error::SilentSignal("noise"));
    }
    let rate = noise.sample_rate;
    if let Some((id, bad)) = clean_pool.iter().find(|(_, s)| s.sample_rate != rate) {
        return Err(Error::InvalidConfig(format!(
            "clean utterance {id} is {} Hz but the noise is {rate} Hz",
            bad.sample_rate
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = (0..clean_pool.len()).collect();
    picks.shuffle(&mut rng);
    picks.truncate(counts.total());
    let mut splits: Vec<Split> = Split::ALL
        .iter()
        .flat_map(|&s| std::iter::repeat_n(s, counts.get(s)))
        .collect();
    splits.shuffle(&mut rng);
    let offsets: Vec<usize> = picks.iter().map(|_| rng.random_range(0..noise.len())).collect();

    for split in Split::ALL {
        let d = out_dir.join(split.name());
        std::fs::create_dir_all(&d).map_err(|e| Error::from(e).at(&d))?;
    }

    let mut entries: Vec<UtteranceEntry> = picks
        .par_iter()
        .zip(&splits)
        .zip(&offsets)
        .map(|((&p, &split), &offset)| -> Result<UtteranceEntry> {
            let (id, raw) = &clean_pool[p];
            let clean = quantize(raw);
            let excerpt = noise_excerpt(noise, offset, clean.len())?;
            let noisy = mix_at_snr(&clean, &excerpt, snr_db).map_err(|e| match e {
                Error::SilentSignal(_) => Error::Insufficient(format!("clean utterance {id} is silent")),
                other => other,
            })?;
            let labels = frame_labels_from_clean(&clean, LABEL_THRESHOLD_DB)?;
            let dir = PathBuf::from(split.name());
            let entry = UtteranceEntry {
                id: id.clone(),
                split,
                noisy: dir.join(format!("{id}.noisy.wav")),
                clean: dir.join(format!("{id}.clean.wav")),
                labels: dir.join(format!("{id}.labels.txt")),
                samples: clean.len(),
                clipped: noisy.clipped,
            };
            write_wav(out_dir.join(&entry.noisy), &noisy)?;
            write_wav(out_dir.join(&entry.clean), &clean)?;
            write_labels(out_dir.join(&entry.labels), &labels)?;
            Ok(entry)
        })
        .collect::<Result<_>>()?;
    entries.sort_by_key(|e| (e.split, e.id.clone()));

    let manifest = CorpusManifest {
        noise_type: noise_type.to_string(),
        snr_db,
        sample_rate: rate,
        seed,
        utterances: entries,
        root: out_dir.to_path_buf(),
    };
    manifest.validate()?;
    manifest.save(out_dir)?;
    Ok(manifest)
}

/// Reads every `*.wav` in `dir` (sorted by name) as a clean pool; ids are
/// the file stems.
pub fn read_clean_pool(dir: impl AsRef<Path>) -> Result<Vec<(String, AudioSignal)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::from(e).at(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Insufficient(format!("no .wav files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((id, crate::signal::read_wav(p)?))
        })
        .collect()
}
