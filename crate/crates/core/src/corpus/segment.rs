//! Unlabeled adaptation segments taken from a corpus's train split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusManifest, Split};
use crate::error::{Error, Result};

/// A leading part of one train utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub id: String,
    /// Samples kept from the start of the utterance.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationSegment {
    pub noise_type: String,
    pub sample_rate: u32,
    pub fragments: Vec<Fragment>,
}

impl AdaptationSegment {
    pub fn empty(noise_type: impl Into<String>, sample_rate: u32) -> Self {
        AdaptationSegment {
            noise_type: noise_type.into(),
            sample_rate,
            fragments: Vec::new(),
        }
    }

    /// Every utterance of `split` in manifest order, untrimmed.
    pub fn whole_split(manifest: &CorpusManifest, split: Split) -> Self {
        AdaptationSegment {
            noise_type: manifest.noise_type.clone(),
            sample_rate: manifest.sample_rate,
            fragments: manifest
                .split(split)
                .map(|u| Fragment {
                    id: u.id.clone(),
                    samples: u.samples,
                })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn total_samples(&self) -> usize {
        self.fragments.iter().map(|f| f.samples).sum()
    }

    pub fn duration_secs(&self) -> f64 {
        self.total_samples() as f64 / self.sample_rate as f64
    }
}

/// Whole train utterances in random order until `duration_s` is reached,
/// the last one trimmed to fit.
pub fn draw_adaptation_segment(manifest: &CorpusManifest, duration_s: f64, seed: u64) -> Result<AdaptationSegment> {
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(Error::InvalidConfig(format!("segment duration {duration_s} is not a non-negative number")));
    }
    let wanted = (duration_s * manifest.sample_rate as f64).round() as usize;
    let mut pool: Vec<_> = manifest.split(Split::Train).collect();
    let available: usize = pool.iter().map(|u| u.samples).sum();
    if available < wanted {
        return Err(Error::Insufficient(format!(
            "train split of '{}' holds {:.2} s of audio, {duration_s} s requested",
            manifest.noise_type,
            available as f64 / manifest.sample_rate as f64
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let mut seg = AdaptationSegment::empty(manifest.noise_type.clone(), manifest.sample_rate);
    let mut left = wanted;
    for u in pool {
        if left == 0 {
            break;
        }
        let take = u.samples.min(left);
        seg.fragments.push(Fragment {
            id: u.id.clone(),
            samples: take,
        });
        left -= take;
    }
    Ok(seg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UtteranceEntry;
    use std::path::PathBuf;

    fn manifest(train: usize) -> CorpusManifest {
        let utterances = (0..train + 4)
            .map(|i| UtteranceEntry {
                id: format!("u{i:04}"),
                split: if i < train { Split::Train } else { Split::Test },
                noisy: PathBuf::new(),
                clean: PathBuf::new(),
                labels: PathBuf::new(),
                samples: 8000 + (i % 7) * 100,
                clipped: 0,
            })
            .collect();
        CorpusManifest {
            noise_type: "x".into(),
            snr_db: 5.0,
            sample_rate: 8000,
            seed: 0,
            utterances,
            root: PathBuf::new(),
        }
    }

    #[test]
    fn thirty_seconds_from_train_only() {
        let m = manifest(300);
        let seg = draw_adaptation_segment(&m, 30.0, 1).unwrap();
        assert!((seg.duration_secs() - 30.0).abs() <= 0.6);
        let train: std::collections::HashSet<_> = m.split(Split::Train).map(|u| u.id.clone()).collect();
        assert!(seg.fragments.iter().all(|f| train.contains(&f.id)));
        // only the last fragment may be trimmed
        let full = |f: &Fragment| m.utterances.iter().find(|u| u.id == f.id).unwrap().samples;
        let n = seg.fragments.len();
        assert!(seg.fragments[..n - 1].iter().all(|f| f.samples == full(f)));
    }

    #[test]
    fn zero_and_too_long() {
        let m = manifest(10);
        assert!(draw_adaptation_segment(&m, 0.0, 1).unwrap().is_empty());
        assert!(matches!(draw_adaptation_segment(&m, 1000.0, 1), Err(Error::Insufficient(_))));
        assert!(draw_adaptation_segment(&m, -1.0, 1).is_err());
    }

    #[test]
    fn seeds_select_differently() {
        let m = manifest(300);
        let mut same = 0;
        for s in 0..100u64 {
            let a = draw_adaptation_segment(&m, 30.0, 2 * s).unwrap();
            let b = draw_adaptation_segment(&m, 30.0, 2 * s + 1).unwrap();
            if a.fragments == b.fragments {
                same += 1;
            }
        }
        assert_eq!(same, 0);
        assert_eq!(draw_adaptation_segment(&m, 30.0, 5).unwrap(), draw_adaptation_segment(&m, 30.0, 5).unwrap());
    }

    #[test]
    fn whole_split_keeps_order() {
        let m = manifest(5);
        let seg = AdaptationSegment::whole_split(&m, Split::Train);
        let ids: Vec<_> = seg.fragments.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, ["u0000", "u0001", "u0002", "u0003", "u0004"]);
        assert_eq!(seg.total_samples(), m.split(Split::Train).map(|u| u.samples).sum::<usize>());
    }
}
