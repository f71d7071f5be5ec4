//! The 273-dimensional per-frame acoustic feature vector.
//!
//! | block      | dims | source                                   |
//! |------------|------|------------------------------------------|
//! | pitch      | 1    | autocorrelation F0                       |
//! | dft        | 16   | log band magnitudes                      |
//! | dft8/16    | 16   | `dft` averaged over 8/16-frame windows   |
//! | mfcc       | 20   | 26-filter mel cepstrum                   |
//! | mfcc8/16   | 20   | `mfcc` averaged over 8/16-frame windows  |
//! | lpc        | 12   | Levinson-Durbin predictor                |
//! | rasta_plp  | 17   | RASTA-PLP cepstrum                       |
//! | ams        | 135  | 9 bands x 15 modulation bins             |

pub mod ams;
pub mod dft;
pub mod io;
pub mod lpc;
pub mod mfcc;
pub mod normalize;
pub mod pitch;
pub mod rasta;
pub mod spectrum;

use ndarray::{Array2, ArrayView1, Axis};

pub use normalize::{compute_centroid, fit_normalizer, Centroid, Normalizer};

use crate::error::{Error, Result};
use crate::signal::{frame_signal, AudioSignal, Label};
use ams::{AmsExtractor, MOD_CONTEXT};
use mfcc::MfccExtractor;
use rasta::RastaPlp;
use spectrum::SpectralAnalyzer;

pub const FEATURE_DIM: usize = 273;

/// Block names and widths in feature order.
pub const LAYOUT: [(&str, usize); 10] = [
    ("pitch", 1),
    ("dft", 16),
    ("dft8", 16),
    ("dft16", 16),
    ("mfcc", 20),
    ("mfcc8", 20),
    ("mfcc16", 20),
    ("lpc", 12),
    ("rasta_plp", 17),
    ("ams", 135),
];

/// Column range of a named block.
pub fn block_range(name: &str) -> Option<std::ops::Range<usize>> {
    let mut start = 0;
    for (n, d) in LAYOUT {
        if n == name {
            return Some(start..start + d);
        }
        start += d;
    }
    None
}

/// Frames an utterance must have for every extractor to have context.
pub const MIN_FRAMES: usize = MOD_CONTEXT;

/// Row-per-frame feature matrix with optional frame labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub labels: Option<Vec<Label>>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, labels: Option<Vec<Label>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != values.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: values.nrows(),
                    found: l.len(),
                });
            }
        }
        Ok(FeatureMatrix { values, labels })
    }

    pub fn unlabeled(values: Array2<f64>) -> Self {
        FeatureMatrix { values, labels: None }
    }

    pub fn empty(dim: usize) -> Self {
        FeatureMatrix {
            values: Array2::zeros((0, dim)),
            labels: None,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], dim: usize) -> Result<Self> {
        let mut values = Array2::zeros((rows.len(), dim));
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            values.row_mut(i).assign(&ArrayView1::from(r.as_slice()));
        }
        Ok(FeatureMatrix { values, labels: None })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.rows(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    /// Row subset `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.slice(ndarray::s![start..end, ..]).to_owned(),
            labels: self.labels.as_ref().map(|l| l[start..end].to_vec()),
        }
    }

    /// Stacks matrices vertically. Labels survive only if every part has them.
    pub fn concat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let Some(first) = parts.first() else {
            return Err(Error::Empty("no matrices to concatenate"));
        };
        let dim = first.dim();
        if let Some(bad) = parts.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        let views: Vec<_> = parts.iter().map(|p| p.values.view()).collect();
        let values = ndarray::concatenate(Axis(0), &views).expect("dims checked");
        let labels = if parts.iter().all(|p| p.labels.is_some()) {
            Some(parts.iter().flat_map(|p| p.labels.clone().unwrap()).collect())
        } else {
            None
        };
        Ok(FeatureMatrix { values, labels })
    }
}

/// Symmetric moving average over `[t - w/2, t + w/2]`, truncated at the
/// utterance edges.
pub fn window_aggregate(base: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let t_len = base.len();
    let half = window / 2;
    (0..t_len)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(t_len - 1);
            let dim = base[t].len();
            let mut acc = vec![0.0; dim];
            for row in &base[lo..=hi] {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            let n = (hi - lo + 1) as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        })
        .collect()
}

/// Computes every feature block for every frame of an utterance.
pub struct FeatureExtractor {
    sample_rate: u32,
    analyzer: SpectralAnalyzer,
    mfcc: MfccExtractor,
    plp: RastaPlp,
    ams: AmsExtractor,
}

impl FeatureExtractor {
    pub fn new(sample_rate: u32) -> Self {
        let frame_length = (sample_rate * crate::signal::FRAME_MS / 1000) as usize;
        let shift = (sample_rate * crate::signal::SHIFT_MS / 1000) as f64;
        FeatureExtractor {
            sample_rate,
            analyzer: SpectralAnalyzer::new(frame_length),
            mfcc: MfccExtractor::new(sample_rate),
            plp: RastaPlp::new(sample_rate),
            ams: AmsExtractor::new(sample_rate, sample_rate as f64 / shift),
        }
    }

    pub fn analyzer(&self) -> &SpectralAnalyzer {
        &self.analyzer
    }

    /// Unnormalized 273-dim rows, one per frame.
    pub fn extract(&self, utterance: &AudioSignal) -> Result<FeatureMatrix> {
        if utterance.sample_rate != self.sample_rate {
            return Err(Error::SampleRateMismatch(self.sample_rate, utterance.sample_rate));
        }
        let frames = frame_signal(utterance)?;
        if frames.len() < MIN_FRAMES {
            return Err(Error::SignalTooShort {
                len: utterance.len(),
                required: (MIN_FRAMES - 1) * frames.frame_shift + frames.frame_length,
            });
        }
        let mags: Vec<Vec<f64>> = frames.frames.iter().map(|f| self.analyzer.magnitude(f)).collect();
        let pitch: Vec<f64> = frames
            .frames
            .iter()
            .map(|f| pitch::extract_pitch(f, self.sample_rate))
            .collect();
        let dft: Vec<Vec<f64>> = mags.iter().map(|m| dft::dft_bands(m)).collect();
        let mfcc: Vec<Vec<f64>> = mags.iter().map(|m| self.mfcc.from_magnitude(m)).collect();
        let lpc: Vec<Vec<f64>> = frames.frames.iter().map(|f| lpc::extract_lpc(f)).collect();
        let plp = self.plp.extract(&mags)?;
        let ams = self.ams.extract(&mags)?;
        let dft8 = window_aggregate(&dft, 8);
        let dft16 = window_aggregate(&dft, 16);
        let mfcc8 = window_aggregate(&mfcc, 8);
        let mfcc16 = window_aggregate(&mfcc, 16);

        let mut values = Array2::zeros((frames.len(), FEATURE_DIM));
        for (t, mut row) in values.rows_mut().into_iter().enumerate() {
            let parts: [&[f64]; 10] = [
                std::slice::from_ref(&pitch[t]),
                &dft[t],
                &dft8[t],
                &dft16[t],
                &mfcc[t],
                &mfcc8[t],
                &mfcc16[t],
                &lpc[t],
                &plp[t],
                &ams[t],
            ];
            let mut col = 0;
            for p in parts {
                for v in p {
                    row[col] = *v;
                    col += 1;
                }
            }
            debug_assert_eq!(col, FEATURE_DIM);
        }
        Ok(FeatureMatrix::unlabeled(values))
    }
}

/// Convenience wrapper building an extractor for the utterance's rate.
pub fn extract_all(utterance: &AudioSignal) -> Result<FeatureMatrix> {
    FeatureExtractor::new(utterance.sample_rate).extract(utterance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SAMPLE_RATE;
    use proptest::prelude::*;

    fn test_utterance(n: usize) -> AudioSignal {
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / 8000.0;
                let env = (2.0 * std::f64::consts::PI * 3.0 * t).sin().abs();
                env * 0.5 * (2.0 * std::f64::consts::PI * 180.0 * t).sin()
                    + 0.01 * (((i * 7919) % 211) as f64 / 105.0 - 1.0)
            })
            .collect();
        AudioSignal::new(s, SAMPLE_RATE)
    }

    #[test]
    fn layout_adds_up() {
        assert_eq!(LAYOUT.iter().map(|b| b.1).sum::<usize>(), FEATURE_DIM);
        assert_eq!(block_range("pitch"), Some(0..1));
        assert_eq!(block_range("ams"), Some(138..273));
        assert_eq!(block_range("nope"), None);
    }

    #[test]
    fn one_second_gives_98_rows() {
        let m = extract_all(&test_utterance(8000)).unwrap();
        assert_eq!(m.rows(), 98);
        assert_eq!(m.dim(), 273);
        assert!(m.values.iter().all(|v| v.is_finite()));
        let again = extract_all(&test_utterance(8000)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn windowed_blocks_are_means_of_base() {
        let m = extract_all(&test_utterance(8000)).unwrap();
        let dft = block_range("dft").unwrap();
        let dft8 = block_range("dft8").unwrap();
        let t = 50;
        for j in 0..16 {
            let mean: f64 = (t - 4..=t + 4).map(|s| m.values[[s, dft.start + j]]).sum::<f64>() / 9.0;
            assert!((m.values[[t, dft8.start + j]] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn short_utterance_rejected() {
        assert!(extract_all(&test_utterance(2000)).is_err());
    }

    #[test]
    fn aggregate_cases() {
        let base: Vec<Vec<f64>> = (0..20).map(|t| vec![t as f64, (t * t) as f64]).collect();
        assert_eq!(window_aggregate(&base, 1), base);
        let constant = vec![vec![2.5, -1.0]; 20];
        assert_eq!(window_aggregate(&constant, 16), constant);
        let agg = window_aggregate(&base, 8);
        let brute: f64 = (6..=14).map(|s| (s * s) as f64).sum::<f64>() / 9.0;
        assert!((agg[10][1] - brute).abs() < 1e-12);
        // edge frame: t = 0 averages frames 0..=4
        assert!((agg[0][0] - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn aggregate_is_linear(
            xs in proptest::collection::vec(-10.0f64..10.0, 30),
            ys in proptest::collection::vec(-10.0f64..10.0, 30),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            w in prop_oneof![Just(8usize), Just(16usize)],
        ) {
            let x: Vec<Vec<f64>> = xs.chunks(3).map(|c| c.to_vec()).collect();
            let y: Vec<Vec<f64>> = ys.chunks(3).map(|c| c.to_vec()).collect();
            let combo: Vec<Vec<f64>> = x.iter().zip(&y)
                .map(|(p, q)| p.iter().zip(q).map(|(u, v)| a * u + b * v).collect())
                .collect();
            let lhs = window_aggregate(&combo, w);
            let (ax, ay) = (window_aggregate(&x, w), window_aggregate(&y, w));
            for t in 0..lhs.len() {
                for j in 0..3 {
                    prop_assert!((lhs[t][j] - (a * ax[t][j] + b * ay[t][j])).abs() < 1e-10);
                }
            }
        }
    }
}
