//! Generated stand-ins for clean speech and environmental noise.
//!
//! Speech surrogates are voiced tone bursts (a slowly drifting harmonic series
//! shaped by two formant bumps) interleaved with silence and occasional
//! fricative-like noise bursts. A small dither keeps pauses from being
//! digitally silent.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::mix_seed;
use crate::signal::AudioSignal;

pub const DITHER: f64 = 1e-4;

fn gaussian(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    Normal::new(0.0, sd).unwrap().sample(rng)
}

fn raised_cosine_envelope(n: usize, ramp: usize) -> impl Fn(usize) -> f64 {
    let ramp = ramp.min(n / 2).max(1);
    move |i| {
        let edge = i.min(n - 1 - i);
        if edge >= ramp {
            1.0
        } else {
            0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
        }
    }
}

fn voiced_burst(rng: &mut ChaCha8Rng, samples: &mut [f64], rate: f64) {
    let n = samples.len();
    let f0 = rng.random_range(90.0..250.0);
    let drift = rng.random_range(-0.25..0.25);
    let f1 = rng.random_range(300.0..900.0);
    let f2 = rng.random_range(900.0..2500.0);
    let amp = rng.random_range(0.08..0.35);
    let env = raised_cosine_envelope(n, (0.015 * rate) as usize);
    let harmonics = ((0.45 * rate) / f0) as usize;
    let weights: Vec<f64> = (1..=harmonics)
        .map(|h| {
            let f = h as f64 * f0;
            let bump = |c: f64, bw: f64| (-((f - c) / bw).powi(2)).exp();
            (bump(f1, 180.0) + 0.6 * bump(f2, 250.0) + 0.05) / (h as f64).sqrt()
        })
        .collect();
    let norm: f64 = weights.iter().sum::<f64>().max(1e-9);
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut phase0 = 0.0;
    for (i, s) in samples.iter_mut().enumerate() {
        let progress = i as f64 / n as f64;
        let f = f0 * (1.0 + drift * (progress - 0.5));
        phase0 += 2.0 * PI * f / rate;
        let v: f64 = weights
            .iter()
            .zip(&phases)
            .enumerate()
            .map(|(h, (w, p))| w * ((h + 1) as f64 * phase0 + p).sin())
            .sum();
        *s += amp * env(i) * v / norm;
    }
}

fn fricative_burst(rng: &mut ChaCha8Rng, samples: &mut [f64], rate: f64) {
    let n = samples.len();
    let amp = rng.random_range(0.02..0.08);
    let env = raised_cosine_envelope(n, (0.01 * rate) as usize);
    let mut prev = 0.0;
    for (i, s) in samples.iter_mut().enumerate() {
        let w = gaussian(rng, 1.0);
        // first difference tilts the spectrum upward
        *s += amp * env(i) * (w - prev);
        prev = w;
    }
}

/// One surrogate utterance of exactly `len` samples.
pub fn surrogate_utterance(len: usize, sample_rate: u32, seed: u64) -> AudioSignal {
    let rate = sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; len];
    let ms = |v: f64| (v * rate / 1000.0) as usize;
    let mut pos = ms(rng.random_range(80.0..250.0));
    let tail = ms(100.0);
    while pos + ms(60.0) + tail < len {
        let dur = ms(rng.random_range(80.0..300.0)).min(len - tail - pos);
        if rng.random_bool(0.2) {
            fricative_burst(&mut rng, &mut x[pos..pos + dur], rate);
        } else {
            voiced_burst(&mut rng, &mut x[pos..pos + dur], rate);
        }
        pos += dur + ms(rng.random_range(50.0..350.0));
    }
    for s in x.iter_mut() {
        *s += gaussian(&mut rng, DITHER);
    }
    AudioSignal::new(x, sample_rate)
}

/// `count` surrogate utterances of `duration_s` each, with ids `u0000`, ...
pub fn surrogate_clean_pool(count: usize, duration_s: f64, sample_rate: u32, seed: u64) -> Vec<(String, AudioSignal)> {
    let len = (duration_s * sample_rate as f64).round() as usize;
    (0..count)
        .map(|i| (format!("u{i:04}"), surrogate_utterance(len, sample_rate, mix_seed(seed, i as u64))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
    Brown,
    /// Several overlapping surrogate talkers.
    Babble,
    /// Low-frequency rumble with an engine-like harmonic line.
    Car,
    /// Narrow band of noise around a centre frequency in Hz.
    Band(f64),
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::White => f.write_str("white"),
            NoiseKind::Pink => f.write_str("pink"),
            NoiseKind::Brown => f.write_str("brown"),
            NoiseKind::Babble => f.write_str("babble"),
            NoiseKind::Car => f.write_str("car"),
            NoiseKind::Band(c) => write!(f, "band:{c}"),
        }
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "white" => Ok(NoiseKind::White),
            "pink" => Ok(NoiseKind::Pink),
            "brown" => Ok(NoiseKind::Brown),
            "babble" => Ok(NoiseKind::Babble),
            "car" => Ok(NoiseKind::Car),
            _ => match lower.strip_prefix("band:").and_then(|c| c.parse::<f64>().ok()) {
                Some(c) if c > 0.0 => Ok(NoiseKind::Band(c)),
                _ => Err(Error::InvalidConfig(format!(
                    "unknown noise kind '{s}' (white, pink, brown, babble, car, band:<hz>)"
                ))),
            },
        }
    }
}

/// A noise recording of `duration_s`, peak-normalized to 0.5.
pub fn generate_noise(kind: NoiseKind, duration_s: f64, sample_rate: u32, seed: u64) -> AudioSignal {
    let rate = sample_rate as f64;
    let len = (duration_s * rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = match kind {
        NoiseKind::White => (0..len).map(|_| gaussian(&mut rng, 1.0)).collect(),
        NoiseKind::Pink => {
            // Paul Kellet's economy pink filter
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            (0..len)
                .map(|_| {
                    let w = gaussian(&mut rng, 1.0);
                    b0 = 0.99765 * b0 + w * 0.0990460;
                    b1 = 0.96300 * b1 + w * 0.2965164;
                    b2 = 0.57000 * b2 + w * 1.0526913;
                    b0 + b1 + b2 + w * 0.1848
                })
                .collect()
        }
        NoiseKind::Brown => {
            let mut acc = 0.0;
            (0..len)
                .map(|_| {
                    acc = 0.995 * acc + gaussian(&mut rng, 1.0);
                    acc
                })
                .collect()
        }
        NoiseKind::Babble => {
            let mut sum = vec![0.0; len];
            for talker in 0..6u64 {
                let voice = surrogate_utterance(len, sample_rate, mix_seed(seed, 100 + talker));
                for (s, v) in sum.iter_mut().zip(&voice.samples) {
                    *s += v;
                }
            }
            sum
        }
        NoiseKind::Car => {
            let mut acc = 0.0;
            let f = rng.random_range(25.0..45.0);
            (0..len)
                .map(|i| {
                    acc = 0.98 * acc + gaussian(&mut rng, 1.0);
                    let t = i as f64 / rate;
                    acc + 3.0 * (2.0 * PI * f * t).sin() + 1.5 * (4.0 * PI * f * t).sin()
                })
                .collect()
        }
        NoiseKind::Band(centre) => {
            // two-pole resonator
            let r = 0.97f64;
            let theta = 2.0 * PI * centre.min(rate / 2.0 - 1.0) / rate;
            let (a1, a2) = (2.0 * r * theta.cos(), -r * r);
            let (mut y1, mut y2) = (0.0, 0.0);
            (0..len)
                .map(|_| {
                    let y = gaussian(&mut rng, 1.0) + a1 * y1 + a2 * y2;
                    y2 = y1;
                    y1 = y;
                    y
                })
                .collect()
        }
    };
    let mean = x.iter().sum::<f64>() / len.max(1) as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    AudioSignal::new(x, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{frame_labels_from_clean, Label, LABEL_THRESHOLD_DB};

    #[test]
    fn utterances_mix_speech_and_pauses() {
        for seed in 0..10 {
            let u = surrogate_utterance(8000, 8000, seed);
            assert_eq!(u.len(), 8000);
            assert!(u.samples.iter().all(|v| v.abs() < 1.0));
            let labels = frame_labels_from_clean(&u, LABEL_THRESHOLD_DB).unwrap();
            let speech = labels.iter().filter(|&&l| l == Label::Speech).count();
            assert!(speech > 10 && speech < labels.len() - 10, "seed {seed}: {speech}");
            // leading pause is non-speech
            assert_eq!(labels[0], Label::NonSpeech);
        }
    }

    #[test]
    fn deterministic_and_distinct() {
        assert_eq!(surrogate_utterance(4000, 8000, 3), surrogate_utterance(4000, 8000, 3));
        assert_ne!(surrogate_utterance(4000, 8000, 3), surrogate_utterance(4000, 8000, 4));
        let pool = surrogate_clean_pool(3, 0.5, 8000, 1);
        assert_eq!(pool[2].0, "u0002");
        assert_eq!(pool[0].1.len(), 4000);
    }

    #[test]
    fn noise_kinds() {
        for kind in ["white", "pink", "brown", "babble", "car", "band:1500"] {
            let k: NoiseKind = kind.parse().unwrap();
            assert_eq!(k.to_string(), kind);
            let n = generate_noise(k, 0.5, 8000, 2);
            assert_eq!(n.len(), 4000);
            assert!(n.power() > 0.0);
            let peak = n.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((peak - 0.5).abs() < 1e-12);
        }
        assert!("purple".parse::<NoiseKind>().is_err());
        assert!("band:-3".parse::<NoiseKind>().is_err());
    }

    #[test]
    fn brown_is_darker_than_white() {
        // share of energy in the first difference: small for low-pass noise
        let hf = |s: &AudioSignal| {
            let d: f64 = s.samples.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
            d / s.samples.iter().map(|v| v * v).sum::<f64>()
        };
        let w = generate_noise(NoiseKind::White, 1.0, 8000, 1);
        let b = generate_noise(NoiseKind::Brown, 1.0, 8000, 1);
        assert!(hf(&b) < 0.2 * hf(&w));
    }
}
