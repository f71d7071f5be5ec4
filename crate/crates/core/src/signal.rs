//! Audio I/O, framing, SNR-controlled mixing and energy-based frame labels.
//!
//! Everything here works on mono signals held as `f64` samples in `[-1, 1]`.
//! The analysis framing is 25 ms windows advanced by 10 ms, which is 200/80
//! samples at the 8 kHz rate used throughout the toolkit.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 8000;
pub const FRAME_MS: u32 = 25;
pub const SHIFT_MS: u32 = 10;
/// Default relative threshold for speech labels, dB below the loudest frame.
pub const LABEL_THRESHOLD_DB: f64 = 35.0;

const PCM_SCALE: f64 = 32768.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// Samples that were clipped to `[-1, 1]` when this signal was produced.
    pub clipped: usize,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        AudioSignal {
            samples,
            sample_rate,
            clipped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean power over the whole signal.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn slice(&self, start: usize, len: usize) -> AudioSignal {
        let end = (start + len).min(self.samples.len());
        AudioSignal::new(self.samples[start.min(end)..end].to_vec(), self.sample_rate)
    }
}

/// Window geometry in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub length: usize,
    pub shift: usize,
}

impl FrameConfig {
    pub fn for_rate(sample_rate: u32) -> Self {
        FrameConfig {
            length: (sample_rate * FRAME_MS / 1000) as usize,
            shift: (sample_rate * SHIFT_MS / 1000) as usize,
        }
    }

    /// Number of whole frames in `n` samples, zero when `n` is shorter than a frame.
    pub fn frame_count(&self, n: usize) -> usize {
        if n < self.length {
            0
        } else {
            (n - self.length) / self.shift + 1
        }
    }
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig::for_rate(SAMPLE_RATE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Vec<f64>>,
    pub frame_length: usize,
    pub frame_shift: usize,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Sample index at which each frame starts.
    pub fn starts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.frames.len()).map(move |k| k * self.frame_shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    NonSpeech,
    Speech,
}

impl Label {
    pub fn is_speech(self) -> bool {
        self == Label::Speech
    }

    pub fn as_char(self) -> char {
        match self {
            Label::Speech => '1',
            Label::NonSpeech => '0',
        }
    }

    pub fn from_bool(speech: bool) -> Self {
        if speech {
            Label::Speech
        } else {
            Label::NonSpeech
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Speech => "speech",
            Label::NonSpeech => "nonspeech",
        })
    }
}

fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::MalformedWav("truncated file".into())
        }
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::FormatError(msg) => Error::MalformedWav(msg.into()),
        hound::Error::UnfinishedSample => Error::MalformedWav("unfinished sample".into()),
        hound::Error::TooWide => Error::UnsupportedEncoding("sample too wide".into()),
        hound::Error::Unsupported => Error::UnsupportedEncoding("unsupported format".into()),
        hound::Error::InvalidSampleFormat => {
            Error::UnsupportedEncoding("invalid sample format".into())
        }
    }
}

/// Reads a 16-bit PCM mono WAV file, rescaling by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let inner = || -> Result<AudioSignal> {
        let mut reader = hound::WavReader::open(path).map_err(map_hound)?;
        let spec = reader.spec();
        if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
            return Err(Error::UnsupportedEncoding(format!(
                "{:?} with {} bits per sample",
                spec.sample_format, spec.bits_per_sample
            )));
        }
        if spec.channels != 1 {
            return Err(Error::MultiChannel(spec.channels));
        }
        let samples = reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM_SCALE).map_err(map_hound))
            .collect::<Result<Vec<_>>>()?;
        Ok(AudioSignal::new(samples, spec.sample_rate))
    };
    inner().map_err(|e| e.at(path))
}

/// Writes a 16-bit PCM mono WAV file. Samples outside `[-1, 1)` saturate.
pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let inner = || -> Result<()> {
        let mut writer = hound::WavWriter::create(path, spec).map_err(map_hound)?;
        for &s in &signal.samples {
            let v = (s * PCM_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
            writer.write_sample(v).map_err(map_hound)?;
        }
        writer.finalize().map_err(map_hound)
    };
    inner().map_err(|e| e.at(path))
}

/// Splits a signal into 25 ms frames with a 10 ms shift; the ragged tail is dropped.
pub fn frame_signal(signal: &AudioSignal) -> Result<FrameSequence> {
    let cfg = FrameConfig::for_rate(signal.sample_rate);
    frame_with(&signal.samples, cfg)
}

pub fn frame_with(samples: &[f64], cfg: FrameConfig) -> Result<FrameSequence> {
    let count = cfg.frame_count(samples.len());
    if count == 0 {
        return Err(Error::SignalTooShort {
            len: samples.len(),
            required: cfg.length,
        });
    }
    let frames = (0..count)
        .map(|k| samples[k * cfg.shift..k * cfg.shift + cfg.length].to_vec())
        .collect();
    Ok(FrameSequence {
        frames,
        frame_length: cfg.length,
        frame_shift: cfg.shift,
    })
}

/// Noise of exactly `len` samples starting at `offset`, wrapping around when
/// the recording is shorter than needed.
pub fn noise_excerpt(noise: &AudioSignal, offset: usize, len: usize) -> Result<AudioSignal> {
    if noise.is_empty() {
        return Err(Error::Empty("noise signal"));
    }
    let n = noise.len();
    let samples = (0..len).map(|i| noise.samples[(offset + i) % n]).collect();
    Ok(AudioSignal::new(samples, noise.sample_rate))
}

/// Gain applied to `noise` so that the clean-to-noise power ratio equals
/// `snr_db`. Both powers are measured over `clean.len()` samples of the
/// (tiled or truncated) noise.
pub fn snr_gain(clean: &AudioSignal, noise: &AudioSignal, snr_db: f64) -> Result<f64> {
    let fitted = noise_excerpt(noise, 0, clean.len())?;
    let p_clean = clean.power();
    let p_noise = fitted.power();
    if p_clean <= 0.0 {
        return Err(Error::SilentSignal("clean"));
    }
    if p_noise <= 0.0 {
        return Err(Error::SilentSignal("noise"));
    }
    Ok((p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// Returns `clean + g * noise` at the requested SNR, clipped to `[-1, 1]`.
pub fn mix_at_snr(clean: &AudioSignal, noise: &AudioSignal, snr_db: f64) -> Result<AudioSignal> {
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::SampleRateMismatch(clean.sample_rate, noise.sample_rate));
    }
    let gain = snr_gain(clean, noise, snr_db)?;
    let fitted = noise_excerpt(noise, 0, clean.len())?;
    let mut clipped = 0;
    let samples = clean
        .samples
        .iter()
        .zip(&fitted.samples)
        .map(|(c, n)| {
            let v = c + gain * n;
            if v.abs() > 1.0 {
                clipped += 1;
                v.clamp(-1.0, 1.0)
            } else {
                v
            }
        })
        .collect();
    Ok(AudioSignal {
        samples,
        sample_rate: clean.sample_rate,
        clipped,
    })
}

/// Ground-truth labels from the clean signal: a frame is speech when its
/// log-energy lies within `energy_threshold_db` of the loudest frame.
/// Frames with zero energy are never speech.
pub fn frame_labels_from_clean(clean: &AudioSignal, energy_threshold_db: f64) -> Result<Vec<Label>> {
    let frames = frame_signal(clean)?;
    let energies: Vec<f64> = frames
        .frames
        .iter()
        .map(|f| f.iter().map(|v| v * v).sum::<f64>())
        .collect();
    let max_db = energies
        .iter()
        .filter(|&&e| e > 0.0)
        .map(|e| 10.0 * e.log10())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(energies
        .iter()
        .map(|&e| Label::from_bool(e > 0.0 && 10.0 * e.log10() > max_db - energy_threshold_db))
        .collect())
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[Label]) -> Result<()> {
    let path = path.as_ref();
    let mut line: String = labels.iter().map(|l| l.as_char()).collect();
    line.push('\n');
    let mut f = fs::File::create(path).map_err(|e| Error::Io(e).at(path))?;
    f.write_all(line.as_bytes()).map_err(|e| Error::Io(e).at(path))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<Label>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::Io(e).at(path))?;
    let mut line = String::new();
    BufReader::new(f)
        .read_line(&mut line)
        .map_err(|e| Error::Io(e).at(path))?;
    line.trim_end_matches(['\n', '\r'])
        .chars()
        .map(|c| match c {
            '1' => Ok(Label::Speech),
            '0' => Ok(Label::NonSpeech),
            other => Err(Error::Format(format!("unexpected label character {other:?}")).at(path)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amp: f64, n: usize) -> AudioSignal {
        let s = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 8000.0).sin())
            .collect();
        AudioSignal::new(s, SAMPLE_RATE)
    }

    #[test]
    fn frame_counts() {
        let cfg = FrameConfig::default();
        assert_eq!((cfg.length, cfg.shift), (200, 80));
        let sig = AudioSignal::new(vec![0.0; 8000], SAMPLE_RATE);
        // floor((8000 - 200) / 80) + 1
        assert_eq!(frame_signal(&sig).unwrap().len(), (8000 - 200) / 80 + 1);
        assert_eq!(frame_signal(&sig).unwrap().len(), 98);
        let one = AudioSignal::new(vec![0.0; 200], SAMPLE_RATE);
        assert_eq!(frame_signal(&one).unwrap().len(), 1);
        let short = AudioSignal::new(vec![0.0; 199], SAMPLE_RATE);
        assert!(matches!(
            frame_signal(&short),
            Err(Error::SignalTooShort { len: 199, required: 200 })
        ));
    }

    #[test]
    fn frame_starts_increase_by_shift() {
        let sig = AudioSignal::new((0..1234).map(|i| i as f64 / 2000.0).collect(), SAMPLE_RATE);
        let frames = frame_signal(&sig).unwrap();
        let starts: Vec<usize> = frames.starts().collect();
        for w in starts.windows(2) {
            assert_eq!(w[1] - w[0], 80);
        }
        for (k, f) in frames.frames.iter().enumerate() {
            assert_eq!(f.len(), 200);
            assert_eq!(f[0], sig.samples[starts[k]]);
        }
    }

    #[test]
    fn gain_closed_forms() {
        let clean = tone(300.0, 0.3, 4000);
        let noise = tone(300.0, 0.3, 4000);
        assert!((snr_gain(&clean, &noise, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let g5 = snr_gain(&clean, &noise, 5.0).unwrap();
        assert!((g5 - 10f64.powf(-5.0 / 20.0)).abs() < 1e-12);
        assert!((g5 - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn measured_snr_matches_request() {
        let clean = tone(440.0, 0.2, 8000);
        let noise_samples: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect();
        let noise = AudioSignal::new(noise_samples, SAMPLE_RATE);
        for snr in [-5.0, 0.0, 5.0, 20.0] {
            let g = snr_gain(&clean, &noise, snr).unwrap();
            let fitted = noise_excerpt(&noise, 0, clean.len()).unwrap();
            let pn: f64 = fitted.samples.iter().map(|v| (g * v).powi(2)).sum::<f64>() / 8000.0;
            let measured = 10.0 * (clean.power() / pn).log10();
            assert!((measured - snr).abs() < 0.01, "{measured} vs {snr}");
        }
    }

    #[test]
    fn noise_scaling_is_absorbed() {
        let clean = tone(250.0, 0.1, 2000);
        let noise = AudioSignal::new((0..2500).map(|i| ((i as f64) * 0.37).sin() * 0.05).collect(), SAMPLE_RATE);
        let scaled = AudioSignal::new(noise.samples.iter().map(|v| v * 7.5).collect(), SAMPLE_RATE);
        let a = mix_at_snr(&clean, &noise, 5.0).unwrap();
        let b = mix_at_snr(&clean, &scaled, 5.0).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn short_noise_is_tiled_and_output_clipped() {
        let clean = tone(100.0, 0.99, 1000);
        let noise = AudioSignal::new(vec![0.5, -0.5, 0.25], SAMPLE_RATE);
        let mixed = mix_at_snr(&clean, &noise, -10.0).unwrap();
        assert_eq!(mixed.len(), 1000);
        assert!(mixed.clipped > 0);
        assert!(mixed.samples.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn silent_inputs_rejected() {
        let clean = tone(100.0, 0.5, 400);
        let zero = AudioSignal::new(vec![0.0; 400], SAMPLE_RATE);
        assert!(matches!(mix_at_snr(&zero, &clean, 5.0), Err(Error::SilentSignal("clean"))));
        assert!(matches!(mix_at_snr(&clean, &zero, 5.0), Err(Error::SilentSignal("noise"))));
        let other_rate = AudioSignal::new(vec![0.1; 400], 16000);
        assert!(matches!(
            mix_at_snr(&clean, &other_rate, 5.0),
            Err(Error::SampleRateMismatch(8000, 16000))
        ));
    }

    #[test]
    fn labels_follow_energy() {
        let silence = AudioSignal::new(vec![0.0; 8000], SAMPLE_RATE);
        let labels = frame_labels_from_clean(&silence, 30.0).unwrap();
        assert_eq!(labels.len(), 98);
        assert!(labels.iter().all(|l| !l.is_speech()));

        // 800 samples of tone, 800 of silence, repeated: frames wholly inside a
        // tone block are speech, frames wholly inside silence are not.
        let mut s = Vec::new();
        for block in 0..10 {
            let on = block % 2 == 0;
            for i in 0..800 {
                let t = (block * 800 + i) as f64 / 8000.0;
                s.push(if on { 0.99 * (2.0 * std::f64::consts::PI * 500.0 * t).sin() } else { 0.0 });
            }
        }
        let sig = AudioSignal::new(s.clone(), SAMPLE_RATE);
        let labels = frame_labels_from_clean(&sig, 30.0).unwrap();
        let frames = frame_signal(&sig).unwrap();
        let energies: Vec<f64> = frames.frames.iter().map(|f| f.iter().map(|v| v * v).sum()).collect();
        let max = energies.iter().cloned().fold(0.0, f64::max);
        for (k, start) in frames.starts().enumerate() {
            let expected = energies[k] > 0.0 && 10.0 * (energies[k] / max).log10() > -30.0;
            assert_eq!(labels[k].is_speech(), expected);
            let block_start = (start / 800) * 800;
            if start + 200 <= block_start + 800 {
                assert_eq!(labels[k].is_speech(), (start / 800) % 2 == 0, "frame {k}");
            }
        }
    }

    #[test]
    fn labels_invariant_to_scale() {
        let sig = AudioSignal::new((0..4000).map(|i| ((i as f64) * 0.01).sin().powi(3) * 0.3).collect(), SAMPLE_RATE);
        let louder = AudioSignal::new(sig.samples.iter().map(|v| v * 3.0).collect(), SAMPLE_RATE);
        assert_eq!(
            frame_labels_from_clean(&sig, 20.0).unwrap(),
            frame_labels_from_clean(&louder, 20.0).unwrap()
        );
    }

    #[test]
    fn wav_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zeros.wav");
        write_wav(&path, &AudioSignal::new(vec![0.0; 8000], SAMPLE_RATE)).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.len(), 8000);
        assert_eq!(back.sample_rate, 8000);
        assert!(back.samples.iter().all(|&v| v == 0.0));

        let path = dir.path().join("max.wav");
        let spec = hound::WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(32767i16).unwrap();
        w.finalize().unwrap();
        assert_eq!(read_wav(&path).unwrap().samples[0], 32767.0 / 32768.0);

        let path = dir.path().join("stereo.wav");
        let mut w = hound::WavWriter::create(&path, hound::WavSpec { channels: 2, ..spec }).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path), Err(Error::File { source, .. }) if matches!(*source, Error::MultiChannel(2))));

        let path = dir.path().join("float.wav");
        let fspec = hound::WavSpec { bits_per_sample: 32, sample_format: hound::SampleFormat::Float, ..spec };
        let mut w = hound::WavWriter::create(&path, fspec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path), Err(Error::File { source, .. }) if matches!(*source, Error::UnsupportedEncoding(_))));

        let path = dir.path().join("junk.wav");
        fs::write(&path, b"RIFX\x00\x00not a wave file at all").unwrap();
        assert!(matches!(read_wav(&path), Err(Error::File { source, .. }) if matches!(*source, Error::MalformedWav(_))));
    }

    #[test]
    fn label_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.txt");
        let labels = vec![Label::Speech, Label::NonSpeech, Label::Speech];
        write_labels(&path, &labels).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "101\n");
        assert_eq!(read_labels(&path).unwrap(), labels);
    }
}
