//! Acoustic frontend: framing, log mel-filterbank energies (LFBE) and
//! three-frame context stacking, plus WAV and feature-file I/O.
//!
//! Defaults: 25 ms Hamming window, 10 ms hop, 512-point FFT, 40 triangular
//! filters on the HTK mel scale spanning 0 Hz to Nyquist, natural log of
//! `max(energy, 1e-10)`. No pre-emphasis.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const SUPPORTED_SAMPLE_RATES: [u32; 2] = [8000, 16000];
pub const CONTEXT_FRAMES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AudioConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub energy_floor: f64,
    /// Recorded for auditability; must stay off.
    pub pre_emphasis: bool,
}

impl Default for AudioConfig {
    fn default() -> Self {
        AudioConfig {
            window_ms: 25.0,
            hop_ms: 10.0,
            n_fft: 512,
            n_mels: 40,
            energy_floor: 1e-10,
            pre_emphasis: false,
        }
    }
}

impl AudioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pre_emphasis {
            return Err(Error::InvalidArgument("pre-emphasis is not supported".into()));
        }
        if !(self.window_ms > 0.0 && self.hop_ms > 0.0) {
            return Err(Error::InvalidArgument("window and hop must be positive".into()));
        }
        if self.n_mels == 0 || !(self.energy_floor > 0.0) {
            return Err(Error::InvalidArgument("n_mels and energy_floor must be positive".into()));
        }
        Ok(())
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    /// Stacked feature width (`3 * n_mels`).
    pub fn feature_dim(&self) -> usize {
        CONTEXT_FRAMES * self.n_mels
    }
}

fn check_rate(sample_rate: u32) -> Result<()> {
    if SUPPORTED_SAMPLE_RATES.contains(&sample_rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "unsupported sample rate {sample_rate} Hz (expected 8000 or 16000)"
        )))
    }
}

pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Splits into `floor((N - W) / H) + 1` Hamming-windowed frames, one per row.
pub fn frame_signal(samples: &[f64], sample_rate: u32, config: &AudioConfig) -> Result<Matrix> {
    check_rate(sample_rate)?;
    let win = config.window_samples(sample_rate);
    let hop = config.hop_samples(sample_rate);
    if samples.len() < win {
        return Err(Error::InvalidArgument(format!(
            "signal of {} samples is shorter than one {win}-sample window",
            samples.len()
        )));
    }
    let count = (samples.len() - win) / hop + 1;
    let window = hamming(win);
    let mut frames = Matrix::zeros(count, win);
    for t in 0..count {
        let src = &samples[t * hop..t * hop + win];
        for ((dst, &s), &w) in frames.row_mut(t).iter_mut().zip(src).zip(&window) {
            *dst = s * w;
        }
    }
    Ok(frames)
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over the `n_fft / 2 + 1` power-spectrum bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// Row-major `n_mels x n_bins`.
    weights: Vec<f64>,
    n_bins: usize,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let n_bins = n_fft / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let (lo, hi) = (hz_to_mel(0.0), hz_to_mel(nyquist));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * sample_rate as f64 / n_fft as f64;
                let w = if f >= left && f <= center {
                    (f - left) / (center - left)
                } else if f > center && f <= right {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
                weights[m * n_bins + k] = w;
            }
        }
        MelFilterbank {
            weights,
            n_bins,
            centers_hz: edges[1..=n_mels].to_vec(),
        }
    }

    pub fn n_mels(&self) -> usize {
        self.centers_hz.len()
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn filter(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            *o = self.filter(m).iter().zip(power).map(|(w, p)| w * p).sum();
        }
    }
}

/// Per-frame natural-log mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct LfbeMatrix {
    pub frames: Matrix,
    pub frame_hop_ms: f64,
    pub sample_rate: u32,
}

/// Per-frame `[f(t-1) | f(t) | f(t+1)]` with edge replication.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedFeatures {
    pub frames: Matrix,
}

/// Reusable FFT plan and filterbank for one sample rate.
#[derive(Clone)]
pub struct LfbeExtractor {
    config: AudioConfig,
    sample_rate: u32,
    fft: Arc<dyn Fft<f64>>,
    filterbank: MelFilterbank,
}

impl std::fmt::Debug for LfbeExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LfbeExtractor")
            .field("config", &self.config)
            .field("sample_rate", &self.sample_rate)
            .finish()
    }
}

impl LfbeExtractor {
    pub fn new(config: &AudioConfig, sample_rate: u32) -> Result<Self> {
        config.validate()?;
        check_rate(sample_rate)?;
        if config.window_samples(sample_rate) > config.n_fft {
            return Err(Error::InvalidArgument(format!(
                "window of {} samples exceeds the {}-point transform",
                config.window_samples(sample_rate),
                config.n_fft
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(config.n_fft);
        Ok(LfbeExtractor {
            config: config.clone(),
            sample_rate,
            fft,
            filterbank: MelFilterbank::new(config.n_mels, config.n_fft, sample_rate),
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Power spectrum `|X_k|^2`, `k = 0..=n_fft/2`, of a zero-padded frame.
    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        let n = self.config.n_fft;
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .map(|&s| Complex::new(s, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(n)
            .collect();
        self.fft.process(&mut buf);
        buf[..n / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn compute_lfbe(&self, frames: &Matrix) -> Result<LfbeMatrix> {
        if frames.rows() == 0 {
            return Err(Error::Empty("no frames to analyse".into()));
        }
        let n_mels = self.config.n_mels;
        let floor = self.config.energy_floor;
        let mut out = Matrix::zeros(frames.rows(), n_mels);
        for t in 0..frames.rows() {
            let power = self.power_spectrum(frames.row(t));
            let row = out.row_mut(t);
            self.filterbank.apply(&power, row);
            row.iter_mut().for_each(|e| *e = e.max(floor).ln());
        }
        Ok(LfbeMatrix {
            frames: out,
            frame_hop_ms: self.config.hop_ms,
            sample_rate: self.sample_rate,
        })
    }

    /// Samples to stacked `T x 3*n_mels` features.
    pub fn extract(&self, samples: &[f64]) -> Result<StackedFeatures> {
        let frames = frame_signal(samples, self.sample_rate, &self.config)?;
        Ok(stack_context(&self.compute_lfbe(&frames)?))
    }
}

/// One-shot convenience wrapper around [`LfbeExtractor::compute_lfbe`].
pub fn compute_lfbe(frames: &Matrix, sample_rate: u32, config: &AudioConfig) -> Result<LfbeMatrix> {
    LfbeExtractor::new(config, sample_rate)?.compute_lfbe(frames)
}

pub fn stack_context(lfbe: &LfbeMatrix) -> StackedFeatures {
    let src = &lfbe.frames;
    let (steps, width) = (src.rows(), src.cols());
    let mut out = Matrix::zeros(steps, CONTEXT_FRAMES * width);
    for t in 0..steps {
        let prev = t.saturating_sub(1);
        let next = (t + 1).min(steps - 1);
        let row = out.row_mut(t);
        row[..width].copy_from_slice(src.row(prev));
        row[width..2 * width].copy_from_slice(src.row(t));
        row[2 * width..].copy_from_slice(src.row(next));
    }
    StackedFeatures { frames: out }
}

/// Reads 16-bit PCM mono WAV, scaled to [-1, 1).
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let reader = hound::WavReader::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::format(path, "expected 16-bit PCM mono"));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok((samples, spec.sample_rate))
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| Error::format(path, e.to_string()))?;
    for &s in samples {
        let v = (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.finalize().map_err(|e| Error::format(path, e.to_string()))
}

/// Feature file: little-endian header then row-major f64 data.
///
/// ```text
/// magic "CSFEAT01" | rows u32 | cols u32 | dtype u32 (1 = f64) | hop_ms f64 | sample_rate u32
/// ```
pub const FEATURE_MAGIC: &[u8; 8] = b"CSFEAT01";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub frames: Matrix,
    pub hop_ms: f64,
    pub sample_rate: u32,
}

impl FeatureFile {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        w.write_u32::<LittleEndian>(self.frames.rows() as u32)?;
        w.write_u32::<LittleEndian>(self.frames.cols() as u32)?;
        w.write_u32::<LittleEndian>(1)?;
        w.write_f64::<LittleEndian>(self.hop_ms)?;
        w.write_u32::<LittleEndian>(self.sample_rate)?;
        for &v in self.frames.as_slice() {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> std::result::Result<Self, String> {
        let io = |e: std::io::Error| e.to_string();
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != FEATURE_MAGIC {
            return Err("bad magic; not a feature file".into());
        }
        let rows = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let cols = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let dtype = r.read_u32::<LittleEndian>().map_err(io)?;
        if dtype != 1 {
            return Err(format!("unsupported dtype code {dtype}"));
        }
        let hop_ms = r.read_f64::<LittleEndian>().map_err(io)?;
        let sample_rate = r.read_u32::<LittleEndian>().map_err(io)?;
        let mut data = vec![0.0; rows * cols];
        r.read_f64_into::<LittleEndian>(&mut data).map_err(io)?;
        let frames = Matrix::from_vec(rows, cols, data).map_err(|e| e.to_string())?;
        Ok(FeatureFile {
            frames,
            hop_ms,
            sample_rate,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        FeatureFile::read_from(BufReader::new(f)).map_err(|m| Error::format(path, m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, sr: u32, seconds: f64, amp: f64) -> Vec<f64> {
        let n = (sr as f64 * seconds) as usize;
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
            .collect()
    }

    #[test]
    fn frame_counts() {
        let cfg = AudioConfig::default();
        let one_second = vec![0.1; 16000];
        assert_eq!(frame_signal(&one_second, 16000, &cfg).unwrap().rows(), 98);
        assert_eq!(frame_signal(&vec![0.0; 400], 16000, &cfg).unwrap().rows(), 1);
        assert_eq!(frame_signal(&vec![0.0; 8000], 8000, &cfg).unwrap().rows(), 98);
        assert!(frame_signal(&vec![0.0; 399], 16000, &cfg).is_err());
        assert!(frame_signal(&vec![0.0; 4000], 44100, &cfg).is_err());
    }

    #[test]
    fn silent_frames_hit_the_floor() {
        let cfg = AudioConfig::default();
        let frames = frame_signal(&vec![0.0; 800], 16000, &cfg).unwrap();
        assert!(frames.as_slice().iter().all(|&v| v == 0.0));
        let lfbe = compute_lfbe(&frames, 16000, &cfg).unwrap();
        let floor = 1e-10f64.ln();
        assert!(lfbe.frames.as_slice().iter().all(|&v| v == floor));
    }

    #[test]
    fn scaling_the_signal_shifts_log_energy() {
        let cfg = AudioConfig::default();
        let x = tone(440.0, 16000, 0.1, 0.2);
        let scaled: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let ex = LfbeExtractor::new(&cfg, 16000).unwrap();
        let a = ex.compute_lfbe(&frame_signal(&x, 16000, &cfg).unwrap()).unwrap();
        let b = ex.compute_lfbe(&frame_signal(&scaled, 16000, &cfg).unwrap()).unwrap();
        let floor = cfg.energy_floor.ln();
        for (u, v) in a.frames.as_slice().iter().zip(b.frames.as_slice()) {
            if *u > floor + 1.0 {
                assert!((v - u - 2.0 * 3f64.ln()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stacking_replicates_edges() {
        let one = LfbeMatrix {
            frames: Matrix::from_rows(&[[1.0, 2.0]]).unwrap(),
            frame_hop_ms: 10.0,
            sample_rate: 16000,
        };
        assert_eq!(stack_context(&one).frames.row(0), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);

        let three = LfbeMatrix {
            frames: Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap(),
            ..one.clone()
        };
        let s = stack_context(&three).frames;
        assert_eq!(s.row(0), &[0.0, 0.0, 1.0]);
        assert_eq!(s.row(1), &[0.0, 1.0, 2.0]);
        assert_eq!(s.row(2), &[1.0, 2.0, 2.0]);
    }

    #[test]
    fn one_second_gives_98_by_120() {
        let ex = LfbeExtractor::new(&AudioConfig::default(), 16000).unwrap();
        let feats = ex.extract(&tone(300.0, 16000, 1.0, 0.5)).unwrap();
        assert_eq!((feats.frames.rows(), feats.frames.cols()), (98, 120));
    }

    #[test]
    fn extraction_is_repeatable() {
        let ex = LfbeExtractor::new(&AudioConfig::default(), 8000).unwrap();
        let x = tone(700.0, 8000, 0.3, 0.4);
        assert_eq!(ex.extract(&x).unwrap(), ex.extract(&x).unwrap());
    }

    #[test]
    fn wav_and_feature_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let wav = dir.path().join("t.wav");
        let x = tone(500.0, 16000, 0.05, 0.5);
        write_wav(&wav, &x, 16000).unwrap();
        let (back, sr) = read_wav(&wav).unwrap();
        assert_eq!(sr, 16000);
        assert_eq!(back.len(), x.len());
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-4));

        let ff = FeatureFile {
            frames: Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap(),
            hop_ms: 10.0,
            sample_rate: 16000,
        };
        let path = dir.path().join("f.feat");
        ff.save(&path).unwrap();
        assert_eq!(FeatureFile::load(&path).unwrap(), ff);
    }

    #[test]
    fn pre_emphasis_is_refused() {
        let cfg = AudioConfig {
            pre_emphasis: true,
            ..Default::default()
        };
        assert!(LfbeExtractor::new(&cfg, 16000).is_err());
    }
}
