//! Deterministic signal-processing frontend/backend.
//!
//! STFT analysis, mel and log-magnitude feature extraction and Griffin-Lim
//! waveform reconstruction. All operations are pure: identical inputs (and
//! seed, where applicable) produce identical outputs.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod griffin_lim;
mod mel;
mod stft;
pub mod wav;

pub use griffin_lim::{griffin_lim, griffin_lim_with_trace};
pub use mel::{log_magnitude, mel_band_centers, mel_filterbank, mel_spectrogram};
pub use stft::{istft, stft};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("utterance too short: {len} samples but the analysis window is {window}")]
    UtteranceTooShort { len: usize, window: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid dsp config: {0}")]
    InvalidConfig(String),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("unsupported wav format in {path}: {detail}")]
    WavFormat { path: String, detail: String },
}

/// Time-domain audio. Samples are dimensionless with nominal range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    /// Validates finiteness and a positive sample rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::InvalidConfig("sample_rate must be > 0".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFiniteSample(i));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann; satisfies COLA for hop = window/4.
    #[default]
    Hann,
    Rectangular,
}

/// Feature-extraction parameters. The paper fixes the feature kinds but not
/// their parameters, so everything here is overridable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub fft_size: usize,
    pub hop_size: usize,
    pub window_size: usize,
    pub window: WindowKind,
    pub mel_bands: usize,
    pub fmin: f64,
    pub fmax: f64,
    /// Additive floor applied before the natural log.
    pub log_floor: f64,
    pub griffin_lim_iters: usize,
    /// Zero phase init keeps Griffin-Lim deterministic without a seed;
    /// switch on to initialize from seeded uniform phases instead.
    pub random_phase_init: bool,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            hop_size: 200,
            window_size: 800,
            window: WindowKind::Hann,
            mel_bands: 80,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-5,
            griffin_lim_iters: 60,
            random_phase_init: false,
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if !self.fft_size.is_power_of_two() {
            return Err(DspError::InvalidConfig(format!(
                "fft_size {} is not a power of two",
                self.fft_size
            )));
        }
        if self.hop_size == 0 || self.hop_size > self.window_size || self.window_size > self.fft_size {
            return Err(DspError::InvalidConfig(format!(
                "need 0 < hop_size ({}) <= window_size ({}) <= fft_size ({})",
                self.hop_size, self.window_size, self.fft_size
            )));
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return Err(DspError::InvalidConfig(format!(
                "need 0 <= fmin ({}) < fmax ({})",
                self.fmin, self.fmax
            )));
        }
        if self.log_floor <= 0.0 {
            return Err(DspError::InvalidConfig("log_floor must be > 0".into()));
        }
        if self.mel_bands == 0 {
            return Err(DspError::InvalidConfig("mel_bands must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of one-sided spectrum bins.
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn hop_seconds(&self, sample_rate: u32) -> f64 {
        self.hop_size as f64 / f64::from(sample_rate)
    }
}

/// One-sided magnitude/phase pair, T x (fft_size/2 + 1).
#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    pub magnitude: Array2<f64>,
    pub phase: Array2<f64>,
}

impl ComplexSpectrogram {
    pub fn new(magnitude: Array2<f64>, phase: Array2<f64>) -> Result<Self, DspError> {
        if magnitude.dim() != phase.dim() {
            return Err(DspError::ShapeMismatch {
                expected: format!("{:?}", magnitude.dim()),
                got: format!("{:?}", phase.dim()),
            });
        }
        if magnitude.iter().any(|&m| m < 0.0) {
            return Err(DspError::InvalidConfig("magnitude must be nonnegative".into()));
        }
        Ok(Self { magnitude, phase })
    }

    pub fn n_frames(&self) -> usize {
        self.magnitude.nrows()
    }
}

/// T x mel_bands nonnegative mel-filterbank energies.
#[derive(Debug, Clone)]
pub struct MelSpectrogram {
    pub frames: Array2<f64>,
    pub sample_rate: u32,
    pub hop_size: usize,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop_size as f64 / f64::from(self.sample_rate)
    }
}

/// T x (fft_size/2 + 1) natural-log magnitudes; every value >= ln(log_floor).
#[derive(Debug, Clone)]
pub struct LogMagnitudeSpectrogram {
    pub frames: Array2<f64>,
    pub sample_rate: u32,
    pub hop_size: usize,
}

impl LogMagnitudeSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }
}
