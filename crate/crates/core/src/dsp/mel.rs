//! Mel filterbank and log-magnitude features.

use ndarray::Array2;

use super::{stft, DspConfig, DspError, LogMagnitudeSpectrogram, MelSpectrogram, Waveform};

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank as an (n_bins x mel_bands) matrix with unit
/// peaks, so a pure tone lands in the band whose center is nearest to it.
pub fn mel_filterbank(
    sample_rate: u32,
    fft_size: usize,
    mel_bands: usize,
    fmin: f64,
    fmax: f64,
) -> Result<Array2<f64>, DspError> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if fmax > nyquist {
        return Err(DspError::InvalidConfig(format!(
            "fmax {} exceeds Nyquist {}",
            fmax, nyquist
        )));
    }
    let n_bins = fft_size / 2 + 1;
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    // mel_bands + 2 edge points; band j spans edges (j, j+1, j+2).
    let edges: Vec<f64> = (0..mel_bands + 2)
        .map(|j| mel_to_hz(mel_lo + (mel_hi - mel_lo) * j as f64 / (mel_bands + 1) as f64))
        .collect();

    let mut fb = Array2::zeros((n_bins, mel_bands));
    for k in 0..n_bins {
        let f = k as f64 * f64::from(sample_rate) / fft_size as f64;
        for j in 0..mel_bands {
            let (left, center, right) = (edges[j], edges[j + 1], edges[j + 2]);
            let w = if f <= left || f >= right {
                0.0
            } else if f <= center {
                (f - left) / (center - left)
            } else {
                (right - f) / (right - center)
            };
            fb[[k, j]] = w;
        }
    }
    Ok(fb)
}

/// Center frequencies (Hz) of each mel band; used to relate bands to tones.
pub fn mel_band_centers(mel_bands: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    (0..mel_bands)
        .map(|j| mel_to_hz(mel_lo + (mel_hi - mel_lo) * (j + 1) as f64 / (mel_bands + 1) as f64))
        .collect()
}

/// Triangular mel filterbank applied to the STFT magnitude. Preserves the
/// frame count of [`stft`].
pub fn mel_spectrogram(w: &Waveform, cfg: &DspConfig) -> Result<MelSpectrogram, DspError> {
    let spec = stft(w, cfg)?;
    let fb = mel_filterbank(w.sample_rate, cfg.fft_size, cfg.mel_bands, cfg.fmin, cfg.fmax)?;
    let frames = spec.magnitude.dot(&fb);
    Ok(MelSpectrogram {
        frames,
        sample_rate: w.sample_rate,
        hop_size: cfg.hop_size,
    })
}

/// Elementwise `ln(|STFT| + log_floor)`.
pub fn log_magnitude(w: &Waveform, cfg: &DspConfig) -> Result<LogMagnitudeSpectrogram, DspError> {
    let spec = stft(w, cfg)?;
    let frames = spec.magnitude.mapv(|m| (m + cfg.log_floor).ln());
    Ok(LogMagnitudeSpectrogram {
        frames,
        sample_rate: w.sample_rate,
        hop_size: cfg.hop_size,
    })
}
