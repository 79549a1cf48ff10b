//! Iterative phase reconstruction from log-magnitude spectrograms.

use ndarray::Array2;
use rand::Rng;

use super::{istft, stft, ComplexSpectrogram, DspConfig, DspError, LogMagnitudeSpectrogram, Waveform};
use crate::rng::derive_rng;

/// Reconstructs a waveform whose STFT magnitude approximates
/// `exp(frames) - log_floor`.
///
/// Phase starts at zero (or seeded uniform when `cfg.random_phase_init`),
/// then alternates istft -> stft -> magnitude replacement for
/// `griffin_lim_iters` rounds. The magnitude mismatch
/// `|| |STFT(x_k)| - target ||` is non-increasing in k.
pub fn griffin_lim(
    m: &LogMagnitudeSpectrogram,
    cfg: &DspConfig,
    seed: u64,
) -> Result<Waveform, DspError> {
    griffin_lim_with_trace(m, cfg, seed).map(|(w, _)| w)
}

/// As [`griffin_lim`], also returning the per-iteration magnitude mismatch
/// (Frobenius norm), index 0 being the mismatch of the initial estimate.
pub fn griffin_lim_with_trace(
    m: &LogMagnitudeSpectrogram,
    cfg: &DspConfig,
    seed: u64,
) -> Result<(Waveform, Vec<f64>), DspError> {
    cfg.validate()?;
    if m.frames.ncols() != cfg.n_bins() {
        return Err(DspError::ShapeMismatch {
            expected: format!("{} spectrum bins", cfg.n_bins()),
            got: format!("{}", m.frames.ncols()),
        });
    }
    let target = m.frames.mapv(|v| (v.exp() - cfg.log_floor).max(0.0));
    let frames = target.nrows();

    let mut phase = if cfg.random_phase_init {
        let mut rng = derive_rng(seed, "griffin-lim-phase");
        Array2::from_shape_fn((frames, cfg.n_bins()), |_| {
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)
        })
    } else {
        Array2::zeros((frames, cfg.n_bins()))
    };

    let mut wave = istft(&ComplexSpectrogram::new(target.clone(), phase.clone())?, cfg)?;
    let mut trace = Vec::with_capacity(cfg.griffin_lim_iters + 1);
    trace.push(mismatch(&stft(&wave, cfg)?.magnitude, &target));

    for _ in 0..cfg.griffin_lim_iters {
        let spec = stft(&wave, cfg)?;
        phase.assign(&spec.phase);
        wave = istft(&ComplexSpectrogram::new(target.clone(), phase.clone())?, cfg)?;
        trace.push(mismatch(&stft(&wave, cfg)?.magnitude, &target));
    }

    wave.sample_rate = m.sample_rate;
    Ok((wave, trace))
}

fn mismatch(mag: &Array2<f64>, target: &Array2<f64>) -> f64 {
    mag.iter()
        .zip(target.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
